// Copyright 2026 The LLTN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lltn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

namespace lltn {

namespace {

constexpr char kMagic[4] = {'L', 'L', 'T', 'N'};
// Upper bounds that keep a corrupt header from triggering huge allocations.
constexpr std::uint32_t kMaxNameLength = 4096;
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

template <typename U>
void put_le(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::istream& in, const char* what) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U)))
    throw ParseError(std::string("checkpoint truncated while reading ") + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

std::string shape_string(const std::vector<std::uint64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

}  // namespace

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put_le<std::uint64_t>(out, d);
    for (float f : t.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
}

std::vector<NamedTensor> read_tensors(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw ParseError("checkpoint truncated before magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("checkpoint magic mismatch (expected LLTN)");
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(in, "tensor count");
  std::vector<NamedTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = get_le<std::uint32_t>(in, "name length");
    if (name_len > kMaxNameLength) throw ParseError("checkpoint tensor name too long");
    t.name.resize(name_len);
    if (!in.read(t.name.data(), name_len)) throw ParseError("checkpoint truncated in tensor name");
    const auto rank = get_le<std::uint32_t>(in, "rank");
    if (rank > kMaxRank) throw ParseError("tensor '" + t.name + "': rank too large");
    std::uint64_t elements = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(get_le<std::uint64_t>(in, "dimension"));
      elements *= t.shape.back();
      if (elements > kMaxElements) throw ParseError("tensor '" + t.name + "': too many elements");
    }
    t.data.resize(elements);
    for (auto& f : t.data) f = std::bit_cast<float>(get_le<std::uint32_t>(in, "tensor data"));
    tensors.push_back(std::move(t));
  }
  return tensors;
}

std::vector<NamedTensor> to_tensors(const nn::ParamList& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    NamedTensor t;
    t.name = p.name;
    t.shape = {static_cast<std::uint64_t>(p.value->rows()), static_cast<std::uint64_t>(p.value->cols())};
    t.data.resize(static_cast<std::size_t>(p.value->size()));
    for (Eigen::Index i = 0; i < p.value->size(); ++i)
      t.data[static_cast<std::size_t>(i)] = static_cast<float>(p.value->data()[i]);
    out.push_back(std::move(t));
  }
  return out;
}

void assign_tensors(const std::vector<NamedTensor>& tensors, const nn::ParamList& params) {
  std::map<std::string, const nn::ParamRef*> by_name;
  for (const auto& p : params) by_name[p.name] = &p;
  std::map<std::string, bool> seen;
  for (const auto& t : tensors) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw ShapeError("checkpoint has unknown tensor '" + t.name + "'");
    if (seen[t.name]) throw ShapeError("checkpoint repeats tensor '" + t.name + "'");
    seen[t.name] = true;
    Mat& dst = *it->second->value;
    const std::vector<std::uint64_t> want = {static_cast<std::uint64_t>(dst.rows()),
                                             static_cast<std::uint64_t>(dst.cols())};
    if (t.shape != want)
      throw ShapeError("tensor '" + t.name + "' has shape " + shape_string(t.shape) + ", expected " +
                       shape_string(want));
    for (Eigen::Index i = 0; i < dst.size(); ++i)
      dst.data()[i] = static_cast<double>(t.data[static_cast<std::size_t>(i)]);
  }
  for (const auto& p : params)
    if (!seen[p.name]) throw ShapeError("checkpoint is missing tensor '" + p.name + "'");
}

void save_params(const std::string& path, const nn::ParamList& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  write_tensors(out, to_tensors(params));
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<NamedTensor> load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  return read_tensors(in);
}

void load_params(const std::string& path, const nn::ParamList& params) {
  assign_tensors(load_tensors(path), params);
}

}  // namespace lltn
