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

// Named-tensor archive ("LLTN v1"), shared by the VQ-VAE and the listener LM.
//
//   "LLTN" | u32 version | u32 tensor_count
//   per tensor: u32 name_len | name bytes | u32 rank | u64 dims[rank] | f32 data[]
//
// All integers and floats are little-endian; data is row-major.

#pragma once

#include "lltn/nn.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace lltn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> data;
};

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors(std::istream& in);

std::vector<NamedTensor> to_tensors(const nn::ParamList& params);

/// Copies archive tensors into `params`. Every archive name must exist in
/// `params` with the same shape and every parameter must be present.
void assign_tensors(const std::vector<NamedTensor>& tensors, const nn::ParamList& params);

void save_params(const std::string& path, const nn::ParamList& params);
void load_params(const std::string& path, const nn::ParamList& params);
std::vector<NamedTensor> load_tensors(const std::string& path);

}  // namespace lltn
