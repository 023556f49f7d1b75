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

#include "lltn/dataset.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>

namespace lltn {

using nlohmann::json;

void SegmentationConfig::validate() const {
  if (min_frames <= 0 || max_frames <= 0 || min_onset_seconds < 0 || history_seconds < 0)
    throw InvariantError("segmentation config: values must be positive");
  if (min_frames > max_frames)
    throw InvariantError("segmentation config: min_frames > max_frames");
}

namespace {

void check_tokens(const DyadSegment& seg, const std::vector<TimedToken>& toks,
                  const char* field, int lo, int hi) {
  int prev = lo;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& tok = toks[i];
    if (tok.end_frame < lo || tok.end_frame > hi)
      throw InvariantError("segment '" + seg.id + "': " + field + "[" + std::to_string(i) +
                           "] end_frame " + std::to_string(tok.end_frame) + " outside [" +
                           std::to_string(lo) + ", " + std::to_string(hi) + "]");
    if (tok.end_frame < prev)
      throw InvariantError("segment '" + seg.id + "': " + field + " end_frame decreases at index " +
                           std::to_string(i));
    prev = tok.end_frame;
  }
}

void check_motion(const DyadSegment& seg, const MotionSequence& m, const char* field,
                  int frame_dim, int fps) {
  if (m.frame_dim() != frame_dim)
    throw InvariantError("segment '" + seg.id + "': " + field + " has " +
                         std::to_string(m.frame_dim()) + " channels, expected " +
                         std::to_string(frame_dim));
  if (m.fps != fps)
    throw InvariantError("segment '" + seg.id + "': " + field + " fps mismatch");
  if (!m.frames.allFinite())
    throw InvariantError("segment '" + seg.id + "': " + field + " contains non-finite values");
}

Mat frames_from_json(const json& rows, int frame_dim, const std::string& what) {
  if (!rows.is_array()) throw ParseError(what + ": expected an array of frames");
  Mat m(static_cast<Eigen::Index>(rows.size()), frame_dim);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const auto& row = rows[t];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(frame_dim))
      throw ParseError(what + ": frame " + std::to_string(t) + " must hold " +
                       std::to_string(frame_dim) + " numbers");
    for (int c = 0; c < frame_dim; ++c) {
      if (!row[c].is_number()) throw ParseError(what + ": non-numeric value in frame " + std::to_string(t));
      m(static_cast<Eigen::Index>(t), c) = row[c].get<double>();
    }
  }
  return m;
}

json frames_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(t, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<TimedToken> tokens_from_json(const json& arr, const std::string& what) {
  std::vector<TimedToken> out;
  if (arr.is_null()) return out;
  if (!arr.is_array()) throw ParseError(what + ": expected an array");
  for (const auto& w : arr) {
    if (!w.is_object() || !w.contains("t") || !w.contains("end_frame"))
      throw ParseError(what + ": each token needs \"t\" and \"end_frame\"");
    out.push_back({w.at("t").get<std::string>(), w.at("end_frame").get<int>()});
  }
  return out;
}

json tokens_to_json(const std::vector<TimedToken>& toks) {
  json arr = json::array();
  for (const auto& w : toks) arr.push_back({{"t", w.text}, {"end_frame", w.end_frame}});
  return arr;
}

}  // namespace

void validate_segment(const DyadSegment& seg, int expression_dim, int fps,
                      const SegmentationConfig& cfg) {
  const int frame_dim = expression_dim + kRotationDims;
  const int T = seg.length();
  if (T < cfg.min_frames)
    throw InvariantError("segment '" + seg.id + "': listener has " + std::to_string(T) +
                         " frames, below min_frames " + std::to_string(cfg.min_frames));
  if (T > cfg.max_frames)
    throw InvariantError("segment '" + seg.id + "': listener has " + std::to_string(T) +
                         " frames, above max_frames " + std::to_string(cfg.max_frames));
  check_motion(seg, seg.listener, "listener", frame_dim, fps);
  if (seg.speaker) {
    check_motion(seg, *seg.speaker, "speaker", frame_dim, fps);
    if (seg.speaker->length() != T)
      throw InvariantError("segment '" + seg.id + "': speaker length differs from listener");
  }
  check_tokens(seg, seg.words, "words", 1, T);
  check_tokens(seg, seg.history_words, "history_words", std::numeric_limits<int>::min(), 0);
}

Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        if (obj.value("format", "") != "dyad-v1")
          throw ParseError("expected header with \"format\":\"dyad-v1\"");
        ds.expression_dim = obj.at("d_m").get<int>();
        ds.fps = obj.value("fps", kDefaultFps);
        if (ds.expression_dim <= 0 || ds.fps <= 0) throw ParseError("d_m and fps must be positive");
        have_header = true;
        continue;
      }
      DyadSegment seg;
      seg.id = obj.at("id").get<std::string>();
      seg.listener = MotionSequence(frames_from_json(obj.at("listener"), ds.frame_dim(), "listener"), ds.fps);
      if (obj.contains("speaker") && !obj["speaker"].is_null())
        seg.speaker = MotionSequence(frames_from_json(obj["speaker"], ds.frame_dim(), "speaker"), ds.fps);
      seg.words = tokens_from_json(obj.value("words", json::array()), "words");
      seg.history_words = tokens_from_json(obj.value("history_words", json::array()), "history_words");
      ds.segments.push_back(std::move(seg));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    validate_segment(ds.segments.back(), ds.expression_dim, ds.fps);
  }
  if (!have_header) throw ParseError("line 1: missing dyad-v1 header");
  return ds;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

void write_dataset(const Dataset& ds, std::ostream& out) {
  out << json{{"format", "dyad-v1"}, {"d_m", ds.expression_dim}, {"fps", ds.fps}}.dump() << '\n';
  for (const auto& seg : ds.segments) {
    json obj;
    obj["id"] = seg.id;
    obj["listener"] = frames_to_json(seg.listener.frames);
    obj["speaker"] = seg.speaker ? frames_to_json(seg.speaker->frames) : json(nullptr);
    obj["words"] = tokens_to_json(seg.words);
    obj["history_words"] = tokens_to_json(seg.history_words);
    out << obj.dump() << '\n';
  }
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset '" + path + "'");
  write_dataset(ds, out);
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<DyadSegment> segment_session(const Session& session, const SegmentationConfig& cfg) {
  cfg.validate();
  std::vector<DyadSegment> out;
  const int fps = session.listener.fps;
  const int total = session.listener.length();
  const int onset = static_cast<int>(std::lround(cfg.min_onset_seconds * fps));
  const int history = static_cast<int>(std::lround(cfg.history_seconds * fps));

  for (std::size_t turn = 0; turn < session.speaker_turns.size(); ++turn) {
    const auto [turn_start, turn_end] = session.speaker_turns[turn];
    const int first = turn_start + onset;
    const int last = std::min({turn_end, first + cfg.max_frames - 1, total});
    const int T = last - first + 1;
    if (T < cfg.min_frames) continue;

    DyadSegment seg;
    seg.id = session.id + "/turn" + std::to_string(turn);
    seg.listener = MotionSequence(session.listener.frames.middleRows(first - 1, T), fps);
    if (session.speaker)
      seg.speaker = MotionSequence(session.speaker->frames.middleRows(first - 1, T), fps);
    for (const auto& tok : session.transcript) {
      const int shifted = tok.end_frame - first + 1;
      if (tok.end_frame >= first && tok.end_frame <= last)
        seg.words.push_back({tok.text, shifted});
      else if (tok.end_frame < first && tok.end_frame >= first - history)
        seg.history_words.push_back({tok.text, shifted});
    }
    out.push_back(std::move(seg));
  }
  return out;
}

NormalizationStats compute_normalization(const std::vector<DyadSegment>& train) {
  if (train.empty()) throw InvariantError("compute_normalization: empty training set");
  const int dim = train.front().listener.frame_dim();
  Vec sum = Vec::Zero(dim);
  double count = 0;
  for (const auto& seg : train) {
    if (seg.listener.frame_dim() != dim) throw ShapeError("compute_normalization: mixed frame dims");
    sum += seg.listener.frames.colwise().sum().transpose();
    count += static_cast<double>(seg.listener.length());
  }
  NormalizationStats stats;
  stats.mean = sum / count;
  Vec sq = Vec::Zero(dim);
  for (const auto& seg : train) {
    Mat centered = seg.listener.frames.rowwise() - stats.mean.transpose();
    sq += centered.array().square().colwise().sum().matrix().transpose();
  }
  stats.std = (sq / count).array().sqrt().matrix();
  for (int c = 0; c < dim; ++c)
    if (!(stats.std[c] > 0)) stats.std[c] = 1.0;
  return stats;
}

Mat normalize(const Mat& frames, const NormalizationStats& stats) {
  if (frames.cols() != stats.dim()) throw ShapeError("normalize: dimension mismatch");
  return ((frames.rowwise() - stats.mean.transpose()).array().rowwise() /
          stats.std.transpose().array())
      .matrix();
}

Mat denormalize(const Mat& frames, const NormalizationStats& stats) {
  if (frames.cols() != stats.dim()) throw ShapeError("denormalize: dimension mismatch");
  return ((frames.array().rowwise() * stats.std.transpose().array()).matrix().rowwise() +
          stats.mean.transpose());
}

MotionSequence normalize(const MotionSequence& seq, const NormalizationStats& stats) {
  return MotionSequence(normalize(seq.frames, stats), seq.fps);
}

MotionSequence denormalize(const MotionSequence& seq, const NormalizationStats& stats) {
  return MotionSequence(denormalize(seq.frames, stats), seq.fps);
}

}  // namespace lltn
