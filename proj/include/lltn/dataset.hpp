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

#pragma once

#include "lltn/types.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace lltn {

// dyad-v1 JSON Lines: a header object followed by one segment per line.
Dataset load_dataset(const std::string& path);
Dataset read_dataset(std::istream& in);
void save_dataset(const Dataset& ds, const std::string& path);
void write_dataset(const Dataset& ds, std::ostream& out);

/// An unsegmented recording. Transcript end frames and turn boundaries are
/// 1-based session frames; turns are inclusive [start, end] ranges.
struct Session {
  std::string id;
  MotionSequence listener;
  std::optional<MotionSequence> speaker;
  std::vector<TimedToken> transcript;
  std::vector<std::pair<int, int>> speaker_turns;
};

/// Cuts one segment per speaker turn. The segment starts min_onset_seconds
/// after the turn start and runs to the turn end or max_frames, whichever
/// comes first; windows shorter than min_frames are dropped.
std::vector<DyadSegment> segment_session(const Session& session,
                                         const SegmentationConfig& cfg);

struct NormalizationStats {
  Vec mean;
  Vec std;

  int dim() const { return static_cast<int>(mean.size()); }
};

/// Per-channel population mean/std over every listener frame. Channels with
/// zero variance get std = 1.
NormalizationStats compute_normalization(const std::vector<DyadSegment>& train);

MotionSequence normalize(const MotionSequence& seq, const NormalizationStats& stats);
MotionSequence denormalize(const MotionSequence& seq, const NormalizationStats& stats);
Mat normalize(const Mat& frames, const NormalizationStats& stats);
Mat denormalize(const Mat& frames, const NormalizationStats& stats);

}  // namespace lltn
