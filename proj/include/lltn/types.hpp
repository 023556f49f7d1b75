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

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lltn {

/// Row-major dense matrix. Sequences are stored time-major: one row per frame
/// (or token), one column per channel.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

/// Base of every error raised by the library. The C API maps subclasses onto
/// status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kDefaultFps = 30;
inline constexpr int kRotationDims = 3;

/// Listener motion over T frames. Row t is the face vector f_t: d_m expression
/// coefficients followed by 3 Euler angles (radians).
struct MotionSequence {
  Mat frames;
  int fps = kDefaultFps;

  MotionSequence() = default;
  MotionSequence(Mat f, int rate = kDefaultFps) : frames(std::move(f)), fps(rate) {}

  int length() const { return static_cast<int>(frames.rows()); }
  int frame_dim() const { return static_cast<int>(frames.cols()); }
  int expression_dim() const { return frame_dim() - kRotationDims; }

  auto expression() const { return frames.leftCols(expression_dim()); }
  auto rotation() const { return frames.rightCols(kRotationDims); }

  friend bool operator==(const MotionSequence& a, const MotionSequence& b) {
    return a.fps == b.fps && a.frames.rows() == b.frames.rows() &&
           a.frames.cols() == b.frames.cols() && a.frames == b.frames;
  }
};

/// A word (or punctuation mark) and the frame at which it finishes.
/// Segment words carry end_frame in [1, T]; history words carry end_frame <= 0.
struct TimedToken {
  std::string text;
  int end_frame = 0;

  friend bool operator==(const TimedToken&, const TimedToken&) = default;
};

struct DyadSegment {
  std::string id;
  MotionSequence listener;
  std::optional<MotionSequence> speaker;
  std::vector<TimedToken> words;
  std::vector<TimedToken> history_words;

  int length() const { return listener.length(); }

  friend bool operator==(const DyadSegment&, const DyadSegment&) = default;
};

struct SegmentationConfig {
  int min_frames = 24;
  int max_frames = 240;
  double min_onset_seconds = 3.0;
  double history_seconds = 3.0;

  void validate() const;
};

/// A set of segments sharing one frame dimension and frame rate.
struct Dataset {
  int expression_dim = 50;
  int fps = kDefaultFps;
  std::vector<DyadSegment> segments;

  int frame_dim() const { return expression_dim + kRotationDims; }
  std::size_t size() const { return segments.size(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Throws InvariantError naming the segment and field on the first violation.
void validate_segment(const DyadSegment& seg, int expression_dim, int fps,
                      const SegmentationConfig& cfg = {});

}  // namespace lltn
