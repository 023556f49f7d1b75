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

// Evaluation of generated listener motion against ground truth.

#pragma once

#include "lltn/rng.hpp"
#include "lltn/types.hpp"
#include "lltn/vq.hpp"
#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lltn {

/// Linear valence readout: clamp(w . expression + b, -1, 1).
struct AffectModel {
  Vec weights;
  double bias = 0;

  double operator()(const Eigen::Ref<const RowVec>& expression) const;

  nlohmann::json to_json() const;
  static AffectModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static AffectModel load(const std::string& path);
};

double affect(const AffectModel& model, const MotionSequence& seq, int frame);

/// Sliding mean of per-frame affect, stride one frame. Sequences shorter than
/// the window give a single value over the whole sequence.
std::vector<double> window_affect(const AffectModel& model, const MotionSequence& seq, int window);

/// Root mean square difference of the two window series (truncated to the
/// shorter one).
double l2_affect(const AffectModel& model, const MotionSequence& pred, const MotionSequence& gt, int window);

/// Mean over frames of the Euclidean distance between face vectors.
double l2_metric(const MotionSequence& pred, const MotionSequence& gt);

/// Per-coefficient population variance over time, averaged over coefficients.
double variation(const MotionSequence& seq);

/// Mean distance between `pairs` random frame pairs (i != j within a pair).
double diversity(const MotionSequence& seq, Rng& rng, int pairs = 30);

/// Square root of a symmetric positive semi-definite matrix; negative
/// eigenvalues are clamped to zero.
Mat sqrt_psd(const Mat& a);

/// Population mean and covariance of the rows of `samples`.
void mean_cov(const Mat& samples, RowVec& mean, Mat& cov);

/// Frechet distance between Gaussian fits of two sample sets (rows).
double frechet_distance(const Mat& a, const Mat& b);
double frechet_distance(const RowVec& mu_a, const Mat& cov_a, const RowVec& mu_b, const Mat& cov_b);

/// Non-overlapping windows of `window` frames from each sequence's columns
/// [col, col + cols), flattened row-major into one row per window.
Mat window_samples(const std::vector<const Mat*>& seqs, int col, int cols, int window);

struct FdPair {
  double expression = 0;
  double pose = 0;
};

FdPair fd_motion(const std::vector<MotionSequence>& pred, const std::vector<MotionSequence>& gt, int window = 32);

/// FD over [listener | speaker] frame concatenations, expression and pose
/// spaces summed.
double paired_fd(const std::vector<MotionSequence>& pred, const std::vector<MotionSequence>& speakers,
                 const std::vector<MotionSequence>& gt, int window = 32);

/// Entropy (nats) of the pooled token histogram.
double shannon_index(const std::vector<MotionTokenSequence>& tokens);

/// Standard deviation of means over `resamples` with-replacement resamples.
double bootstrap_se(const std::vector<double>& values, int resamples, std::uint64_t seed);

struct MetricValue {
  double value = 0;
  double se = 0;
};

struct MetricsReport {
  int segments = 0;
  MetricValue l2;
  MetricValue fd_expression;
  MetricValue fd_pose;
  MetricValue variation;
  MetricValue diversity;
  std::optional<MetricValue> pfd;
  MetricValue l2_affect;  // stored x100
  std::optional<MetricValue> shannon_index;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

struct EvalOptions {
  int fd_window = 32;
  int diversity_pairs = 30;
  int bootstrap_resamples = 10000;
  /// Resamples for the set-level metrics (FD, P-FD), each of which needs
  /// eigen-decompositions; 0 reports their SE as 0.
  int fd_bootstrap_resamples = 20;
  std::uint64_t seed = 0;
};

/// Metrics of predictions[i] against segments[i]. `vq` tokenizes the
/// predictions for the Shannon index; without it the index is omitted.
MetricsReport evaluate(const std::vector<MotionSequence>& predictions, const std::vector<DyadSegment>& segments,
                       const AffectModel& affect_model, const VqParams* vq, const EvalOptions& options = {});

/// Aligned text table, one row per named report.
std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace lltn
