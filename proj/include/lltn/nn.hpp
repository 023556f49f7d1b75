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

// Small dense layers with hand-written backward passes. Every layer follows
// the same pattern: forward() fills a cache, backward() consumes it and
// accumulates parameter gradients into a gradient twin of the layer.

#pragma once

#include "lltn/rng.hpp"
#include "lltn/types.hpp"

#include <string>
#include <vector>

namespace lltn::nn {

struct ParamRef {
  std::string name;
  Mat* value;
};
using ParamList = std::vector<ParamRef>;

/// Zero every tensor reachable through `params`.
void zero(const ParamList& params);
std::size_t count_parameters(const ParamList& params);

/// Rounds every parameter to the nearest float32 value (checkpoint precision).
void round_to_float(const ParamList& params);

// ---------------------------------------------------------------------------

struct Linear {
  Mat weight;  // in x out
  Mat bias;    // 1 x out

  Linear() = default;
  Linear(int in, int out) : weight(Mat::Zero(in, out)), bias(Mat::Zero(1, out)) {}

  int in_dim() const { return static_cast<int>(weight.rows()); }
  int out_dim() const { return static_cast<int>(weight.cols()); }

  void init_normal(Rng& rng, double stddev);
  void collect(const std::string& prefix, ParamList& out);

  Mat forward(const Mat& x) const;
  /// Accumulates into grad; returns dL/dx.
  Mat backward(const Mat& x, const Mat& dy, Linear& grad) const;
};

/// 1-D convolution over time. Input is T x in_channels, output
/// T_out x out_channels with T_out = (T + 2*pad - kernel) / stride + 1.
struct Conv1d {
  int kernel = 3;
  int stride = 1;
  int pad = 1;
  Mat weight;  // (kernel * in) x out
  Mat bias;    // 1 x out

  Conv1d() = default;
  Conv1d(int in, int out, int k, int s, int p)
      : kernel(k), stride(s), pad(p), weight(Mat::Zero(k * in, out)), bias(Mat::Zero(1, out)) {}

  int in_channels() const { return static_cast<int>(weight.rows()) / kernel; }
  int out_channels() const { return static_cast<int>(weight.cols()); }
  int output_length(int T) const { return (T + 2 * pad - kernel) / stride + 1; }

  void init_kaiming(Rng& rng);
  void collect(const std::string& prefix, ParamList& out);

  struct Cache {
    Mat cols;
    int input_length = 0;
  };
  Mat forward(const Mat& x, Cache& cache) const;
  Mat backward(const Mat& dy, const Cache& cache, Conv1d& grad) const;
};

struct LayerNorm {
  Mat gain;  // 1 x d
  Mat bias;  // 1 x d
  double eps = 1e-5;

  LayerNorm() = default;
  explicit LayerNorm(int d) : gain(Mat::Ones(1, d)), bias(Mat::Zero(1, d)) {}

  void collect(const std::string& prefix, ParamList& out);

  struct Cache {
    Mat normalized;
    Vec inv_std;
  };
  Mat forward(const Mat& x, Cache& cache) const;
  Mat backward(const Mat& dy, const Cache& cache, LayerNorm& grad) const;
};

Mat relu(const Mat& x);
/// dy masked by x > 0.
Mat relu_backward(const Mat& x, const Mat& dy);

/// tanh approximation of GELU.
Mat gelu(const Mat& x);
Mat gelu_backward(const Mat& x, const Mat& dy);

/// Repeats every row twice.
Mat upsample2(const Mat& x);
Mat upsample2_backward(const Mat& dy);

/// Smooth-L1 (Huber with transition 1) summed over all elements, and its
/// gradient with respect to `pred`.
double smooth_l1(const Mat& pred, const Mat& target);
Mat smooth_l1_grad(const Mat& pred, const Mat& target);

// ---------------------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// One bias-corrected Adam update of `params` using `grads` (same layout).
  void step(const ParamList& params, const ParamList& grads, double lr);
  long steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  long t_ = 0;
};

/// Linear warmup over `warmup_steps`, then a one-shot multiplication by
/// `decay_factor` from `decay_step` on.
struct LrSchedule {
  double base = 2e-4;
  int warmup_steps = 1000;
  int decay_step = 200000;
  double decay_factor = 0.05;

  double at(int step) const;
};

}  // namespace lltn::nn
