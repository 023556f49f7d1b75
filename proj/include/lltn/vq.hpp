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

// Motion VQ-VAE: a strided 1-D convolutional encoder that turns r = 2^L
// frames of normalized listener motion into one latent, a nearest-row
// quantizer against an EMA-maintained codebook, and a mirrored decoder that
// upsamples codebook rows back to frames.

#pragma once

#include "lltn/dataset.hpp"
#include "lltn/nn.hpp"
#include "json.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace lltn {

struct VqConfig {
  int codebook_size = 256;
  int embed_dim = 64;
  int downsample_levels = 3;
  int channel_width = 128;
  int train_segment_frames = 32;
  int batch_size = 32;

  double reconstruct_weight = 1.0;
  double velocity_weight = 0.5;
  double embed_weight = 0.02;

  double ema_decay = 0.99;
  double reset_usage_threshold = 1.0;
  int reset_interval = 200;

  double learning_rate = 2e-4;
  int total_steps = 300000;
  int warmup_steps = 1000;
  int decay_step = 200000;
  double decay_factor = 0.05;

  int frames_per_token() const { return 1 << downsample_levels; }
  void validate() const;
};

struct Codebook {
  Mat embeddings;  // V x d_c
  Vec ema_counts;  // V
  Mat ema_sums;    // V x d_c

  Codebook() = default;
  Codebook(int size, int dim)
      : embeddings(Mat::Zero(size, dim)), ema_counts(Vec::Ones(size)), ema_sums(Mat::Zero(size, dim)) {}

  int size() const { return static_cast<int>(embeddings.rows()); }
  int dim() const { return static_cast<int>(embeddings.cols()); }
};

/// x + conv1x1(relu(conv3(relu(x))))
struct ResBlock {
  nn::Conv1d conv3;
  nn::Conv1d conv1;

  ResBlock() = default;
  explicit ResBlock(int channels)
      : conv3(channels, channels, 3, 1, 1), conv1(channels, channels, 1, 1, 0) {}

  void collect(const std::string& prefix, nn::ParamList& out);

  struct Cache {
    Mat input;
    Mat hidden;
    nn::Conv1d::Cache c3, c1;
  };
  Mat forward(const Mat& x, Cache& cache) const;
  Mat backward(const Mat& dy, const Cache& cache, ResBlock& grad) const;
};

struct VqEncoder {
  nn::Conv1d input;            // D -> C, k3
  std::vector<nn::Conv1d> down;  // C -> C, k4 s2
  std::vector<ResBlock> res;
  nn::Conv1d output;           // C -> d_c, k3
};

struct VqDecoder {
  nn::Conv1d input;            // d_c -> C, k3
  std::vector<ResBlock> res;
  std::vector<nn::Conv1d> up;  // after 2x nearest upsample, C -> C, k3
  nn::Conv1d output;           // C -> D, k3
};

struct VqParams {
  VqConfig config;
  int frame_dim = 0;
  int fps = kDefaultFps;
  NormalizationStats stats;
  VqEncoder encoder;
  VqDecoder decoder;
  Codebook codebook;

  int frames_per_token() const { return config.frames_per_token(); }

  /// Encoder and decoder weights (the tensors Adam updates).
  nn::ParamList trainable();
};

/// Allocates a model with randomly initialized encoder/decoder and unit
/// normalization statistics.
VqParams make_vq_params(const VqConfig& cfg, int frame_dim, std::uint64_t seed);

/// Zeroed gradient twin of `params`.
VqParams zeros_like(const VqParams& params);

struct MotionTokenSequence {
  std::vector<int> tokens;
  int frames_per_token = 8;
  int pad = 0;  // frames of right padding added before encoding

  int frame_count() const { return static_cast<int>(tokens.size()) * frames_per_token - pad; }
  friend bool operator==(const MotionTokenSequence&, const MotionTokenSequence&) = default;
};

/// T x D normalized frames -> (T/r) x d_c latents. T must be a multiple of r.
Mat encode(const VqParams& params, const Mat& normalized);

/// Index of the nearest codebook row (squared Euclidean), lowest index on ties.
int quantize(const Codebook& codebook, const Eigen::Ref<const RowVec>& z);
std::vector<int> quantize_all(const Codebook& codebook, const Mat& latents);

/// (num tokens) x d_c codebook rows -> (r * num tokens) x D normalized frames.
Mat decode_latents(const VqParams& params, const Mat& quantized);

/// Decodes tokens to denormalized motion, trimming the recorded padding.
MotionSequence decode(const VqParams& params, const MotionTokenSequence& tokens);

/// Pads by repeating the final frame to a multiple of r, then encodes and
/// quantizes. `raw` is in data units (not normalized).
MotionTokenSequence tokenize_motion(const VqParams& params, const MotionSequence& raw);

struct VqLosses {
  double embed = 0;
  double reconstruct = 0;
  double velocity = 0;
  double total = 0;
};

struct VqBatchResult {
  VqLosses losses;  // batch means of per-sequence sums
  Mat latents;      // all encoder outputs of the batch, stacked
  std::vector<int> assignments;
};

/// Losses for a batch of normalized sequences. With `grad` set, accumulates
/// d(total)/d(params) into it; the quantizer is crossed with the
/// straight-through estimator. `frozen_offsets`, when given, replaces the
/// codebook lookup by z + offset (one offset matrix per sequence), which makes
/// the straight-through surrogate an ordinary differentiable function.
VqBatchResult vq_losses(const VqParams& params, std::span<const Mat> batch, VqParams* grad = nullptr,
                        const std::vector<Mat>* frozen_offsets = nullptr);

/// Quantization offsets C[q(z)] - z for every sequence of the batch.
std::vector<Mat> quantization_offsets(const VqParams& params, std::span<const Mat> batch);

/// counts <- g*counts + (1-g)*n_j, sums <- g*sums + (1-g)*sum_j(z),
/// row_j <- sums_j / max(counts_j, 1e-5).
void ema_update(Codebook& codebook, const Mat& latents, const std::vector<int>& assignments, double decay);

/// Reseeds every row whose EMA count is below `threshold` with a uniformly
/// drawn row of `recent_latents`, resetting its EMA stats to (1, latent).
/// Returns the number of rows reseeded.
int codebook_reset(Codebook& codebook, const Mat& recent_latents, double threshold, Rng& rng);

struct VqStepLog {
  int step = 0;
  double lr = 0;
  VqLosses losses;
  int resets = 0;
};

struct VqTrainResult {
  VqParams params;
  std::vector<VqStepLog> trace;
};

using VqProgress = std::function<void(const VqStepLog&)>;

/// Adam with warmup/step-decay schedule on random train_segment_frames crops
/// of the training listeners; EMA codebook updates every step; dead-code
/// resets every reset_interval steps. Deterministic for a given seed.
VqTrainResult train_vqvae(const std::vector<DyadSegment>& train, const VqConfig& cfg, std::uint64_t seed,
                          const VqProgress& progress = {});

/// Fraction of codebook rows used when tokenizing `segments`.
double codebook_usage(const VqParams& params, const std::vector<DyadSegment>& segments);

nlohmann::json to_json(const VqConfig& c);
/// Missing keys keep their defaults.
VqConfig vq_config_from(const nlohmann::json& j);

void save_vq(const VqParams& params, const std::string& path);
VqParams load_vq(const std::string& path);

}  // namespace lltn
