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

#include "lltn/vq.hpp"

#include "lltn/checkpoint.hpp"
#include "json.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <set>

namespace lltn {

using nlohmann::json;

void VqConfig::validate() const {
  if (codebook_size <= 0 || embed_dim <= 0 || channel_width <= 0 || batch_size <= 0)
    throw InvariantError("vq config: sizes must be positive");
  if (downsample_levels < 0 || downsample_levels > 8) throw InvariantError("vq config: downsample_levels out of range");
  if (train_segment_frames <= 0 || train_segment_frames % frames_per_token() != 0)
    throw InvariantError("vq config: train_segment_frames must be a positive multiple of r = " +
                         std::to_string(frames_per_token()));
  if (reconstruct_weight < 0 || velocity_weight < 0 || embed_weight < 0)
    throw InvariantError("vq config: loss weights must be >= 0");
  if (!(ema_decay > 0 && ema_decay < 1)) throw InvariantError("vq config: ema_decay must lie in (0, 1)");
  if (reset_interval <= 0 || total_steps < 0 || warmup_steps < 0)
    throw InvariantError("vq config: step counts must be non-negative");
}

// ---------------------------------------------------------------------------

void ResBlock::collect(const std::string& prefix, nn::ParamList& out) {
  conv3.collect(prefix + ".conv3", out);
  conv1.collect(prefix + ".conv1", out);
}

Mat ResBlock::forward(const Mat& x, Cache& cache) const {
  cache.input = x;
  cache.hidden = conv3.forward(nn::relu(x), cache.c3);
  return x + conv1.forward(nn::relu(cache.hidden), cache.c1);
}

Mat ResBlock::backward(const Mat& dy, const Cache& cache, ResBlock& grad) const {
  Mat dh = nn::relu_backward(cache.hidden, conv1.backward(dy, cache.c1, grad.conv1));
  Mat dx = nn::relu_backward(cache.input, conv3.backward(dh, cache.c3, grad.conv3));
  return dx + dy;
}

nn::ParamList VqParams::trainable() {
  nn::ParamList out;
  encoder.input.collect("vq.encoder.input", out);
  for (std::size_t l = 0; l < encoder.down.size(); ++l) {
    encoder.down[l].collect("vq.encoder.down" + std::to_string(l), out);
    encoder.res[l].collect("vq.encoder.res" + std::to_string(l), out);
  }
  encoder.output.collect("vq.encoder.output", out);
  decoder.input.collect("vq.decoder.input", out);
  for (std::size_t l = 0; l < decoder.up.size(); ++l) {
    decoder.res[l].collect("vq.decoder.res" + std::to_string(l), out);
    decoder.up[l].collect("vq.decoder.up" + std::to_string(l), out);
  }
  decoder.output.collect("vq.decoder.output", out);
  return out;
}

VqParams make_vq_params(const VqConfig& cfg, int frame_dim, std::uint64_t seed) {
  cfg.validate();
  if (frame_dim <= 0) throw InvariantError("vq: frame_dim must be positive");
  VqParams p;
  p.config = cfg;
  p.frame_dim = frame_dim;
  p.stats.mean = Vec::Zero(frame_dim);
  p.stats.std = Vec::Ones(frame_dim);
  const int C = cfg.channel_width;
  p.encoder.input = nn::Conv1d(frame_dim, C, 3, 1, 1);
  p.decoder.input = nn::Conv1d(cfg.embed_dim, C, 3, 1, 1);
  for (int l = 0; l < cfg.downsample_levels; ++l) {
    p.encoder.down.emplace_back(C, C, 4, 2, 1);
    p.encoder.res.emplace_back(C);
    p.decoder.res.emplace_back(C);
    p.decoder.up.emplace_back(C, C, 3, 1, 1);
  }
  p.encoder.output = nn::Conv1d(C, cfg.embed_dim, 3, 1, 1);
  p.decoder.output = nn::Conv1d(C, frame_dim, 3, 1, 1);
  p.codebook = Codebook(cfg.codebook_size, cfg.embed_dim);

  Rng rng = substream(seed, "vq-init");
  auto init_res = [&](ResBlock& b) {
    b.conv3.init_kaiming(rng);
    b.conv1.init_kaiming(rng);
    b.conv1.weight *= 0.1;  // residual branches start near identity
  };
  p.encoder.input.init_kaiming(rng);
  for (int l = 0; l < cfg.downsample_levels; ++l) {
    p.encoder.down[l].init_kaiming(rng);
    init_res(p.encoder.res[l]);
  }
  p.encoder.output.init_kaiming(rng);
  p.decoder.input.init_kaiming(rng);
  for (int l = 0; l < cfg.downsample_levels; ++l) {
    init_res(p.decoder.res[l]);
    p.decoder.up[l].init_kaiming(rng);
  }
  p.decoder.output.init_kaiming(rng);
  p.decoder.output.weight *= 0.1;
  for (Eigen::Index i = 0; i < p.codebook.embeddings.size(); ++i)
    p.codebook.embeddings.data()[i] = normal(rng, 0.0, 1.0);
  p.codebook.ema_sums = p.codebook.embeddings;
  return p;
}

VqParams zeros_like(const VqParams& params) {
  VqParams g = params;
  nn::zero(g.trainable());
  return g;
}

// ---------------------------------------------------------------------------

namespace {

struct EncoderCache {
  nn::Conv1d::Cache input;
  Mat input_pre;
  std::vector<nn::Conv1d::Cache> down;
  std::vector<Mat> down_pre;
  std::vector<ResBlock::Cache> res;
  nn::Conv1d::Cache output;
};

struct DecoderCache {
  nn::Conv1d::Cache input;
  Mat input_pre;
  std::vector<ResBlock::Cache> res;
  std::vector<nn::Conv1d::Cache> up;
  std::vector<Mat> up_pre;
  nn::Conv1d::Cache output;
};

Mat encoder_forward(const VqEncoder& enc, const Mat& x, EncoderCache& c) {
  const std::size_t L = enc.down.size();
  c.down.resize(L);
  c.down_pre.resize(L);
  c.res.resize(L);
  c.input_pre = enc.input.forward(x, c.input);
  Mat h = nn::relu(c.input_pre);
  for (std::size_t l = 0; l < L; ++l) {
    c.down_pre[l] = enc.down[l].forward(h, c.down[l]);
    h = enc.res[l].forward(nn::relu(c.down_pre[l]), c.res[l]);
  }
  return enc.output.forward(h, c.output);
}

Mat encoder_backward(const VqEncoder& enc, const Mat& dz, const EncoderCache& c, VqEncoder& g) {
  Mat dh = enc.output.backward(dz, c.output, g.output);
  for (std::size_t l = enc.down.size(); l-- > 0;) {
    dh = enc.res[l].backward(dh, c.res[l], g.res[l]);
    dh = enc.down[l].backward(nn::relu_backward(c.down_pre[l], dh), c.down[l], g.down[l]);
  }
  return enc.input.backward(nn::relu_backward(c.input_pre, dh), c.input, g.input);
}

Mat decoder_forward(const VqDecoder& dec, const Mat& zq, DecoderCache& c) {
  const std::size_t L = dec.up.size();
  c.res.resize(L);
  c.up.resize(L);
  c.up_pre.resize(L);
  c.input_pre = dec.input.forward(zq, c.input);
  Mat h = nn::relu(c.input_pre);
  for (std::size_t l = 0; l < L; ++l) {
    h = dec.res[l].forward(h, c.res[l]);
    c.up_pre[l] = dec.up[l].forward(nn::upsample2(h), c.up[l]);
    h = nn::relu(c.up_pre[l]);
  }
  return dec.output.forward(h, c.output);
}

Mat decoder_backward(const VqDecoder& dec, const Mat& dy, const DecoderCache& c, VqDecoder& g) {
  Mat dh = dec.output.backward(dy, c.output, g.output);
  for (std::size_t l = dec.up.size(); l-- > 0;) {
    dh = dec.up[l].backward(nn::relu_backward(c.up_pre[l], dh), c.up[l], g.up[l]);
    dh = dec.res[l].backward(nn::upsample2_backward(dh), c.res[l], g.res[l]);
  }
  return dec.input.backward(nn::relu_backward(c.input_pre, dh), c.input, g.input);
}

Mat gather_rows(const Mat& table, const std::vector<int>& idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), table.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = table.row(idx[i]);
  return out;
}

void check_frames(const VqParams& params, const Mat& x) {
  if (x.cols() != params.frame_dim)
    throw ShapeError("vq: expected " + std::to_string(params.frame_dim) + " channels, got " +
                     std::to_string(x.cols()));
  if (x.rows() == 0 || x.rows() % params.frames_per_token() != 0)
    throw ShapeError("vq: frame count " + std::to_string(x.rows()) + " is not a positive multiple of r = " +
                     std::to_string(params.frames_per_token()));
  if (!x.allFinite()) throw NumericError("vq: non-finite input frames");
}

}  // namespace

Mat encode(const VqParams& params, const Mat& normalized) {
  check_frames(params, normalized);
  EncoderCache cache;
  return encoder_forward(params.encoder, normalized, cache);
}

int quantize(const Codebook& codebook, const Eigen::Ref<const RowVec>& z) {
  if (z.size() != codebook.dim()) throw ShapeError("quantize: latent dimension mismatch");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int j = 0; j < codebook.size(); ++j) {
    const double d = (codebook.embeddings.row(j) - z).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

std::vector<int> quantize_all(const Codebook& codebook, const Mat& latents) {
  std::vector<int> out(static_cast<std::size_t>(latents.rows()));
  for (Eigen::Index i = 0; i < latents.rows(); ++i) out[static_cast<std::size_t>(i)] = quantize(codebook, latents.row(i));
  return out;
}

Mat decode_latents(const VqParams& params, const Mat& quantized) {
  if (quantized.cols() != params.codebook.dim()) throw ShapeError("decode: latent dimension mismatch");
  DecoderCache cache;
  return decoder_forward(params.decoder, quantized, cache);
}

MotionSequence decode(const VqParams& params, const MotionTokenSequence& tokens) {
  for (int q : tokens.tokens)
    if (q < 0 || q >= params.codebook.size())
      throw InvariantError("decode: token " + std::to_string(q) + " outside [0, " +
                           std::to_string(params.codebook.size()) + ")");
  if (tokens.frames_per_token != params.frames_per_token())
    throw ShapeError("decode: token sequence uses r = " + std::to_string(tokens.frames_per_token));
  if (tokens.tokens.empty()) return MotionSequence(Mat(0, params.frame_dim), params.fps);
  Mat frames = decode_latents(params, gather_rows(params.codebook.embeddings, tokens.tokens));
  const int keep = std::max(0, tokens.frame_count());
  return MotionSequence(denormalize(Mat(frames.topRows(keep)), params.stats), params.fps);
}

MotionTokenSequence tokenize_motion(const VqParams& params, const MotionSequence& raw) {
  const int r = params.frames_per_token();
  const int T = raw.length();
  if (T == 0) throw ShapeError("tokenize_motion: empty sequence");
  const int padded = (T + r - 1) / r * r;
  Mat x(padded, raw.frame_dim());
  x.topRows(T) = raw.frames;
  for (int t = T; t < padded; ++t) x.row(t) = raw.frames.row(T - 1);
  MotionTokenSequence out;
  out.frames_per_token = r;
  out.pad = padded - T;
  out.tokens = quantize_all(params.codebook, encode(params, normalize(x, params.stats)));
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Mat> quantization_offsets(const VqParams& params, std::span<const Mat> batch) {
  std::vector<Mat> out;
  for (const auto& x : batch) {
    Mat z = encode(params, x);
    out.push_back(gather_rows(params.codebook.embeddings, quantize_all(params.codebook, z)) - z);
  }
  return out;
}

VqBatchResult vq_losses(const VqParams& params, std::span<const Mat> batch, VqParams* grad,
                        const std::vector<Mat>* frozen_offsets) {
  if (batch.empty()) throw InvariantError("vq_losses: empty batch");
  if (frozen_offsets && frozen_offsets->size() != batch.size())
    throw ShapeError("vq_losses: one frozen offset matrix per sequence required");
  const auto& cfg = params.config;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  VqBatchResult result;
  std::vector<Mat> latents;
  Eigen::Index total_rows = 0;

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Mat& x = batch[b];
    check_frames(params, x);
    EncoderCache ec;
    Mat z = encoder_forward(params.encoder, x, ec);
    std::vector<int> codes = quantize_all(params.codebook, z);
    Mat target = gather_rows(params.codebook.embeddings, codes);
    // Surrogate for gradient checks: the forward value is unchanged, but the
    // decoder input now depends on z.
    Mat zq = frozen_offsets ? Mat(z + (*frozen_offsets)[b]) : target;

    DecoderCache dc;
    Mat y = decoder_forward(params.decoder, zq, dc);

    const double embed = (z - target).squaredNorm();
    const double recon = nn::smooth_l1(y, x);
    double vel = 0;
    Mat dy_pred, dy_true;
    if (x.rows() > 1) {
      dy_pred = y.bottomRows(y.rows() - 1) - y.topRows(y.rows() - 1);
      dy_true = x.bottomRows(x.rows() - 1) - x.topRows(x.rows() - 1);
      vel = nn::smooth_l1(dy_pred, dy_true);
    }
    result.losses.embed += inv_b * embed;
    result.losses.reconstruct += inv_b * recon;
    result.losses.velocity += inv_b * vel;

    if (grad) {
      Mat dy = cfg.reconstruct_weight * nn::smooth_l1_grad(y, x);
      if (x.rows() > 1) {
        const Mat gv = cfg.velocity_weight * nn::smooth_l1_grad(dy_pred, dy_true);
        dy.bottomRows(dy.rows() - 1) += gv;
        dy.topRows(dy.rows() - 1) -= gv;
      }
      dy *= inv_b;
      // Straight-through: the decoder-input gradient is handed to z as is.
      Mat dz = decoder_backward(params.decoder, dy, dc, grad->decoder);
      dz += inv_b * cfg.embed_weight * 2.0 * (z - target);
      encoder_backward(params.encoder, dz, ec, grad->encoder);
    }
    total_rows += z.rows();
    latents.push_back(std::move(z));
    result.assignments.insert(result.assignments.end(), codes.begin(), codes.end());
  }
  result.losses.total = cfg.embed_weight * result.losses.embed + cfg.reconstruct_weight * result.losses.reconstruct +
                        cfg.velocity_weight * result.losses.velocity;
  result.latents.resize(total_rows, params.codebook.dim());
  Eigen::Index row = 0;
  for (const auto& z : latents) {
    result.latents.middleRows(row, z.rows()) = z;
    row += z.rows();
  }
  return result;
}

void ema_update(Codebook& codebook, const Mat& latents, const std::vector<int>& assignments, double decay) {
  if (static_cast<Eigen::Index>(assignments.size()) != latents.rows())
    throw ShapeError("ema_update: one assignment per latent required");
  const int V = codebook.size();
  Vec counts = Vec::Zero(V);
  Mat sums = Mat::Zero(V, codebook.dim());
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const int j = assignments[i];
    if (j < 0 || j >= V) throw InvariantError("ema_update: assignment out of range");
    counts[j] += 1.0;
    sums.row(j) += latents.row(static_cast<Eigen::Index>(i));
  }
  codebook.ema_counts = decay * codebook.ema_counts + (1.0 - decay) * counts;
  codebook.ema_sums = decay * codebook.ema_sums + (1.0 - decay) * sums;
  constexpr double kEps = 1e-5;
  for (int j = 0; j < V; ++j)
    codebook.embeddings.row(j) = codebook.ema_sums.row(j) / std::max(codebook.ema_counts[j], kEps);
}

int codebook_reset(Codebook& codebook, const Mat& recent_latents, double threshold, Rng& rng) {
  if (recent_latents.rows() == 0) throw InvariantError("codebook_reset: no recent latents");
  int reset = 0;
  for (int j = 0; j < codebook.size(); ++j) {
    if (codebook.ema_counts[j] >= threshold) continue;
    const int pick = uniform_int(rng, 0, static_cast<int>(recent_latents.rows()) - 1);
    codebook.embeddings.row(j) = recent_latents.row(pick);
    codebook.ema_sums.row(j) = recent_latents.row(pick);
    codebook.ema_counts[j] = 1.0;
    ++reset;
  }
  return reset;
}

// ---------------------------------------------------------------------------

VqTrainResult train_vqvae(const std::vector<DyadSegment>& train, const VqConfig& cfg, std::uint64_t seed,
                          const VqProgress& progress) {
  cfg.validate();
  if (train.empty()) throw InvariantError("train_vqvae: empty training set");
  const int D = train.front().listener.frame_dim();
  VqTrainResult result{make_vq_params(cfg, D, seed), {}};
  VqParams& params = result.params;
  params.fps = train.front().listener.fps;
  params.stats = compute_normalization(train);

  const int F = cfg.train_segment_frames;
  std::vector<Mat> pool;
  for (const auto& seg : train) {
    Mat x = normalize(seg.listener.frames, params.stats);
    if (x.rows() < F) {
      Mat padded(F, x.cols());
      padded.topRows(x.rows()) = x;
      for (Eigen::Index t = x.rows(); t < F; ++t) padded.row(t) = x.row(x.rows() - 1);
      x = std::move(padded);
    }
    pool.push_back(std::move(x));
  }

  Rng rng = substream(seed, "vq-train");
  Rng reset_rng = substream(seed, "vq-reset");
  auto sample_batch = [&]() {
    std::vector<Mat> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Mat& src = pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1))];
      const int start = uniform_int(rng, 0, static_cast<int>(src.rows()) - F);
      batch.push_back(src.middleRows(start, F));
    }
    return batch;
  };

  {
    // Seed the codebook with encoder outputs so no row starts far from data.
    const auto batch = sample_batch();
    std::vector<Mat> latents;
    for (const auto& x : batch) latents.push_back(encode(params, x));
    Eigen::Index n = 0;
    for (const auto& z : latents) n += z.rows();
    Mat all(n, cfg.embed_dim);
    n = 0;
    for (const auto& z : latents) {
      all.middleRows(n, z.rows()) = z;
      n += z.rows();
    }
    for (int j = 0; j < cfg.codebook_size; ++j) {
      const int pick = uniform_int(reset_rng, 0, static_cast<int>(all.rows()) - 1);
      params.codebook.embeddings.row(j) = all.row(pick);
    }
    params.codebook.ema_sums = params.codebook.embeddings;
    params.codebook.ema_counts.setOnes();
  }

  const nn::LrSchedule schedule{cfg.learning_rate, cfg.warmup_steps, cfg.decay_step, cfg.decay_factor};
  nn::Adam adam;
  VqParams grad = zeros_like(params);
  nn::ParamList plist = params.trainable();
  nn::ParamList glist = grad.trainable();
  std::deque<Mat> recent;
  constexpr std::size_t kRecentBatches = 8;

  result.trace.reserve(static_cast<std::size_t>(cfg.total_steps));
  for (int step = 0; step < cfg.total_steps; ++step) {
    const auto batch = sample_batch();
    nn::zero(glist);
    VqBatchResult br = vq_losses(params, batch, &grad);
    if (!std::isfinite(br.losses.total))
      throw NumericError("train_vqvae: non-finite loss at step " + std::to_string(step) +
                         " (reconstruct " + std::to_string(br.losses.reconstruct) + ", velocity " +
                         std::to_string(br.losses.velocity) + ", embed " + std::to_string(br.losses.embed) + ")");
    VqStepLog log{step, schedule.at(step), br.losses, 0};
    adam.step(plist, glist, log.lr);
    ema_update(params.codebook, br.latents, br.assignments, cfg.ema_decay);
    recent.push_back(std::move(br.latents));
    if (recent.size() > kRecentBatches) recent.pop_front();
    if ((step + 1) % cfg.reset_interval == 0) {
      Eigen::Index n = 0;
      for (const auto& z : recent) n += z.rows();
      Mat pool_latents(n, cfg.embed_dim);
      n = 0;
      for (const auto& z : recent) {
        pool_latents.middleRows(n, z.rows()) = z;
        n += z.rows();
      }
      log.resets = codebook_reset(params.codebook, pool_latents, cfg.reset_usage_threshold, reset_rng);
    }
    if (progress) progress(log);
    result.trace.push_back(log);
  }

  // Checkpoints store float32; keep the in-memory model at that precision so
  // a saved model behaves exactly like the returned one.
  nn::round_to_float(plist);
  Mat mean = params.stats.mean.transpose(), sd = params.stats.std.transpose();
  Mat counts = params.codebook.ema_counts.transpose();
  nn::round_to_float({{"", &mean}, {"", &sd}, {"", &counts}, {"", &params.codebook.embeddings},
                      {"", &params.codebook.ema_sums}});
  params.stats.mean = mean.transpose();
  params.stats.std = sd.transpose();
  params.codebook.ema_counts = counts.transpose();
  return result;
}

double codebook_usage(const VqParams& params, const std::vector<DyadSegment>& segments) {
  std::set<int> used;
  for (const auto& seg : segments)
    for (int q : tokenize_motion(params, seg.listener).tokens) used.insert(q);
  return static_cast<double>(used.size()) / static_cast<double>(params.codebook.size());
}

// ---------------------------------------------------------------------------

namespace {

json vq_config_json(const VqConfig& c) {
  return {{"codebook_size", c.codebook_size},
          {"embed_dim", c.embed_dim},
          {"downsample_levels", c.downsample_levels},
          {"channel_width", c.channel_width},
          {"train_segment_frames", c.train_segment_frames},
          {"batch_size", c.batch_size},
          {"reconstruct_weight", c.reconstruct_weight},
          {"velocity_weight", c.velocity_weight},
          {"embed_weight", c.embed_weight},
          {"ema_decay", c.ema_decay},
          {"reset_usage_threshold", c.reset_usage_threshold},
          {"reset_interval", c.reset_interval},
          {"learning_rate", c.learning_rate},
          {"total_steps", c.total_steps},
          {"warmup_steps", c.warmup_steps},
          {"decay_step", c.decay_step},
          {"decay_factor", c.decay_factor}};
}

VqConfig vq_config_from_json(const json& j) {
  VqConfig c;
  c.codebook_size = j.value("codebook_size", c.codebook_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.downsample_levels = j.value("downsample_levels", c.downsample_levels);
  c.channel_width = j.value("channel_width", c.channel_width);
  c.train_segment_frames = j.value("train_segment_frames", c.train_segment_frames);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.reconstruct_weight = j.value("reconstruct_weight", c.reconstruct_weight);
  c.velocity_weight = j.value("velocity_weight", c.velocity_weight);
  c.embed_weight = j.value("embed_weight", c.embed_weight);
  c.ema_decay = j.value("ema_decay", c.ema_decay);
  c.reset_usage_threshold = j.value("reset_usage_threshold", c.reset_usage_threshold);
  c.reset_interval = j.value("reset_interval", c.reset_interval);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.decay_step = j.value("decay_step", c.decay_step);
  c.decay_factor = j.value("decay_factor", c.decay_factor);
  return c;
}

struct VqArchiveView {
  Mat mean, sd, counts;
  nn::ParamList list;
};

// Tensors beyond the trainable weights: normalization and codebook state.
void collect_state(VqParams& p, VqArchiveView& view) {
  view.list = p.trainable();
  view.list.push_back({"vq.codebook.embeddings", &p.codebook.embeddings});
  view.list.push_back({"vq.codebook.ema_sums", &p.codebook.ema_sums});
  view.list.push_back({"vq.codebook.ema_counts", &view.counts});
  view.list.push_back({"vq.norm.mean", &view.mean});
  view.list.push_back({"vq.norm.std", &view.sd});
}

}  // namespace

nlohmann::json to_json(const VqConfig& c) { return vq_config_json(c); }
VqConfig vq_config_from(const nlohmann::json& j) { return vq_config_from_json(j); }

void save_vq(const VqParams& params, const std::string& path) {
  VqParams copy = params;
  VqArchiveView view;
  view.mean = copy.stats.mean.transpose();
  view.sd = copy.stats.std.transpose();
  view.counts = copy.codebook.ema_counts.transpose();
  collect_state(copy, view);
  save_params(path, view.list);
  std::ofstream meta(path + ".json");
  if (!meta) throw IoError("cannot write '" + path + ".json'");
  meta << json{{"kind", "vq"}, {"frame_dim", params.frame_dim}, {"fps", params.fps},
               {"config", vq_config_json(params.config)}}
              .dump(2)
       << '\n';
}

VqParams load_vq(const std::string& path) {
  std::ifstream meta(path + ".json");
  if (!meta) throw IoError("cannot open '" + path + ".json'");
  json j;
  try {
    j = json::parse(meta);
  } catch (const json::exception& e) {
    throw ParseError(path + ".json: " + e.what());
  }
  if (j.value("kind", "") != "vq") throw ParseError(path + ".json: not a VQ-VAE description");
  VqParams p = make_vq_params(vq_config_from_json(j.at("config")), j.at("frame_dim").get<int>(), 0);
  p.fps = j.value("fps", kDefaultFps);
  VqArchiveView view;
  view.mean = Mat::Zero(1, p.frame_dim);
  view.sd = Mat::Zero(1, p.frame_dim);
  view.counts = Mat::Zero(1, p.codebook.size());
  collect_state(p, view);
  load_params(path, view.list);
  p.stats.mean = view.mean.transpose();
  p.stats.std = view.sd.transpose();
  p.codebook.ema_counts = view.counts.transpose();
  return p;
}

}  // namespace lltn
