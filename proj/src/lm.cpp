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

#include "lltn/lm.hpp"

#include "lltn/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace lltn {

using nlohmann::json;

void LmConfig::validate() const {
  if (layers < 0 || model_dim <= 0 || heads <= 0 || max_positions <= 0 || ffn_multiplier <= 0)
    throw InvariantError("lm config: sizes must be positive");
  if (model_dim % heads != 0) throw InvariantError("lm config: model_dim must be divisible by heads");
  if (batch_size <= 0 || max_steps < 0 || early_stop_window <= 0 || warmup_steps < 0)
    throw InvariantError("lm config: step counts must be positive");
}

void TransformerBlock::collect(const std::string& prefix, nn::ParamList& list) {
  ln1.collect(prefix + ".ln1", list);
  qkv.collect(prefix + ".attn.qkv", list);
  proj.collect(prefix + ".attn.proj", list);
  ln2.collect(prefix + ".ln2", list);
  fc.collect(prefix + ".mlp.fc", list);
  out.collect(prefix + ".mlp.out", list);
}

nn::ParamList LmParams::collect() {
  nn::ParamList list;
  list.push_back({"lm.word_embed", &word_embed});
  list.push_back({"lm.motion_embed", &motion_embed});
  list.push_back({"lm.pos_embed", &pos_embed});
  for (std::size_t l = 0; l < blocks.size(); ++l) blocks[l].collect("lm.block" + std::to_string(l), list);
  final_norm.collect("lm.final_norm", list);
  motion_head.collect("lm.motion_head", list);
  if (text_head) text_head->collect("lm.text_head", list);
  return list;
}

namespace {

void fill_normal(Mat& m, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng, 0.0, stddev);
}

}  // namespace

LmParams make_lm_params(const LmConfig& cfg, int text_vocab, int codebook_size, bool with_text_head,
                        std::uint64_t seed) {
  cfg.validate();
  if (text_vocab <= 0 || codebook_size <= 0) throw InvariantError("lm: vocabulary sizes must be positive");
  const int d = cfg.model_dim;
  const int hidden = cfg.ffn_multiplier * d;
  LmParams p;
  p.config = cfg;
  p.text_vocab = text_vocab;
  p.codebook_size = codebook_size;
  Rng rng = substream(seed, "lm-init");
  p.word_embed.resize(text_vocab, d);
  p.motion_embed.resize(codebook_size, d);
  p.pos_embed.resize(cfg.max_positions, d);
  fill_normal(p.word_embed, rng, cfg.init_std);
  fill_normal(p.motion_embed, rng, cfg.init_std);
  fill_normal(p.pos_embed, rng, cfg.init_std / 2);
  // Residual output projections are scaled down with depth.
  const double resid_std = cfg.init_std / std::sqrt(2.0 * std::max(1, cfg.layers));
  for (int l = 0; l < cfg.layers; ++l) {
    TransformerBlock b;
    b.ln1 = nn::LayerNorm(d);
    b.qkv = nn::Linear(d, 3 * d);
    b.proj = nn::Linear(d, d);
    b.ln2 = nn::LayerNorm(d);
    b.fc = nn::Linear(d, hidden);
    b.out = nn::Linear(hidden, d);
    b.qkv.init_normal(rng, cfg.init_std);
    b.proj.init_normal(rng, resid_std);
    b.fc.init_normal(rng, cfg.init_std);
    b.out.init_normal(rng, resid_std);
    p.blocks.push_back(std::move(b));
  }
  p.final_norm = nn::LayerNorm(d);
  p.motion_head = nn::Linear(d, codebook_size);
  p.motion_head.init_normal(rng, cfg.init_std);
  if (with_text_head) {
    p.text_head = nn::Linear(d, text_vocab);
    p.text_head->init_normal(rng, cfg.init_std);
  }
  return p;
}

LmParams zeros_like(const LmParams& params) {
  LmParams g = params;
  nn::zero(g.collect());
  return g;
}

// ---------------------------------------------------------------------------

Mat causal_mask(int n) {
  Mat m = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) m(i, j) = -std::numeric_limits<double>::infinity();
  return m;
}

Mat masked_softmax(const Mat& scores) {
  const Eigen::Index n = scores.rows();
  Mat p = Mat::Zero(n, scores.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index k = std::min(i + 1, scores.cols());
    const double mx = scores.row(i).head(k).maxCoeff();
    p.row(i).head(k) = (scores.row(i).head(k).array() - mx).exp();
    p.row(i).head(k) /= p.row(i).head(k).sum();
  }
  return p;
}

namespace {

struct BlockCache {
  nn::LayerNorm::Cache ln1;
  Mat h1;
  Mat qkv;
  std::vector<Mat> probs;
  Mat attn;
  nn::LayerNorm::Cache ln2;
  Mat h2;
  Mat f;
  Mat g;
};

struct ForwardCache {
  std::vector<BlockCache> blocks;
  nn::LayerNorm::Cache final_norm;
  Mat hidden;
};

void check_input(const LmParams& params, std::span<const int> input) {
  if (input.empty()) throw InvariantError("lm: empty input");
  if (static_cast<int>(input.size()) > params.config.max_positions)
    throw InvariantError("lm: input of " + std::to_string(input.size()) + " tokens exceeds max_positions " +
                         std::to_string(params.config.max_positions));
  for (int id : input)
    if (id < 0 || id >= params.text_vocab + params.codebook_size)
      throw InvariantError("lm: token id " + std::to_string(id) + " outside the vocabulary");
}

Mat run_forward(const LmParams& params, std::span<const int> input, ForwardCache& cache) {
  check_input(params, input);
  const int n = static_cast<int>(input.size());
  const int d = params.config.model_dim;
  const int H = params.config.heads;
  const int dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat x(n, d);
  for (int i = 0; i < n; ++i) {
    const int id = input[static_cast<std::size_t>(i)];
    x.row(i) = (id < params.text_vocab ? params.word_embed.row(id)
                                       : params.motion_embed.row(id - params.text_vocab)) +
               params.pos_embed.row(i);
  }

  cache.blocks.resize(params.blocks.size());
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    const auto& b = params.blocks[l];
    auto& c = cache.blocks[l];
    c.h1 = b.ln1.forward(x, c.ln1);
    c.qkv = b.qkv.forward(c.h1);
    c.attn.resize(n, d);
    c.probs.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
      const auto Q = c.qkv.middleCols(h * dh, dh);
      const auto K = c.qkv.middleCols(d + h * dh, dh);
      const auto V = c.qkv.middleCols(2 * d + h * dh, dh);
      Mat scores = (Q * K.transpose()) * scale;
      c.probs[static_cast<std::size_t>(h)] = masked_softmax(scores);
      c.attn.middleCols(h * dh, dh).noalias() = c.probs[static_cast<std::size_t>(h)] * V;
    }
    x += b.proj.forward(c.attn);
    c.h2 = b.ln2.forward(x, c.ln2);
    c.f = b.fc.forward(c.h2);
    c.g = nn::gelu(c.f);
    x += b.out.forward(c.g);
  }
  cache.hidden = params.final_norm.forward(x, cache.final_norm);
  return cache.hidden;
}

void run_backward(const LmParams& params, std::span<const int> input, const ForwardCache& cache, const Mat& dhidden,
                  LmParams& grad) {
  const int n = static_cast<int>(input.size());
  const int d = params.config.model_dim;
  const int H = params.config.heads;
  const int dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat dx = params.final_norm.backward(dhidden, cache.final_norm, grad.final_norm);
  for (std::size_t l = params.blocks.size(); l-- > 0;) {
    const auto& b = params.blocks[l];
    const auto& c = cache.blocks[l];
    auto& gb = grad.blocks[l];

    Mat dg = b.out.backward(c.g, dx, gb.out);
    Mat dh2 = b.fc.backward(c.h2, nn::gelu_backward(c.f, dg), gb.fc);
    dx += b.ln2.backward(dh2, c.ln2, gb.ln2);

    Mat dattn = b.proj.backward(c.attn, dx, gb.proj);
    Mat dqkv(n, 3 * d);
    for (int h = 0; h < H; ++h) {
      const Mat& P = c.probs[static_cast<std::size_t>(h)];
      const auto Q = c.qkv.middleCols(h * dh, dh);
      const auto K = c.qkv.middleCols(d + h * dh, dh);
      const auto V = c.qkv.middleCols(2 * d + h * dh, dh);
      const auto dO = dattn.middleCols(h * dh, dh);
      Mat dP = dO * V.transpose();
      dqkv.middleCols(2 * d + h * dh, dh).noalias() = P.transpose() * dO;
      const Vec row_dot = (dP.array() * P.array()).rowwise().sum();
      Mat dS = P.array() * (dP.colwise() - row_dot).array();
      dS *= scale;
      dqkv.middleCols(h * dh, dh).noalias() = dS * K;
      dqkv.middleCols(d + h * dh, dh).noalias() = dS.transpose() * Q;
    }
    Mat dh1 = b.qkv.backward(c.h1, dqkv, gb.qkv);
    dx += b.ln1.backward(dh1, c.ln1, gb.ln1);
  }

  for (int i = 0; i < n; ++i) {
    const int id = input[static_cast<std::size_t>(i)];
    if (id < params.text_vocab)
      grad.word_embed.row(id) += dx.row(i);
    else
      grad.motion_embed.row(id - params.text_vocab) += dx.row(i);
    grad.pos_embed.row(i) += dx.row(i);
  }
}

const nn::Linear& head_of(const LmParams& params, Head head) {
  if (head == Head::Motion) return params.motion_head;
  if (!params.text_head) throw InvariantError("lm: model has no text head");
  return *params.text_head;
}

nn::Linear& head_of(LmParams& params, Head head) {
  if (head == Head::Motion) return params.motion_head;
  if (!params.text_head) throw InvariantError("lm: gradient model has no text head");
  return *params.text_head;
}

}  // namespace

Mat hidden_states(const LmParams& params, std::span<const int> input) {
  ForwardCache cache;
  return run_forward(params, input, cache);
}

Mat forward(const LmParams& params, std::span<const int> input) {
  return params.motion_head.forward(hidden_states(params, input));
}

std::vector<int> model_input(const Vocabulary& vocab, std::span<const int> stream_ids) {
  std::vector<int> input;
  if (stream_ids.empty()) return input;
  input.reserve(stream_ids.size());
  input.push_back(vocab.pad_id());
  input.insert(input.end(), stream_ids.begin(), stream_ids.end() - 1);
  return input;
}

double cross_entropy_loss(const LmParams& params, std::span<const int> input, std::span<const LossTarget> targets,
                          Head head, LmParams* grad) {
  if (targets.empty()) throw InvariantError("cross_entropy_loss: no targets");
  ForwardCache cache;
  const Mat& hidden = run_forward(params, input, cache);
  const nn::Linear& out = head_of(params, head);
  const int classes = out.out_dim();

  Mat rows(static_cast<Eigen::Index>(targets.size()), hidden.cols());
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const auto& t = targets[k];
    if (t.row < 0 || t.row >= hidden.rows() || t.label < 0 || t.label >= classes)
      throw InvariantError("cross_entropy_loss: target out of range");
    rows.row(static_cast<Eigen::Index>(k)) = hidden.row(t.row);
  }
  const Mat logits = out.forward(rows);
  const double inv = 1.0 / static_cast<double>(targets.size());
  double loss = 0;
  Mat dlogits(logits.rows(), logits.cols());
  for (Eigen::Index k = 0; k < logits.rows(); ++k) {
    const double mx = logits.row(k).maxCoeff();
    RowVec e = (logits.row(k).array() - mx).exp();
    const double z = e.sum();
    const int label = targets[static_cast<std::size_t>(k)].label;
    loss += (std::log(z) + mx - logits(k, label)) * inv;
    dlogits.row(k) = e / z;
    dlogits(k, label) -= 1.0;
  }
  if (grad) {
    dlogits *= inv;
    Mat drows = out.backward(rows, dlogits, head_of(*grad, head));
    Mat dhidden = Mat::Zero(hidden.rows(), hidden.cols());
    for (std::size_t k = 0; k < targets.size(); ++k) dhidden.row(targets[k].row) += drows.row(static_cast<Eigen::Index>(k));
    run_backward(params, input, cache, dhidden, *grad);
  }
  return loss;
}

MotionLossInputs motion_loss_inputs(const Vocabulary& vocab, const InterleavedSequence& seq,
                                    const CorruptedSequence& corrupted) {
  MotionLossInputs out;
  out.input = model_input(vocab, corrupted.input);
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (seq.kinds[i] == TokenKind::Motion)
      out.targets.push_back({static_cast<int>(i), vocab.motion_code(corrupted.target[i])});
  if (out.targets.empty()) throw InvariantError("lm_loss: sequence has no motion tokens");
  return out;
}

double lm_loss(const LmParams& params, const Vocabulary& vocab, const InterleavedSequence& seq, double p, Rng& rng,
               LmParams* grad) {
  const auto corrupted = corrupt_motion_tokens(seq, vocab, p, rng);
  const auto in = motion_loss_inputs(vocab, seq, corrupted);
  return cross_entropy_loss(params, in.input, in.targets, Head::Motion, grad);
}

// ---------------------------------------------------------------------------

namespace {

int argmax_lowest(const Eigen::Ref<const RowVec>& row) {
  int best = 0;
  for (int j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

/// Stream under construction during decoding. Text is trimmed from the front
/// (history first) when the model input would exceed the budget.
class StreamBuilder {
 public:
  StreamBuilder(const ListenerModel& model) : model_(model) {}

  void push_text(int id, TokenKind kind) {
    ids_.push_back(map_text(id));
    kinds_.push_back(kind);
  }
  void push(int id, TokenKind kind) {
    ids_.push_back(id);
    kinds_.push_back(kind);
  }

  int next_code() {
    trim();
    std::vector<int> input;
    input.reserve(ids_.size() + 1);
    input.push_back(model_.vocab.pad_id());
    input.insert(input.end(), ids_.begin(), ids_.end());
    const Mat hidden = hidden_states(model_.params, input);
    const RowVec logits = model_.params.motion_head.forward(hidden.bottomRows(1));
    return argmax_lowest(logits);
  }

 private:
  int map_text(int id) const {
    if (model_.ablation == Ablation::FixTok) return model_.vocab.fixed_id();
    if (model_.ablation == Ablation::FixTokPunc && !model_.vocab.is_punctuation_id(id))
      return model_.vocab.fixed_id();
    return id;
  }

  void trim() {
    const std::size_t budget = static_cast<std::size_t>(std::min(model_.interleave.max_tokens,
                                                                  model_.params.config.max_positions - 1));
    while (ids_.size() > budget) {
      std::size_t victim = ids_.size();
      for (std::size_t i = 0; i < ids_.size(); ++i)
        if (kinds_[i] == TokenKind::HistoryText) {
          victim = i;
          break;
        }
      if (victim == ids_.size())
        for (std::size_t i = 0; i < ids_.size(); ++i)
          if (kinds_[i] == TokenKind::SegmentText) {
            victim = i;
            break;
          }
      if (victim == ids_.size())
        throw InvariantError("generate: motion stream exceeds max_positions");
      ids_.erase(ids_.begin() + static_cast<std::ptrdiff_t>(victim));
      kinds_.erase(kinds_.begin() + static_cast<std::ptrdiff_t>(victim));
    }
  }

  const ListenerModel& model_;
  std::vector<int> ids_;
  std::vector<TokenKind> kinds_;
};

}  // namespace

MotionTokenSequence generate(const ListenerModel& model, const std::vector<TimedToken>& history,
                             const std::vector<TimedToken>& words, int num_tokens, std::uint64_t seed) {
  if (num_tokens < 0) throw InvariantError("generate: negative token count");
  const int r = model.interleave.frames_per_token;
  MotionTokenSequence out;
  out.frames_per_token = r;
  if (num_tokens == 0) return out;

  TimedIds hist, seg;
  if (model.ablation != Ablation::Uncond) {
    hist = text_ids(model.vocab, history);
    seg = text_ids(model.vocab, words);
  }
  if (model.ablation == Ablation::Scrambled) {
    // Same permutation rule as transform_scrambled, over the joint text list.
    InterleavedSequence joint;
    for (int id : hist.ids) joint.push(id, TokenKind::HistoryText, 0);
    for (int id : seg.ids) joint.push(id, TokenKind::SegmentText, 0);
    Rng rng = substream(seed, "scramble");
    joint = transform_scrambled(joint, rng);
    std::copy(joint.ids.begin(), joint.ids.begin() + static_cast<std::ptrdiff_t>(hist.ids.size()), hist.ids.begin());
    std::copy(joint.ids.begin() + static_cast<std::ptrdiff_t>(hist.ids.size()), joint.ids.end(), seg.ids.begin());
  }

  StreamBuilder stream(model);
  for (int id : hist.ids) stream.push_text(id, TokenKind::HistoryText);

  if (model.ablation == Ablation::Unaligned) {
    for (int id : seg.ids) stream.push_text(id, TokenKind::SegmentText);
    for (int t = 1; t <= num_tokens; ++t) {
      const int code = stream.next_code();
      out.tokens.push_back(code);
      stream.push(model.vocab.motion_id(code), TokenKind::Motion);
    }
    return out;
  }

  std::size_t w = 0;
  for (int t = 1; t <= num_tokens; ++t) {
    while (w < seg.ids.size() && seg.frames[w] <= r * t) stream.push_text(seg.ids[w++], TokenKind::SegmentText);
    stream.push(model.vocab.space_id(), TokenKind::Space);
    const int code = stream.next_code();
    out.tokens.push_back(code);
    stream.push(model.vocab.motion_id(code), TokenKind::Motion);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void scale_grads(const nn::ParamList& grads, double s) {
  for (const auto& g : grads) *g.value *= s;
}

bool window_stalled(const std::vector<LmStepLog>& trace, int window, double delta) {
  const std::size_t w = static_cast<std::size_t>(window);
  if (trace.size() < 2 * w || trace.size() % w != 0) return false;
  double prev = 0, cur = 0;
  for (std::size_t i = trace.size() - 2 * w; i < trace.size() - w; ++i) prev += trace[i].loss;
  for (std::size_t i = trace.size() - w; i < trace.size(); ++i) cur += trace[i].loss;
  return (prev - cur) / static_cast<double>(w) < delta;
}

void copy_training_fields(LmConfig& dst, const LmConfig& src) {
  dst.learning_rate = src.learning_rate;
  dst.warmup_steps = src.warmup_steps;
  dst.max_steps = src.max_steps;
  dst.batch_size = src.batch_size;
  dst.early_stop_window = src.early_stop_window;
  dst.early_stop_delta = src.early_stop_delta;
}

}  // namespace

LmParams prepare_finetune(const LmParams& pretrained, std::uint64_t seed) {
  LmParams p = pretrained;
  p.text_head.reset();
  Rng rng = substream(seed, "lm-finetune-init");
  fill_normal(p.motion_embed, rng, p.config.init_std);
  p.motion_head.init_normal(rng, p.config.init_std);
  return p;
}

LmTrainResult train_lm(const std::vector<DyadSegment>& train, const VqParams& vq, const Vocabulary& vocab,
                       const LmTrainOptions& options, std::uint64_t seed, const LmProgress& progress) {
  options.config.validate();
  options.interleave.validate();
  if (train.empty()) throw InvariantError("train_lm: empty training set");
  if (vocab.codebook_size() != vq.codebook.size())
    throw ShapeError("train_lm: vocabulary codebook size differs from the VQ-VAE");
  if (options.interleave.frames_per_token != vq.frames_per_token())
    throw ShapeError("train_lm: interleave r differs from the VQ-VAE");

  LmTrainResult result;
  ListenerModel& model = result.model;
  model.vocab = vocab;
  model.interleave = options.interleave;
  model.ablation = options.ablation;
  if (options.init) {
    model.params = options.init->text_head ? prepare_finetune(*options.init, seed) : *options.init;
    copy_training_fields(model.params.config, options.config);
    if (model.params.text_vocab != vocab.text_size() || model.params.codebook_size != vocab.codebook_size())
      throw ShapeError("train_lm: initial weights do not match the vocabulary");
  } else {
    model.params = make_lm_params(options.config, vocab.text_size(), vocab.codebook_size(), false, seed);
  }
  LmParams& params = model.params;
  const LmConfig& cfg = params.config;

  std::vector<MotionTokenSequence> motion;
  motion.reserve(train.size());
  for (const auto& seg : train) motion.push_back(tokenize_motion(vq, seg.listener));

  Rng batch_rng = substream(seed, "lm-train");
  Rng corrupt_rng = substream(seed, "corruption");
  LmParams grad = zeros_like(params);
  nn::ParamList plist = params.collect();
  nn::ParamList glist = grad.collect();
  nn::Adam adam;
  const nn::LrSchedule schedule{cfg.learning_rate, cfg.warmup_steps, std::numeric_limits<int>::max(), 1.0};

  for (int step = 0; step < cfg.max_steps; ++step) {
    nn::zero(glist);
    double loss = 0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto k = static_cast<std::size_t>(uniform_int(batch_rng, 0, static_cast<int>(train.size()) - 1));
      const auto seq = assemble_for(options.ablation, vocab, train[k].history_words, train[k].words, motion[k],
                                    options.interleave, corrupt_rng);
      loss += lm_loss(params, vocab, seq, options.interleave.corruption_probability, corrupt_rng, &grad);
    }
    loss /= cfg.batch_size;
    if (!std::isfinite(loss)) throw NumericError("train_lm: non-finite loss at step " + std::to_string(step));
    scale_grads(glist, 1.0 / cfg.batch_size);
    LmStepLog log{step, schedule.at(step), loss};
    adam.step(plist, glist, log.lr);
    result.trace.push_back(log);
    if (progress) progress(log);
    if (window_stalled(result.trace, cfg.early_stop_window, cfg.early_stop_delta)) {
      result.early_stopped = true;
      break;
    }
  }
  nn::round_to_float(plist);
  return result;
}

std::vector<std::vector<int>> text_streams(const Vocabulary& vocab, const std::vector<DyadSegment>& segments) {
  std::vector<std::vector<int>> out;
  for (const auto& seg : segments) {
    std::vector<int> ids = text_ids(vocab, seg.history_words).ids;
    const auto words = text_ids(vocab, seg.words).ids;
    ids.insert(ids.end(), words.begin(), words.end());
    if (!ids.empty()) out.push_back(std::move(ids));
  }
  return out;
}

PretrainResult pretrain_text_lm(const std::vector<std::vector<int>>& streams, const Vocabulary& vocab,
                                const LmConfig& cfg, std::uint64_t seed, const LmProgress& progress) {
  cfg.validate();
  if (streams.empty()) throw InvariantError("pretrain_text_lm: empty corpus");
  PretrainResult result;
  result.params = make_lm_params(cfg, vocab.text_size(), vocab.codebook_size(), true, seed);
  LmParams& params = result.params;
  LmParams grad = zeros_like(params);
  nn::ParamList plist = params.collect();
  nn::ParamList glist = grad.collect();
  nn::Adam adam;
  const nn::LrSchedule schedule{cfg.learning_rate, cfg.warmup_steps, std::numeric_limits<int>::max(), 1.0};
  Rng rng = substream(seed, "text-pretrain");
  const std::size_t limit = static_cast<std::size_t>(cfg.max_positions);

  for (int step = 0; step < cfg.max_steps; ++step) {
    nn::zero(glist);
    double loss = 0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto& s = streams[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(streams.size()) - 1))];
      std::vector<int> ids(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(std::min(s.size(), limit)));
      const auto input = model_input(vocab, ids);
      std::vector<LossTarget> targets;
      for (std::size_t i = 0; i < ids.size(); ++i) targets.push_back({static_cast<int>(i), ids[i]});
      loss += cross_entropy_loss(params, input, targets, Head::Text, &grad);
    }
    loss /= cfg.batch_size;
    if (!std::isfinite(loss)) throw NumericError("pretrain_text_lm: non-finite loss at step " + std::to_string(step));
    scale_grads(glist, 1.0 / cfg.batch_size);
    LmStepLog log{step, schedule.at(step), loss};
    adam.step(plist, glist, log.lr);
    result.trace.push_back(log);
    if (progress) progress(log);
    if (window_stalled(result.trace, cfg.early_stop_window, cfg.early_stop_delta)) break;
  }
  nn::round_to_float(plist);
  return result;
}

// ---------------------------------------------------------------------------

json to_json(const LmConfig& c) {
  return {{"layers", c.layers},
          {"model_dim", c.model_dim},
          {"heads", c.heads},
          {"max_positions", c.max_positions},
          {"ffn_multiplier", c.ffn_multiplier},
          {"init_std", c.init_std},
          {"learning_rate", c.learning_rate},
          {"warmup_steps", c.warmup_steps},
          {"max_steps", c.max_steps},
          {"batch_size", c.batch_size},
          {"early_stop_window", c.early_stop_window},
          {"early_stop_delta", c.early_stop_delta}};
}

LmConfig lm_config_from(const json& j) {
  LmConfig c;
  c.layers = j.value("layers", c.layers);
  c.model_dim = j.value("model_dim", c.model_dim);
  c.heads = j.value("heads", c.heads);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.ffn_multiplier = j.value("ffn_multiplier", c.ffn_multiplier);
  c.init_std = j.value("init_std", c.init_std);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.early_stop_window = j.value("early_stop_window", c.early_stop_window);
  c.early_stop_delta = j.value("early_stop_delta", c.early_stop_delta);
  return c;
}

void export_checkpoint(const LmParams& params, const std::string& path) {
  LmParams copy = params;
  save_params(path, copy.collect());
}

void import_checkpoint(const std::string& path, LmParams& params) { load_params(path, params.collect()); }

void save_listener(const ListenerModel& model, const std::string& path) {
  export_checkpoint(model.params, path);
  json meta{{"kind", "lm"},
            {"config", to_json(model.params.config)},
            {"text_vocab", model.params.text_vocab},
            {"codebook_size", model.params.codebook_size},
            {"text_head", model.params.text_head.has_value()},
            {"ablation", to_string(model.ablation)},
            {"interleave",
             {{"max_tokens", model.interleave.max_tokens},
              {"corruption_probability", model.interleave.corruption_probability},
              {"frames_per_token", model.interleave.frames_per_token},
              {"fps", model.interleave.fps}}},
            {"vocab", model.vocab.to_json()}};
  std::ofstream out(path + ".json");
  if (!out) throw IoError("cannot write '" + path + ".json'");
  out << meta.dump(2) << '\n';
}

ListenerModel load_listener(const std::string& path) {
  std::ifstream in(path + ".json");
  if (!in) throw IoError("cannot open '" + path + ".json'");
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ".json: " + e.what());
  }
  if (meta.value("kind", "") != "lm") throw ParseError(path + ".json: not a listener model description");
  ListenerModel model;
  model.vocab = Vocabulary::from_json(meta.at("vocab"));
  model.ablation = ablation_from_string(meta.value("ablation", "full"));
  const auto& ic = meta.at("interleave");
  model.interleave.max_tokens = ic.value("max_tokens", 480);
  model.interleave.corruption_probability = ic.value("corruption_probability", 0.5);
  model.interleave.frames_per_token = ic.value("frames_per_token", 8);
  model.interleave.fps = ic.value("fps", kDefaultFps);
  model.params = make_lm_params(lm_config_from(meta.at("config")), meta.at("text_vocab").get<int>(),
                                meta.at("codebook_size").get<int>(), meta.value("text_head", false), 0);
  if (model.params.text_vocab != model.vocab.text_size() || model.params.codebook_size != model.vocab.codebook_size())
    throw ShapeError(path + ": vocabulary does not match the weight shapes");
  import_checkpoint(path, model.params);
  return model;
}

}  // namespace lltn
