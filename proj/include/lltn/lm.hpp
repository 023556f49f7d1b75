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

// Causal transformer over the joint text + motion vocabulary. The model input
// is always [PAD] followed by the stream ids, so logits row i scores stream
// position i given everything before it.

#pragma once

#include "lltn/interleave.hpp"
#include "lltn/nn.hpp"
#include "lltn/vq.hpp"
#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lltn {

struct LmConfig {
  int layers = 4;
  int model_dim = 128;
  int heads = 4;
  int max_positions = 512;
  int ffn_multiplier = 4;
  double init_std = 0.02;

  double learning_rate = 5e-5;
  int warmup_steps = 0;
  int max_steps = 50000;
  int batch_size = 8;
  int early_stop_window = 600;
  double early_stop_delta = 0.001;

  void validate() const;
};

struct TransformerBlock {
  nn::LayerNorm ln1;
  nn::Linear qkv;   // d -> 3d
  nn::Linear proj;  // d -> d
  nn::LayerNorm ln2;
  nn::Linear fc;    // d -> m*d
  nn::Linear out;   // m*d -> d

  void collect(const std::string& prefix, nn::ParamList& list);
};

struct LmParams {
  LmConfig config;
  int text_vocab = 0;     // rows of word_embed: words + reserved tokens
  int codebook_size = 0;  // rows of motion_embed, columns of the motion head

  Mat word_embed;    // text_vocab x d
  Mat motion_embed;  // V_vq x d
  Mat pos_embed;     // max_positions x d
  std::vector<TransformerBlock> blocks;
  nn::LayerNorm final_norm;
  nn::Linear motion_head;              // d -> V_vq
  std::optional<nn::Linear> text_head;  // d -> text_vocab, text pretraining only

  nn::ParamList collect();
};

LmParams make_lm_params(const LmConfig& cfg, int text_vocab, int codebook_size, bool with_text_head,
                        std::uint64_t seed);
LmParams zeros_like(const LmParams& params);

/// n x n additive mask: 0 on and below the diagonal, -inf above.
Mat causal_mask(int n);

/// Row-wise softmax of scores + causal_mask; row i puts zero weight on j > i.
Mat masked_softmax(const Mat& scores);

/// Final hidden states for the model input ids (caller supplies the leading PAD).
Mat hidden_states(const LmParams& params, std::span<const int> input);

/// Motion logits, one row per input position.
Mat forward(const LmParams& params, std::span<const int> input);

/// Model input for a stream: [PAD] + ids[0 .. n-1].
std::vector<int> model_input(const Vocabulary& vocab, std::span<const int> stream_ids);

struct LossTarget {
  int row = 0;    // logits row (model input position)
  int label = 0;  // class index in the head's output space
};

enum class Head { Motion, Text };

/// Mean cross-entropy over `targets`; accumulates gradients into `grad` when set.
double cross_entropy_loss(const LmParams& params, std::span<const int> input, std::span<const LossTarget> targets,
                          Head head, LmParams* grad = nullptr);

/// Teacher-forced loss on one stream: motion positions are scored against the
/// uncorrupted ids; text and space positions contribute nothing.
struct MotionLossInputs {
  std::vector<int> input;
  std::vector<LossTarget> targets;
};
MotionLossInputs motion_loss_inputs(const Vocabulary& vocab, const InterleavedSequence& seq,
                                    const CorruptedSequence& corrupted);

double lm_loss(const LmParams& params, const Vocabulary& vocab, const InterleavedSequence& seq, double p, Rng& rng,
               LmParams* grad = nullptr);

/// A trained listener model: weights plus everything needed to build its
/// input streams.
struct ListenerModel {
  LmParams params;
  Vocabulary vocab;
  InterleaveConfig interleave;
  Ablation ablation = Ablation::Full;
};

/// Greedy decoding of `num_tokens` motion tokens. Before q_t the stream
/// receives every unconsumed word with end_frame <= r*t, then SPACE; words
/// ending later are never looked at. Ties go to the lowest code.
MotionTokenSequence generate(const ListenerModel& model, const std::vector<TimedToken>& history,
                             const std::vector<TimedToken>& words, int num_tokens, std::uint64_t seed = 0);

struct LmStepLog {
  int step = 0;
  double lr = 0;
  double loss = 0;
};

struct LmTrainResult {
  ListenerModel model;
  std::vector<LmStepLog> trace;
  bool early_stopped = false;
};

struct LmTrainOptions {
  LmConfig config;
  InterleaveConfig interleave;
  Ablation ablation = Ablation::Full;
  /// Start from these weights instead of a random init. Text-pretrained
  /// weights get fresh motion embeddings and a fresh motion head.
  const LmParams* init = nullptr;
};

using LmProgress = std::function<void(const LmStepLog&)>;

/// Tokenizes every training listener with `vq`, assembles streams under the
/// chosen ablation, corrupts motion inputs and runs Adam until max_steps or
/// until the mean loss of a window fails to improve on the previous window by
/// early_stop_delta. Deterministic for a given seed.
LmTrainResult train_lm(const std::vector<DyadSegment>& train, const VqParams& vq, const Vocabulary& vocab,
                       const LmTrainOptions& options, std::uint64_t seed, const LmProgress& progress = {});

/// Text-only streams (history + segment words) for pretraining.
std::vector<std::vector<int>> text_streams(const Vocabulary& vocab, const std::vector<DyadSegment>& segments);

struct PretrainResult {
  LmParams params;
  std::vector<LmStepLog> trace;
};

/// Next-token training on text streams through a text output head.
PretrainResult pretrain_text_lm(const std::vector<std::vector<int>>& streams, const Vocabulary& vocab,
                                const LmConfig& cfg, std::uint64_t seed, const LmProgress& progress = {});

/// Copies a text-pretrained model into a fine-tunable one: the text head is
/// dropped and the motion embeddings/head are re-initialized from `seed`.
LmParams prepare_finetune(const LmParams& pretrained, std::uint64_t seed);

nlohmann::json to_json(const LmConfig& c);
LmConfig lm_config_from(const nlohmann::json& j);

void export_checkpoint(const LmParams& params, const std::string& path);
/// Loads into `params`, whose names and shapes define what is accepted.
void import_checkpoint(const std::string& path, LmParams& params);

/// Weights (LLTN archive at `path`) plus a JSON description at `path`.json.
void save_listener(const ListenerModel& model, const std::string& path);
ListenerModel load_listener(const std::string& path);

}  // namespace lltn
