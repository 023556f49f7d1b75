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

// Run configuration and the end-to-end steps shared by the command line and
// the experiment drivers.

#pragma once

#include "lltn/baselines.hpp"
#include "lltn/lm.hpp"
#include "lltn/metrics.hpp"
#include "lltn/synthetic.hpp"
#include "lltn/vq.hpp"
#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lltn {

/// Training fields of an LmConfig used for text pretraining; the
/// architecture always comes from the main LM section.
struct PretrainConfig {
  double learning_rate = 5e-4;
  int warmup_steps = 0;
  int max_steps = 2000;
  int batch_size = 8;
  int early_stop_window = 600;
  double early_stop_delta = 0.001;

  LmConfig apply(LmConfig arch) const;
};

struct RunConfig {
  std::uint64_t seed = 0;
  SynthConfig synth;
  VqConfig vq;
  LmConfig lm;
  PretrainConfig pretrain;
  InterleaveConfig interleave;
  EvalOptions eval;
  NnIndexConfig nn;
};

nlohmann::json to_json(const RunConfig& c);
/// Strict: unknown keys anywhere are rejected with their dotted name.
RunConfig run_config_from(const nlohmann::json& j);

/// Applies "a.b.c=value" overrides onto `base`. Values parse as JSON when
/// possible, else as strings. Keys must already exist in `base`.
nlohmann::json apply_overrides(nlohmann::json base, const std::vector<std::string>& overrides);

/// Defaults, then the optional config file, then overrides; validated.
nlohmann::json resolve_config(const std::string& config_path, const std::vector<std::string>& overrides);

/// Words of every segment and its history.
Vocabulary build_vocabulary(const std::vector<DyadSegment>& train, int codebook_size);

/// Greedy generation of ceil(T/r) tokens per segment, decoded and trimmed to
/// the segment length.
std::vector<MotionSequence> predict(const ListenerModel& model, const VqParams& vq,
                                    const std::vector<DyadSegment>& segments, std::uint64_t seed);

/// A copy of `segments` whose listener motion is replaced by `motion`.
Dataset with_listeners(const Dataset& ds, const std::vector<MotionSequence>& motion);

std::vector<MotionSequence> listeners(const std::vector<DyadSegment>& segments);

/// Interleaved streams (ids and kinds) of the given segments under an
/// ablation, one JSON object per segment; used to inspect conditioning.
nlohmann::json dump_streams(const ListenerModel& model, const VqParams& vq, const std::vector<DyadSegment>& segments,
                            std::uint64_t seed);

struct SweepPoint {
  double history_seconds = 0;
  MetricsReport report;
};

/// For each history length: re-segments the same synthetic sessions, trains
/// a listener model on the train split and evaluates it on the test split.
/// The VQ-VAE is trained once and shared.
std::vector<SweepPoint> history_sweep(const RunConfig& cfg, const std::vector<double>& history_seconds,
                                      const VqParams* vq = nullptr, const LmProgress& progress = {});

}  // namespace lltn
