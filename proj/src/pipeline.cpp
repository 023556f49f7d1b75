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

#include "lltn/pipeline.hpp"

#include "lltn/parallel.hpp"

#include <fstream>

namespace lltn {

using nlohmann::json;

LmConfig PretrainConfig::apply(LmConfig arch) const {
  arch.learning_rate = learning_rate;
  arch.warmup_steps = warmup_steps;
  arch.max_steps = max_steps;
  arch.batch_size = batch_size;
  arch.early_stop_window = early_stop_window;
  arch.early_stop_delta = early_stop_delta;
  return arch;
}

namespace {

json interleave_json(const InterleaveConfig& c) {
  return {{"max_tokens", c.max_tokens},
          {"corruption_probability", c.corruption_probability},
          {"frames_per_token", c.frames_per_token},
          {"fps", c.fps}};
}

json eval_json(const EvalOptions& e) {
  return {{"fd_window", e.fd_window},
          {"diversity_pairs", e.diversity_pairs},
          {"bootstrap_resamples", e.bootstrap_resamples},
          {"fd_bootstrap_resamples", e.fd_bootstrap_resamples}};
}

json pretrain_json(const PretrainConfig& p) {
  return {{"learning_rate", p.learning_rate},   {"warmup_steps", p.warmup_steps},
          {"max_steps", p.max_steps},           {"batch_size", p.batch_size},
          {"early_stop_window", p.early_stop_window}, {"early_stop_delta", p.early_stop_delta}};
}

/// Every key of `candidate` must exist in `reference`; objects recurse.
void check_keys(const json& candidate, const json& reference, const std::string& prefix) {
  if (!candidate.is_object()) throw ParseError("config: '" + (prefix.empty() ? "<root>" : prefix) + "' must be an object");
  for (const auto& [k, v] : candidate.items()) {
    const std::string name = prefix.empty() ? k : prefix + "." + k;
    if (!reference.contains(k)) throw ParseError("config: unknown key '" + name + "'");
    if (reference[k].is_object()) check_keys(v, reference[k], name);
  }
}

void merge_into(json& base, const json& patch) {
  for (const auto& [k, v] : patch.items()) {
    if (v.is_object() && base.contains(k) && base[k].is_object())
      merge_into(base[k], v);
    else
      base[k] = v;
  }
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("config: '") + section + "." + key + "' has the wrong type");
  }
}

}  // namespace

json to_json(const RunConfig& c) {
  json synth = to_json(c.synth);
  synth.erase("seed");
  return {{"seed", c.seed},
          {"synth", synth},
          {"vq", to_json(c.vq)},
          {"lm", to_json(c.lm)},
          {"pretrain", pretrain_json(c.pretrain)},
          {"interleave", interleave_json(c.interleave)},
          {"eval", eval_json(c.eval)},
          {"nn", {{"history_seconds", c.nn.history_seconds}, {"min_frames", c.nn.min_frames}}}};
}

RunConfig run_config_from(const json& j) {
  check_keys(j, to_json(RunConfig{}), "");
  json full = to_json(RunConfig{});
  merge_into(full, j);
  RunConfig c;
  try {
    c.seed = full.at("seed").get<std::uint64_t>();
    c.synth = synth_config_from(full.at("synth"));
    c.synth.seed = c.seed;
    c.vq = vq_config_from(full.at("vq"));
    c.lm = lm_config_from(full.at("lm"));
    const auto& p = full.at("pretrain");
    c.pretrain.learning_rate = p.at("learning_rate").get<double>();
    c.pretrain.warmup_steps = p.at("warmup_steps").get<int>();
    c.pretrain.max_steps = p.at("max_steps").get<int>();
    c.pretrain.batch_size = p.at("batch_size").get<int>();
    c.pretrain.early_stop_window = p.at("early_stop_window").get<int>();
    c.pretrain.early_stop_delta = p.at("early_stop_delta").get<double>();
    const auto& i = full.at("interleave");
    c.interleave.max_tokens = get<int>(i, "interleave", "max_tokens");
    c.interleave.corruption_probability = get<double>(i, "interleave", "corruption_probability");
    c.interleave.frames_per_token = get<int>(i, "interleave", "frames_per_token");
    c.interleave.fps = get<int>(i, "interleave", "fps");
    const auto& e = full.at("eval");
    c.eval.fd_window = get<int>(e, "eval", "fd_window");
    c.eval.diversity_pairs = get<int>(e, "eval", "diversity_pairs");
    c.eval.bootstrap_resamples = get<int>(e, "eval", "bootstrap_resamples");
    c.eval.fd_bootstrap_resamples = get<int>(e, "eval", "fd_bootstrap_resamples");
    c.eval.seed = c.seed;
    const auto& n = full.at("nn");
    c.nn.history_seconds = get<double>(n, "nn", "history_seconds");
    c.nn.min_frames = get<int>(n, "nn", "min_frames");
  } catch (const json::exception& ex) {
    throw ParseError(std::string("config: ") + ex.what());
  }
  c.synth.validate();
  c.vq.validate();
  c.lm.validate();
  c.pretrain.apply(c.lm).validate();
  c.interleave.validate();
  if (c.interleave.frames_per_token != c.vq.frames_per_token())
    throw InvariantError("config: interleave.frames_per_token must equal 2^vq.downsample_levels");
  if (c.interleave.fps != c.synth.fps) throw InvariantError("config: interleave.fps must equal synth.fps");
  if (c.interleave.max_tokens + 1 > c.lm.max_positions)
    throw InvariantError("config: interleave.max_tokens must be below lm.max_positions");
  return c;
}

json apply_overrides(json base, const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("override '" + ov + "' is not key=value");
    const std::string key = ov.substr(0, eq), raw = ov.substr(eq + 1);
    json* node = &base;
    std::size_t pos = 0;
    while (true) {
      const auto dot = key.find('.', pos);
      const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
      if (!node->is_object() || !node->contains(part)) throw ParseError("config: unknown key '" + key + "'");
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      pos = dot + 1;
    }
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    *node = value;
  }
  return base;
}

json resolve_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  json base = to_json(RunConfig{});
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config '" + config_path + "'");
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw ParseError(config_path + ": " + e.what());
    }
    check_keys(file, base, "");
    merge_into(base, file);
  }
  base = apply_overrides(std::move(base), overrides);
  return to_json(run_config_from(base));
}

// ---------------------------------------------------------------------------

Vocabulary build_vocabulary(const std::vector<DyadSegment>& train, int codebook_size) {
  std::vector<std::string> texts;
  for (const auto& seg : train) {
    for (const auto& w : seg.history_words) texts.push_back(w.text);
    for (const auto& w : seg.words) texts.push_back(w.text);
  }
  return Vocabulary::build(texts, codebook_size);
}

namespace {

std::uint64_t segment_seed(std::uint64_t seed, const std::string& id) {
  return substream_seed(seed, "generate:" + id);
}

}  // namespace

std::vector<MotionSequence> predict(const ListenerModel& model, const VqParams& vq,
                                    const std::vector<DyadSegment>& segments, std::uint64_t seed) {
  const int r = vq.frames_per_token();
  std::vector<MotionSequence> out(segments.size());
  parallel_for(segments.size(), [&](std::size_t i) {
    const auto& seg = segments[i];
    const int n = (seg.length() + r - 1) / r;
    auto toks = generate(model, seg.history_words, seg.words, n, segment_seed(seed, seg.id));
    toks.pad = n * r - seg.length();
    out[i] = decode(vq, toks);
    out[i].fps = seg.listener.fps;
  });
  return out;
}

Dataset with_listeners(const Dataset& ds, const std::vector<MotionSequence>& motion) {
  if (motion.size() != ds.segments.size()) throw ShapeError("with_listeners: size mismatch");
  Dataset out = ds;
  for (std::size_t i = 0; i < motion.size(); ++i) out.segments[i].listener = motion[i];
  return out;
}

std::vector<MotionSequence> listeners(const std::vector<DyadSegment>& segments) {
  std::vector<MotionSequence> out;
  out.reserve(segments.size());
  for (const auto& s : segments) out.push_back(s.listener);
  return out;
}

json dump_streams(const ListenerModel& model, const VqParams& vq, const std::vector<DyadSegment>& segments,
                  std::uint64_t seed) {
  static const char* kKinds[] = {"history", "text", "space", "motion"};
  json out = json::array();
  for (const auto& seg : segments) {
    Rng rng(segment_seed(seed, seg.id));
    const auto seq = assemble_for(model.ablation, model.vocab, seg.history_words, seg.words,
                                  tokenize_motion(vq, seg.listener), model.interleave, rng);
    std::vector<std::string> kinds;
    for (auto k : seq.kinds) kinds.emplace_back(kKinds[static_cast<int>(k)]);
    out.push_back({{"id", seg.id}, {"ablation", to_string(model.ablation)}, {"ids", seq.ids}, {"kinds", kinds}});
  }
  return out;
}

std::vector<SweepPoint> history_sweep(const RunConfig& cfg, const std::vector<double>& history_seconds,
                                      const VqParams* vq, const LmProgress& progress) {
  std::vector<SweepPoint> out;
  std::optional<VqParams> trained;
  for (double h : history_seconds) {
    RunConfig c = cfg;
    c.synth.segmentation.history_seconds = h;
    const SynthCorpus corpus = generate_corpus(c.synth);
    if (!vq && !trained) trained = train_vqvae(corpus.train.segments, c.vq, c.seed).params;
    const VqParams& codec = vq ? *vq : *trained;
    const Vocabulary vocab = build_vocabulary(corpus.train.segments, codec.codebook.size());
    LmTrainOptions options;
    options.config = c.lm;
    options.interleave = c.interleave;
    const auto model = train_lm(corpus.train.segments, codec, vocab, options, c.seed, progress).model;
    const auto pred = predict(model, codec, corpus.test.segments, c.seed);
    EvalOptions eval = c.eval;
    eval.seed = c.seed;
    out.push_back({h, evaluate(pred, corpus.test.segments, corpus.affect, &codec, eval)});
  }
  return out;
}

}  // namespace lltn
