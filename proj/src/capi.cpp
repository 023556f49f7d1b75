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

#include "lltn/lltn.h"

#include "lltn/baselines.hpp"
#include "lltn/dataset.hpp"
#include "lltn/lm.hpp"
#include "lltn/metrics.hpp"
#include "lltn/parallel.hpp"
#include "lltn/pipeline.hpp"
#include "lltn/synthetic.hpp"
#include "lltn/vq.hpp"

#include <cstdlib>
#include <cstring>
#include <map>
#include <string>

struct lltn_dataset {
  lltn::Dataset data;
};

struct lltn_vq {
  lltn::VqParams params;
};

struct lltn_lm {
  lltn::ListenerModel model;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

class ArgumentError : public lltn::Error {
 public:
  using Error::Error;
};

template <typename F>
lltn_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return LLTN_OK;
  } catch (const ArgumentError& e) {
    g_last_error = e.what();
    return LLTN_ERR_INVALID_ARGUMENT;
  } catch (const lltn::ParseError& e) {
    g_last_error = e.what();
    return LLTN_ERR_PARSE;
  } catch (const lltn::ShapeError& e) {
    g_last_error = e.what();
    return LLTN_ERR_SHAPE;
  } catch (const lltn::InvariantError& e) {
    g_last_error = e.what();
    return LLTN_ERR_INVARIANT;
  } catch (const lltn::NumericError& e) {
    g_last_error = e.what();
    return LLTN_ERR_NUMERIC;
  } catch (const lltn::IoError& e) {
    g_last_error = e.what();
    return LLTN_ERR_IO;
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return LLTN_ERR_PARSE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LLTN_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return LLTN_ERR_INTERNAL;
  }
}

template <typename T>
const T& need(const T* p, const char* what) {
  if (!p) throw ArgumentError(std::string(what) + " is NULL");
  return *p;
}

std::string need(const char* p, const char* what) {
  if (!p) throw ArgumentError(std::string(what) + " is NULL");
  return p;
}

template <typename T>
void need_out(T* p, const char* what) {
  if (!p) throw ArgumentError(std::string(what) + " is NULL");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

lltn::RunConfig config(const char* config_json) {
  if (!config_json) throw ArgumentError("config_json is NULL");
  json j = json::parse(config_json, nullptr, false);
  if (j.is_discarded()) throw lltn::ParseError("config_json is not valid JSON");
  return lltn::run_config_from(j);
}

lltn::LmProgress lm_logger(lltn_log_fn log, void* user) {
  if (!log) return {};
  return [log, user](const lltn::LmStepLog& s) {
    log(json{{"step", s.step}, {"lr", s.lr}, {"loss", s.loss}}.dump().c_str(), user);
  };
}

}  // namespace

extern "C" {

const char* lltn_version(void) { return "1.0.0"; }

const char* lltn_last_error(void) { return g_last_error.c_str(); }

const char* lltn_status_name(lltn_status status) {
  switch (status) {
    case LLTN_OK: return "ok";
    case LLTN_ERR_INVALID_ARGUMENT: return "invalid argument";
    case LLTN_ERR_PARSE: return "parse error";
    case LLTN_ERR_INVARIANT: return "invariant violation";
    case LLTN_ERR_SHAPE: return "shape mismatch";
    case LLTN_ERR_NUMERIC: return "numeric error";
    case LLTN_ERR_IO: return "i/o error";
    case LLTN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void lltn_string_free(char* s) { std::free(s); }

void lltn_set_threads(int n) { lltn::set_num_threads(n); }

lltn_status lltn_config_resolve(const char* config_path, const char* const* overrides, size_t n_overrides,
                                char** out_json) {
  return guarded([&] {
    need_out(out_json, "out_json");
    std::vector<std::string> ov;
    for (size_t i = 0; i < n_overrides; ++i) ov.emplace_back(need(overrides[i], "override"));
    *out_json = dup(lltn::resolve_config(config_path ? config_path : "", ov).dump(2));
  });
}

// --- datasets ---------------------------------------------------------------

lltn_status lltn_dataset_load(const char* path, lltn_dataset** out) {
  return guarded([&] {
    need_out(out, "out");
    *out = new lltn_dataset{lltn::load_dataset(need(path, "path"))};
  });
}

lltn_status lltn_dataset_save(const lltn_dataset* ds, const char* path) {
  return guarded([&] { lltn::save_dataset(need(ds, "dataset").data, need(path, "path")); });
}

lltn_status lltn_dataset_size(const lltn_dataset* ds, size_t* out) {
  return guarded([&] {
    need_out(out, "out");
    *out = need(ds, "dataset").data.size();
  });
}

void lltn_dataset_free(lltn_dataset* ds) { delete ds; }

lltn_status lltn_synth_generate(const char* config_json, lltn_dataset** train, lltn_dataset** val,
                                lltn_dataset** test, char** affect_json) {
  return guarded([&] {
    need_out(train, "train");
    need_out(val, "val");
    need_out(test, "test");
    need_out(affect_json, "affect_json");
    auto corpus = lltn::generate_corpus(config(config_json).synth);
    auto a = std::make_unique<lltn_dataset>(lltn_dataset{std::move(corpus.train)});
    auto b = std::make_unique<lltn_dataset>(lltn_dataset{std::move(corpus.val)});
    auto c = std::make_unique<lltn_dataset>(lltn_dataset{std::move(corpus.test)});
    *affect_json = dup(corpus.affect.to_json().dump(2));
    *train = a.release();
    *val = b.release();
    *test = c.release();
  });
}

// --- VQ-VAE -----------------------------------------------------------------

lltn_status lltn_vq_train(const char* config_json, const lltn_dataset* train, lltn_log_fn log, void* user,
                          lltn_vq** out) {
  return guarded([&] {
    need_out(out, "out");
    const auto cfg = config(config_json);
    lltn::VqProgress progress;
    if (log)
      progress = [log, user](const lltn::VqStepLog& s) {
        log(json{{"step", s.step},
                 {"lr", s.lr},
                 {"loss", s.losses.total},
                 {"reconstruct", s.losses.reconstruct},
                 {"velocity", s.losses.velocity},
                 {"embed", s.losses.embed},
                 {"resets", s.resets}}
                .dump()
                .c_str(),
            user);
      };
    auto result = lltn::train_vqvae(need(train, "train").data.segments, cfg.vq, cfg.seed, progress);
    *out = new lltn_vq{std::move(result.params)};
  });
}

lltn_status lltn_vq_load(const char* path, lltn_vq** out) {
  return guarded([&] {
    need_out(out, "out");
    *out = new lltn_vq{lltn::load_vq(need(path, "path"))};
  });
}

lltn_status lltn_vq_save(const lltn_vq* vq, const char* path) {
  return guarded([&] { lltn::save_vq(need(vq, "vq").params, need(path, "path")); });
}

lltn_status lltn_vq_info(const lltn_vq* vq, const lltn_dataset* ds, char** out_json) {
  return guarded([&] {
    need_out(out_json, "out_json");
    const auto& p = need(vq, "vq").params;
    json info{{"codebook_size", p.codebook.size()},
              {"embed_dim", p.codebook.dim()},
              {"frames_per_token", p.frames_per_token()},
              {"frame_dim", p.frame_dim},
              {"config", lltn::to_json(p.config)}};
    if (ds) info["codebook_usage"] = lltn::codebook_usage(p, ds->data.segments);
    *out_json = dup(info.dump(2));
  });
}

lltn_status lltn_vq_reconstruct(const lltn_vq* vq, const lltn_dataset* ds, lltn_dataset** out) {
  return guarded([&] {
    need_out(out, "out");
    const auto& p = need(vq, "vq").params;
    const auto& d = need(ds, "dataset").data;
    std::vector<lltn::MotionSequence> rec(d.segments.size());
    lltn::parallel_for(rec.size(), [&](std::size_t i) {
      rec[i] = lltn::decode(p, lltn::tokenize_motion(p, d.segments[i].listener));
    });
    *out = new lltn_dataset{lltn::with_listeners(d, rec)};
  });
}

void lltn_vq_free(lltn_vq* vq) { delete vq; }

// --- listener LM ------------------------------------------------------------

lltn_status lltn_lm_pretrain(const char* config_json, const lltn_dataset* train, int codebook_size, lltn_log_fn log,
                             void* user, lltn_lm** out) {
  return guarded([&] {
    need_out(out, "out");
    const auto cfg = config(config_json);
    const auto& segs = need(train, "train").data.segments;
    auto vocab = lltn::build_vocabulary(segs, codebook_size);
    auto result = lltn::pretrain_text_lm(lltn::text_streams(vocab, segs), vocab, cfg.pretrain.apply(cfg.lm), cfg.seed,
                                         lm_logger(log, user));
    auto lm = std::make_unique<lltn_lm>();
    lm->model.params = std::move(result.params);
    lm->model.vocab = std::move(vocab);
    lm->model.interleave = cfg.interleave;
    *out = lm.release();
  });
}

lltn_status lltn_lm_train(const char* config_json, const lltn_dataset* train, const lltn_vq* vq, const char* ablation,
                          const lltn_lm* init, lltn_log_fn log, void* user, lltn_lm** out) {
  return guarded([&] {
    need_out(out, "out");
    const auto cfg = config(config_json);
    const auto& segs = need(train, "train").data.segments;
    const auto& codec = need(vq, "vq").params;
    lltn::LmTrainOptions options;
    options.config = cfg.lm;
    options.interleave = cfg.interleave;
    options.ablation = lltn::ablation_from_string(ablation ? ablation : "full");
    if (init && options.ablation == lltn::Ablation::NoPretrain)
      throw ArgumentError("the nopt ablation trains from a random init; do not pass initial weights");
    if (init && !init->model.params.text_head)
      throw ArgumentError("initial weights must come from text pretraining");
    lltn::Vocabulary vocab =
        init ? init->model.vocab : lltn::build_vocabulary(segs, codec.codebook.size());
    if (vocab.codebook_size() != codec.codebook.size())
      throw lltn::ShapeError("pretrained vocabulary expects " + std::to_string(vocab.codebook_size()) +
                             " motion codes, the VQ-VAE has " + std::to_string(codec.codebook.size()));
    if (init) options.init = &init->model.params;
    auto result = lltn::train_lm(segs, codec, vocab, options, cfg.seed, lm_logger(log, user));
    *out = new lltn_lm{std::move(result.model)};
  });
}

lltn_status lltn_lm_load(const char* path, lltn_lm** out) {
  return guarded([&] {
    need_out(out, "out");
    *out = new lltn_lm{lltn::load_listener(need(path, "path"))};
  });
}

lltn_status lltn_lm_save(const lltn_lm* lm, const char* path) {
  return guarded([&] { lltn::save_listener(need(lm, "lm").model, need(path, "path")); });
}

lltn_status lltn_lm_info(const lltn_lm* lm, char** out_json) {
  return guarded([&] {
    need_out(out_json, "out_json");
    auto params = need(lm, "lm").model.params;
    json info{{"config", lltn::to_json(params.config)},
              {"ablation", lltn::to_string(lm->model.ablation)},
              {"text_vocab", params.text_vocab},
              {"codebook_size", params.codebook_size},
              {"text_head", params.text_head.has_value()},
              {"parameters", lltn::nn::count_parameters(params.collect())}};
    *out_json = dup(info.dump(2));
  });
}

lltn_status lltn_lm_generate(const lltn_lm* lm, const lltn_vq* vq, const lltn_dataset* segments, uint64_t seed,
                             lltn_dataset** predictions) {
  return guarded([&] {
    need_out(predictions, "predictions");
    const auto& model = need(lm, "lm").model;
    if (model.params.text_head) throw ArgumentError("a text-pretrained model cannot generate motion; fine-tune it first");
    const auto& ds = need(segments, "segments").data;
    const auto pred = lltn::predict(model, need(vq, "vq").params, ds.segments, seed);
    *predictions = new lltn_dataset{lltn::with_listeners(ds, pred)};
  });
}

lltn_status lltn_lm_dump_streams(const lltn_lm* lm, const lltn_vq* vq, const lltn_dataset* segments, uint64_t seed,
                                 char** out_json) {
  return guarded([&] {
    need_out(out_json, "out_json");
    const auto streams =
        lltn::dump_streams(need(lm, "lm").model, need(vq, "vq").params, need(segments, "segments").data.segments, seed);
    std::string text;
    for (const auto& s : streams) text += s.dump() + "\n";
    *out_json = dup(text);
  });
}

void lltn_lm_free(lltn_lm* lm) { delete lm; }

// --- evaluation -------------------------------------------------------------

lltn_status lltn_evaluate(const char* config_json, const lltn_dataset* predictions, const lltn_dataset* ground_truth,
                          const char* affect_json, const lltn_vq* vq, char** report_json) {
  return guarded([&] {
    need_out(report_json, "report_json");
    const auto cfg = config(config_json);
    const auto& pred = need(predictions, "predictions").data;
    const auto& gt = need(ground_truth, "ground_truth").data;
    const auto affect = lltn::AffectModel::from_json(json::parse(need(affect_json, "affect_json")));
    std::map<std::string, const lltn::MotionSequence*> by_id;
    for (const auto& s : pred.segments)
      if (!by_id.emplace(s.id, &s.listener).second)
        throw lltn::InvariantError("predictions contain segment '" + s.id + "' twice");
    std::vector<lltn::MotionSequence> matched;
    for (const auto& s : gt.segments) {
      auto it = by_id.find(s.id);
      if (it == by_id.end()) throw lltn::InvariantError("no prediction for segment '" + s.id + "'");
      matched.push_back(*it->second);
    }
    if (by_id.size() != gt.segments.size())
      throw lltn::InvariantError("predictions contain segments missing from the ground truth");
    const auto report = lltn::evaluate(matched, gt.segments, affect, vq ? &vq->params : nullptr, cfg.eval);
    *report_json = dup(report.to_json().dump(2));
  });
}

lltn_status lltn_format_table(const char* rows_json, char** out_text) {
  return guarded([&] {
    need_out(out_text, "out_text");
    const json rows = json::parse(need(rows_json, "rows_json"));
    std::vector<std::pair<std::string, lltn::MetricsReport>> table;
    for (const auto& r : rows)
      table.emplace_back(r.at("name").get<std::string>(), lltn::MetricsReport::from_json(r.at("report")));
    *out_text = dup(lltn::format_table(table));
  });
}

// --- baselines --------------------------------------------------------------

lltn_status lltn_baseline_predict(const char* config_json, const char* name, const lltn_dataset* train,
                                  const lltn_vq* vq, const lltn_dataset* segments, const char* index_path,
                                  lltn_dataset** predictions) {
  return guarded([&] {
    need_out(predictions, "predictions");
    const auto cfg = config(config_json);
    const std::string which = need(name, "name");
    const auto& tr = need(train, "train").data.segments;
    const auto& ds = need(segments, "segments").data;
    std::vector<lltn::MotionSequence> out;
    if (which == "random-train") {
      lltn::Rng rng = lltn::substream(cfg.seed, "baseline-random-train");
      for (const auto& s : ds.segments) out.push_back(lltn::baseline_random_train(tr, rng, s.length()));
    } else if (which == "random-vq") {
      const auto& codec = need(vq, "vq").params;
      lltn::Rng rng = lltn::substream(cfg.seed, "baseline-random-vq");
      for (const auto& s : ds.segments) out.push_back(lltn::baseline_random_vq(codec, rng, s.length()));
    } else if (which == "mean") {
      const lltn::MeanBaseline mean(tr);
      for (const auto& s : ds.segments) out.push_back(mean.generate(s.length()));
    } else if (which == "nn") {
      const auto index = lltn::NnIndex::build(tr, cfg.nn);
      if (index_path) index.save(index_path);
      for (const auto& s : ds.segments) out.push_back(index.query(s));
    } else {
      throw ArgumentError("unknown baseline '" + which + "' (random-train, random-vq, mean, nn)");
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i].fps = ds.segments[i].listener.fps;
    *predictions = new lltn_dataset{lltn::with_listeners(ds, out)};
  });
}

// --- analyses ---------------------------------------------------------------

lltn_status lltn_analyze_punctuation(const char* config_json, const lltn_dataset* ds, const lltn_vq* vq,
                                     char** out_csv) {
  return guarded([&] {
    need_out(out_csv, "out_csv");
    const auto cfg = config(config_json);
    const auto& d = need(ds, "dataset").data;
    const auto classifier = lltn::fit_nod_classifier(d);
    *out_csv = dup(lltn::punctuation_nod_stats(cfg.synth, d, need(vq, "vq").params, classifier).to_csv());
  });
}

lltn_status lltn_analyze_affect_hist(const char* config_json, const lltn_dataset* ds, const char* affect_json, int k,
                                     char** out_csv) {
  return guarded([&] {
    need_out(out_csv, "out_csv");
    const auto cfg = config(config_json);
    const auto affect = lltn::AffectModel::from_json(json::parse(need(affect_json, "affect_json")));
    *out_csv = dup(lltn::affect_phrase_histogram(cfg.synth, need(ds, "dataset").data, affect, k).to_csv());
  });
}

lltn_status lltn_analyze_history_sweep(const char* config_json, const double* history_seconds, size_t n,
                                       const lltn_vq* vq, lltn_log_fn log, void* user, char** out_json) {
  return guarded([&] {
    need_out(out_json, "out_json");
    if (n > 0 && !history_seconds) throw ArgumentError("history_seconds is NULL");
    const auto cfg = config(config_json);
    const std::vector<double> hs(history_seconds, history_seconds + n);
    const auto points = lltn::history_sweep(cfg, hs, vq ? &vq->params : nullptr, lm_logger(log, user));
    json out = json::array();
    for (const auto& p : points) out.push_back({{"history_seconds", p.history_seconds}, {"report", p.report.to_json()}});
    *out_json = dup(out.dump(2));
  });
}

}  // extern "C"
