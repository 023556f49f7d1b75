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

// lltn: command-line driver over the C API.

#include "lltn/lltn.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(lltn_status s, const std::string& what) {
  if (s != LLTN_OK) throw Failure(what + ": " + lltn_status_name(s) + ": " + lltn_last_error());
}

std::string take(char* s) {
  std::string out = s ? s : "";
  lltn_string_free(s);
  return out;
}

// RAII wrappers for the C handles.
struct DatasetDeleter {
  void operator()(lltn_dataset* p) const { lltn_dataset_free(p); }
};
struct VqDeleter {
  void operator()(lltn_vq* p) const { lltn_vq_free(p); }
};
struct LmDeleter {
  void operator()(lltn_lm* p) const { lltn_lm_free(p); }
};
using Dataset = std::unique_ptr<lltn_dataset, DatasetDeleter>;
using Vq = std::unique_ptr<lltn_vq, VqDeleter>;
using Lm = std::unique_ptr<lltn_lm, LmDeleter>;

Dataset load_dataset(const std::string& path) {
  lltn_dataset* p = nullptr;
  check(lltn_dataset_load(path.c_str(), &p), "loading " + path);
  return Dataset(p);
}

Vq load_vq(const std::string& path) {
  lltn_vq* p = nullptr;
  check(lltn_vq_load(path.c_str(), &p), "loading " + path);
  return Vq(p);
}

Lm load_lm(const std::string& path) {
  lltn_lm* p = nullptr;
  check(lltn_lm_load(path.c_str(), &p), "loading " + path);
  return Lm(p);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure("cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Options shared by every command, plus the bookkeeping for one run.
struct Run {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  bool force = false;
  std::vector<std::string> overrides;

  json config;
  std::string config_text;
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point started;

  void add_options(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "global seed (overrides the config)");
    app->add_option("--out", out_dir, "output directory")->capture_default_str();
    app->add_flag("--force", force, "overwrite existing outputs");
    app->add_option("--set", overrides, "config override key=value (dotted keys, repeatable)");
  }

  void input(const std::string& name, const std::string& path) {
    if (path.empty()) return;
    if (!fs::exists(path)) throw Failure(name + " '" + path + "' does not exist");
    inputs.emplace_back(name, path);
  }

  /// Resolves the config and refuses to clobber outputs without --force.
  void begin(const std::vector<std::string>& planned) {
    started = std::chrono::steady_clock::now();
    std::vector<std::string> ov = overrides;
    if (seed) ov.push_back("seed=" + std::to_string(*seed));
    std::vector<const char*> raw;
    for (const auto& o : ov) raw.push_back(o.c_str());
    char* resolved = nullptr;
    check(lltn_config_resolve(config_path.empty() ? nullptr : config_path.c_str(), raw.data(), raw.size(), &resolved),
          "configuration");
    config_text = take(resolved);
    config = json::parse(config_text);
    fs::create_directories(out_dir);
    for (const auto& name : planned) {
      const fs::path p = fs::path(out_dir) / name;
      if (fs::exists(p) && !force) throw Failure("'" + p.string() + "' exists; pass --force to overwrite");
    }
    for (const std::string name : {"manifest.json"}) {
      const fs::path p = fs::path(out_dir) / name;
      if (fs::exists(p) && !force) throw Failure("'" + p.string() + "' exists; pass --force to overwrite");
    }
  }

  std::string path(const std::string& name) {
    outputs.push_back(name);
    return (fs::path(out_dir) / name).string();
  }

  void write(const std::string& name, const std::string& text) {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw Failure("cannot write '" + name + "'");
    out << text;
  }

  std::uint64_t run_seed() const { return config.at("seed").get<std::uint64_t>(); }

  void finish(int argc, char** argv) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json in = json::object();
    for (const auto& [k, v] : inputs) in[k] = v;
    std::vector<std::string> args(argv, argv + argc);
    json manifest{{"tool", "lltn"},
                  {"version", lltn_version()},
                  {"command", command},
                  {"argv", args},
                  {"seed", run_seed()},
                  {"config", config},
                  {"inputs", in},
                  {"outputs", outputs},
                  {"wall_time_seconds", wall}};
    std::ofstream out(fs::path(out_dir) / "manifest.json");
    out << manifest.dump(2) << '\n';
  }
};

/// Training log sink: every step to a JSONL file, a summary line to stderr.
struct StepLog {
  std::ofstream file;
  std::string label;
  int every = 100;

  static void callback(const char* line, void* user) {
    auto* self = static_cast<StepLog*>(user);
    self->file << line << '\n';
    const json j = json::parse(line);
    const int step = j.at("step").get<int>();
    if (step % self->every == 0)
      std::fprintf(stderr, "[%s] step %d loss %.5f\n", self->label.c_str(), step, j.at("loss").get<double>());
  }
};

Dataset generate_predictions(const lltn_lm* lm, const lltn_vq* vq, const lltn_dataset* segments, std::uint64_t seed) {
  lltn_dataset* p = nullptr;
  check(lltn_lm_generate(lm, vq, segments, seed, &p), "generation");
  return Dataset(p);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-conditioned listener motion: synthesis, training, generation and evaluation"};
  app.require_subcommand(1);
  Run run;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dyadic corpus");
  run.add_options(synth);

  // train-vqvae
  std::string train_path, vq_path, init_path, model_path, segments_path, predictions_path, truth_path, affect_path;
  std::string ablation = "full", name, which, history = "0,2,4,8";
  int k = 100;
  auto* train_vq = app.add_subcommand("train-vqvae", "train the motion VQ-VAE");
  run.add_options(train_vq);
  train_vq->add_option("--train", train_path, "training segments (JSONL)")->required();

  auto* pretrain = app.add_subcommand("pretrain-text", "pretrain the transformer on text streams");
  run.add_options(pretrain);
  pretrain->add_option("--train", train_path, "training segments (JSONL)")->required();
  pretrain->add_option("--vq", vq_path, "VQ-VAE checkpoint (fixes the motion vocabulary size)")->required();

  auto* train_lm = app.add_subcommand("train-lm", "train the listener model");
  run.add_options(train_lm);
  train_lm->add_option("--train", train_path, "training segments (JSONL)")->required();
  train_lm->add_option("--vq", vq_path, "VQ-VAE checkpoint")->required();
  train_lm->add_option("--init", init_path, "text-pretrained checkpoint");
  train_lm->add_option("--ablation", ablation, "conditioning variant")->capture_default_str();

  auto* gen = app.add_subcommand("generate", "generate listener motion for segments");
  run.add_options(gen);
  gen->add_option("--model", model_path, "listener model checkpoint")->required();
  gen->add_option("--vq", vq_path, "VQ-VAE checkpoint")->required();
  gen->add_option("--segments", segments_path, "segments to respond to (JSONL)")->required();

  auto* eval = app.add_subcommand("evaluate", "score predictions against ground truth");
  run.add_options(eval);
  eval->add_option("--predictions", predictions_path, "predicted segments (JSONL)")->required();
  eval->add_option("--truth", truth_path, "ground-truth segments (JSONL)")->required();
  eval->add_option("--affect", affect_path, "affect model (JSON)")->required();
  eval->add_option("--vq", vq_path, "VQ-VAE checkpoint for the Shannon index");
  eval->add_option("--name", name, "row label in the table")->default_val("model");

  auto* base = app.add_subcommand("baseline", "run a baseline: random-train, random-vq, mean, nn, uncond");
  run.add_options(base);
  base->add_option("name", name, "baseline name")->required();
  base->add_option("--train", train_path, "training segments (JSONL)")->required();
  base->add_option("--segments", segments_path, "segments to respond to (JSONL)")->required();
  base->add_option("--vq", vq_path, "VQ-VAE checkpoint (random-vq, uncond)");

  auto* ablate = app.add_subcommand("ablate", "train and run a conditioning ablation");
  run.add_options(ablate);
  ablate->add_option("name", name, "nopt, unaligned, scrambled, fixtok or fixtok-punc")
      ->required()
      ->check(CLI::IsMember({"nopt", "unaligned", "scrambled", "fixtok", "fixtok-punc"}));
  ablate->add_option("--train", train_path, "training segments (JSONL)")->required();
  ablate->add_option("--segments", segments_path, "segments to respond to (JSONL)")->required();
  ablate->add_option("--vq", vq_path, "VQ-VAE checkpoint")->required();
  ablate->add_option("--init", init_path, "text-pretrained checkpoint (not used by nopt)");

  auto* analyze = app.add_subcommand("analyze", "corpus analyses: punctuation, affect-hist, history-sweep");
  run.add_options(analyze);
  analyze->add_option("which", which, "analysis")
      ->required()
      ->check(CLI::IsMember({"punctuation", "affect-hist", "history-sweep"}));
  analyze->add_option("--data", segments_path, "segments to analyze (JSONL)");
  analyze->add_option("--vq", vq_path, "VQ-VAE checkpoint");
  analyze->add_option("--affect", affect_path, "affect model (JSON)");
  analyze->add_option("--k", k, "phrases per polarity")->capture_default_str();
  analyze->add_option("--history", history, "comma-separated history lengths in seconds")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* cmd = app.get_subcommands().front();
    run.command = cmd->get_name();

    if (cmd == synth) {
      run.begin({"train.jsonl", "val.jsonl", "test.jsonl", "affect.json", "config.json"});
      lltn_dataset *tr = nullptr, *va = nullptr, *te = nullptr;
      char* affect = nullptr;
      check(lltn_synth_generate(run.config_text.c_str(), &tr, &va, &te, &affect), "synthesis");
      Dataset a(tr), b(va), c(te);
      check(lltn_dataset_save(a.get(), run.path("train.jsonl").c_str()), "saving train split");
      check(lltn_dataset_save(b.get(), run.path("val.jsonl").c_str()), "saving val split");
      check(lltn_dataset_save(c.get(), run.path("test.jsonl").c_str()), "saving test split");
      run.write("affect.json", take(affect) + "\n");
      run.write("config.json", run.config_text + "\n");
      std::size_t n = 0;
      check(lltn_dataset_size(a.get(), &n), "size");
      std::fprintf(stderr, "wrote %zu training segments to %s\n", n, run.out_dir.c_str());

    } else if (cmd == train_vq) {
      run.input("train", train_path);
      run.begin({"vq.lltn", "vq.lltn.json", "vq_log.jsonl", "vq_info.json"});
      auto data = load_dataset(train_path);
      StepLog log{std::ofstream(run.path("vq_log.jsonl")), "vq", 100};
      lltn_vq* vq = nullptr;
      check(lltn_vq_train(run.config_text.c_str(), data.get(), &StepLog::callback, &log, &vq), "VQ-VAE training");
      Vq owned(vq);
      check(lltn_vq_save(vq, run.path("vq.lltn").c_str()), "saving VQ-VAE");
      run.outputs.push_back("vq.lltn.json");
      char* info = nullptr;
      check(lltn_vq_info(vq, data.get(), &info), "VQ-VAE info");
      run.write("vq_info.json", take(info) + "\n");

    } else if (cmd == pretrain) {
      run.input("train", train_path);
      run.input("vq", vq_path);
      run.begin({"lm_text.lltn", "lm_text.lltn.json", "pretrain_log.jsonl"});
      auto data = load_dataset(train_path);
      auto vq = load_vq(vq_path);
      char* info = nullptr;
      check(lltn_vq_info(vq.get(), nullptr, &info), "VQ-VAE info");
      const int codebook = json::parse(take(info)).at("codebook_size").get<int>();
      StepLog log{std::ofstream(run.path("pretrain_log.jsonl")), "pretrain", 100};
      lltn_lm* lm = nullptr;
      check(lltn_lm_pretrain(run.config_text.c_str(), data.get(), codebook, &StepLog::callback, &log, &lm),
            "text pretraining");
      Lm owned(lm);
      check(lltn_lm_save(lm, run.path("lm_text.lltn").c_str()), "saving model");
      run.outputs.push_back("lm_text.lltn.json");

    } else if (cmd == train_lm) {
      run.input("train", train_path);
      run.input("vq", vq_path);
      run.input("init", init_path);
      run.begin({"lm.lltn", "lm.lltn.json", "lm_log.jsonl"});
      auto data = load_dataset(train_path);
      auto vq = load_vq(vq_path);
      Lm init = init_path.empty() ? Lm() : load_lm(init_path);
      StepLog log{std::ofstream(run.path("lm_log.jsonl")), ablation, 100};
      lltn_lm* lm = nullptr;
      check(lltn_lm_train(run.config_text.c_str(), data.get(), vq.get(), ablation.c_str(), init.get(),
                          &StepLog::callback, &log, &lm),
            "listener training");
      Lm owned(lm);
      check(lltn_lm_save(lm, run.path("lm.lltn").c_str()), "saving model");
      run.outputs.push_back("lm.lltn.json");

    } else if (cmd == gen) {
      run.input("model", model_path);
      run.input("vq", vq_path);
      run.input("segments", segments_path);
      run.begin({"predictions.jsonl"});
      auto lm = load_lm(model_path);
      auto vq = load_vq(vq_path);
      auto segs = load_dataset(segments_path);
      auto pred = generate_predictions(lm.get(), vq.get(), segs.get(), run.run_seed());
      check(lltn_dataset_save(pred.get(), run.path("predictions.jsonl").c_str()), "saving predictions");

    } else if (cmd == eval) {
      run.input("predictions", predictions_path);
      run.input("truth", truth_path);
      run.input("affect", affect_path);
      run.input("vq", vq_path);
      run.begin({"report.json", "report.txt"});
      auto pred = load_dataset(predictions_path);
      auto truth = load_dataset(truth_path);
      Vq vq = vq_path.empty() ? Vq() : load_vq(vq_path);
      const std::string affect = read_file(affect_path);
      char* report = nullptr;
      check(lltn_evaluate(run.config_text.c_str(), pred.get(), truth.get(), affect.c_str(), vq.get(), &report),
            "evaluation");
      const std::string report_text = take(report);
      run.write("report.json", report_text + "\n");
      const json rows = json::array({json{{"name", name}, {"report", json::parse(report_text)}}});
      char* table = nullptr;
      check(lltn_format_table(rows.dump().c_str(), &table), "formatting");
      const std::string text = take(table);
      run.write("report.txt", text);
      std::cout << text;

    } else if (cmd == base) {
      run.input("train", train_path);
      run.input("segments", segments_path);
      run.input("vq", vq_path);
      const bool uncond = name == "uncond";
      std::vector<std::string> planned{"predictions.jsonl"};
      if (name == "nn") planned.push_back("nn_index.json");
      if (uncond) planned.insert(planned.end(), {"lm.lltn", "lm.lltn.json", "lm_log.jsonl"});
      run.begin(planned);
      auto train = load_dataset(train_path);
      auto segs = load_dataset(segments_path);
      Vq vq = vq_path.empty() ? Vq() : load_vq(vq_path);
      Dataset pred;
      if (uncond) {
        if (!vq) throw Failure("the uncond baseline needs --vq");
        StepLog log{std::ofstream(run.path("lm_log.jsonl")), "uncond", 100};
        lltn_lm* lm = nullptr;
        check(lltn_lm_train(run.config_text.c_str(), train.get(), vq.get(), "uncond", nullptr, &StepLog::callback,
                            &log, &lm),
              "uncond training");
        Lm owned(lm);
        check(lltn_lm_save(lm, run.path("lm.lltn").c_str()), "saving model");
        run.outputs.push_back("lm.lltn.json");
        pred = generate_predictions(lm, vq.get(), segs.get(), run.run_seed());
      } else {
        const std::string index = name == "nn" ? run.path("nn_index.json") : "";
        lltn_dataset* p = nullptr;
        check(lltn_baseline_predict(run.config_text.c_str(), name.c_str(), train.get(), vq.get(), segs.get(),
                                    index.empty() ? nullptr : index.c_str(), &p),
              "baseline " + name);
        pred = Dataset(p);
      }
      check(lltn_dataset_save(pred.get(), run.path("predictions.jsonl").c_str()), "saving predictions");

    } else if (cmd == ablate) {
      run.input("train", train_path);
      run.input("segments", segments_path);
      run.input("vq", vq_path);
      run.input("init", init_path);
      if (name == "nopt" && !init_path.empty()) throw Failure("nopt trains from scratch; drop --init");
      run.begin({"lm.lltn", "lm.lltn.json", "lm_log.jsonl", "streams.jsonl", "predictions.jsonl"});
      auto train = load_dataset(train_path);
      auto segs = load_dataset(segments_path);
      auto vq = load_vq(vq_path);
      Lm init = init_path.empty() ? Lm() : load_lm(init_path);
      StepLog log{std::ofstream(run.path("lm_log.jsonl")), name, 100};
      lltn_lm* lm = nullptr;
      check(lltn_lm_train(run.config_text.c_str(), train.get(), vq.get(), name.c_str(), init.get(),
                          &StepLog::callback, &log, &lm),
            "ablation training");
      Lm owned(lm);
      check(lltn_lm_save(lm, run.path("lm.lltn").c_str()), "saving model");
      run.outputs.push_back("lm.lltn.json");
      char* streams = nullptr;
      check(lltn_lm_dump_streams(lm, vq.get(), segs.get(), run.run_seed(), &streams), "dumping streams");
      run.write("streams.jsonl", take(streams));
      auto pred = generate_predictions(lm, vq.get(), segs.get(), run.run_seed());
      check(lltn_dataset_save(pred.get(), run.path("predictions.jsonl").c_str()), "saving predictions");

    } else if (cmd == analyze) {
      run.input("data", segments_path);
      run.input("vq", vq_path);
      run.input("affect", affect_path);
      if (which == "punctuation") {
        if (segments_path.empty() || vq_path.empty()) throw Failure("punctuation needs --data and --vq");
        run.begin({"punctuation.csv"});
        auto data = load_dataset(segments_path);
        auto vq = load_vq(vq_path);
        char* csv = nullptr;
        check(lltn_analyze_punctuation(run.config_text.c_str(), data.get(), vq.get(), &csv), "punctuation analysis");
        run.write("punctuation.csv", take(csv));
      } else if (which == "affect-hist") {
        if (segments_path.empty() || affect_path.empty()) throw Failure("affect-hist needs --data and --affect");
        run.begin({"affect_hist.csv"});
        auto data = load_dataset(segments_path);
        const std::string affect = read_file(affect_path);
        char* csv = nullptr;
        check(lltn_analyze_affect_hist(run.config_text.c_str(), data.get(), affect.c_str(), k, &csv),
              "affect histogram");
        run.write("affect_hist.csv", take(csv));
      } else {
        run.begin({"history_sweep.json", "history_sweep.txt", "sweep_log.jsonl"});
        std::vector<double> hs;
        std::stringstream ss(history);
        for (std::string item; std::getline(ss, item, ',');) {
          try {
            hs.push_back(std::stod(item));
          } catch (const std::exception&) {
            throw Failure("--history: '" + item + "' is not a number");
          }
        }
        Vq vq = vq_path.empty() ? Vq() : load_vq(vq_path);
        StepLog log{std::ofstream(run.path("sweep_log.jsonl")), "sweep", 500};
        char* out = nullptr;
        check(lltn_analyze_history_sweep(run.config_text.c_str(), hs.data(), hs.size(), vq.get(), &StepLog::callback,
                                         &log, &out),
              "history sweep");
        const std::string result = take(out);
        run.write("history_sweep.json", result + "\n");
        json rows = json::array();
        for (const auto& p : json::parse(result)) {
          std::ostringstream label;
          label << "H=" << p.at("history_seconds").get<double>() << "s";
          rows.push_back({{"name", label.str()}, {"report", p.at("report")}});
        }
        char* table = nullptr;
        check(lltn_format_table(rows.dump().c_str(), &table), "formatting");
        const std::string text = take(table);
        run.write("history_sweep.txt", text);
        std::cout << text;
      }
    }
    run.finish(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "lltn %s: error: %s\n", run.command.c_str(), e.what());
    return 1;
  }
  return 0;
}
