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


// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Pass criterion numbers to run a subset.

#include "checks.hpp"
#include "support.hpp"

#include "lltn/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace lltn;
using namespace lltn::testing;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeeds[] = {1, 2, 3};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void progress(const std::string& line) { std::cerr << "  .. " << line << std::endl; }

RunConfig desk(std::uint64_t seed, std::vector<std::string> overrides = {}) {
  overrides.push_back("seed=" + std::to_string(seed));
  return run_config_from(resolve_config(LLTN_DESK_CONFIG, overrides));
}

LmProgress lm_progress(const std::string& tag) {
  return [tag](const LmStepLog& s) {
    if (s.step % 500 == 0) progress(fmt("%s step %d loss %.4f", tag.c_str(), s.step, s.loss));
  };
}

// Everything trained for one seed of the desk corpus, built on demand and
// shared between criteria.
struct SeedRun {
  RunConfig cfg;
  SynthCorpus corpus;
  std::optional<VqTrainResult> vq;
  std::optional<Vocabulary> vocab;
  std::map<std::string, LmTrainResult> lms;
  std::map<std::string, MetricsReport> reports;

  explicit SeedRun(std::uint64_t seed) : cfg(desk(seed)), corpus(generate_corpus(cfg.synth)) {}

  const VqParams& codec() {
    if (!vq) {
      progress(fmt("seed %llu: training VQ-VAE", static_cast<unsigned long long>(cfg.seed)));
      vq = train_vqvae(corpus.train.segments, cfg.vq, cfg.seed);
      vocab = build_vocabulary(corpus.train.segments, vq->params.codebook.size());
    }
    return vq->params;
  }

  // name is an ablation, or "warm" for Full started from text pretraining.
  const LmTrainResult& lm(const std::string& name) {
    if (auto it = lms.find(name); it != lms.end()) return it->second;
    const VqParams& v = codec();
    LmTrainOptions o;
    o.config = cfg.lm;
    o.interleave = cfg.interleave;
    o.ablation = name == "warm" ? Ablation::Full : ablation_from_string(name);
    std::optional<PretrainResult> pre;
    if (name == "warm") {
      progress(fmt("seed %llu: text pretraining", static_cast<unsigned long long>(cfg.seed)));
      pre = pretrain_text_lm(text_streams(*vocab, corpus.train.segments), *vocab, cfg.pretrain.apply(cfg.lm),
                             cfg.seed);
      o.init = &pre->params;
    }
    const std::string tag = fmt("seed %llu %s", static_cast<unsigned long long>(cfg.seed), name.c_str());
    return lms.emplace(name, train_lm(corpus.train.segments, v, *vocab, o, cfg.seed, lm_progress(tag)))
        .first->second;
  }

  const MetricsReport& report(const std::string& name) {
    if (auto it = reports.find(name); it != reports.end()) return it->second;
    const auto& model = lm(name).model;
    const auto pred = predict(model, codec(), corpus.test.segments, cfg.seed);
    return reports.emplace(name, evaluate(pred, corpus.test.segments, corpus.affect, &codec(), cfg.eval))
        .first->second;
  }
};

std::map<std::uint64_t, std::unique_ptr<SeedRun>> g_runs;

SeedRun& seed_run(std::uint64_t seed) {
  auto& r = g_runs[seed];
  if (!r) r = std::make_unique<SeedRun>(seed);
  return *r;
}

CheckResult all_of(std::initializer_list<CheckResult> parts) {
  CheckResult out;
  for (const auto& p : parts) {
    out.ok = out.ok && p.ok;
    if (!out.detail.empty()) out.detail += "; ";
    out.detail += p.detail;
  }
  return out;
}

// --- criteria ------------------------------------------------------------

CheckResult gradients() { return all_of({check_vq_gradients(20, 101), check_lm_gradients(20, 102)}); }

CheckResult causality() {
  return all_of({check_forward_causality(20, 201), check_generate_causality(20, 202)});
}

CheckResult quantizer() { return check_quantizer(1000, 301); }

CheckResult interleaving() { return check_interleaving(1000, 401); }

CheckResult fd_oracles() { return check_fd_oracles(501, 10000); }

CheckResult statistics() { return check_statistics_oracles(601); }

CheckResult vq_training() {
  SeedRun& run = seed_run(kSeeds[0]);
  run.codec();
  const auto& trace = run.vq->trace;
  if (trace.size() < 2000) return {false, fmt("VQ trace has %zu steps", trace.size())};
  // Trailing 100-step mean of the reconstruction loss.
  auto smoothed = [&](int step) {
    double s = 0;
    for (int i = step - 100; i < step; ++i) s += trace[static_cast<std::size_t>(i)].losses.reconstruct;
    return s / 100;
  };
  const double early = smoothed(100), late = smoothed(2000);
  int rises = 0;
  for (int step = 200; step <= 2000; step += 100) rises += smoothed(step) >= smoothed(step - 100);

  const MeanBaseline mean(run.corpus.train.segments);
  double vq_l2 = 0, mean_l2 = 0;
  for (const auto& seg : run.corpus.test.segments) {
    vq_l2 += l2_metric(decode(run.codec(), tokenize_motion(run.codec(), seg.listener)), seg.listener);
    mean_l2 += l2_metric(mean.generate(seg.length()), seg.listener);
  }
  const double ratio = vq_l2 / mean_l2;
  const double usage = codebook_usage(run.codec(), run.corpus.train.segments);
  const bool ok = late < early && ratio <= 0.25 && usage >= 0.5;
  return {ok, fmt("smoothed recon %.4f -> %.4f (%d/19 rising 100-step blocks), L2 ratio vs mean %.3f, "
                  "codebook usage %.2f",
                  early, late, rises, ratio, usage)};
}

CheckResult text_ordering() {
  int wins = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    SeedRun& run = seed_run(seed);
    const auto& full = run.report("full");
    const auto& uncond = run.report("uncond");
    const auto& fixtok = run.report("fixtok");
    const bool win = full.l2_affect.value < uncond.l2_affect.value && full.l2_affect.value < fixtok.l2_affect.value &&
                     full.fd_expression.value < uncond.fd_expression.value &&
                     full.fd_expression.value < fixtok.fd_expression.value;
    wins += win;
    detail += fmt("seed %llu %s: L2-Aff full/uncond/fixtok %.1f/%.1f/%.1f, FD-expr %.2f/%.2f/%.2f; ",
                  static_cast<unsigned long long>(seed), win ? "yes" : "no", full.l2_affect.value,
                  uncond.l2_affect.value, fixtok.l2_affect.value, full.fd_expression.value,
                  uncond.fd_expression.value, fixtok.fd_expression.value);
  }
  return {wins >= 2, detail + fmt("%d/3 seeds", wins)};
}

CheckResult punctuation() {
  int wins = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    SeedRun& run = seed_run(seed);
    const auto& punc = run.report("fixtok-punc");
    const auto& plain = run.report("fixtok");
    if (!punc.pfd || !plain.pfd) return {false, "P-FD missing (no speaker motion)"};
    const bool win = punc.pfd->value < plain.pfd->value && punc.fd_pose.value < plain.fd_pose.value;
    wins += win;
    detail += fmt("seed %llu %s: P-FD punc/plain %.3f/%.3f, FD-pose %.4f/%.4f; ",
                  static_cast<unsigned long long>(seed), win ? "yes" : "no", punc.pfd->value, plain.pfd->value,
                  punc.fd_pose.value, plain.fd_pose.value);
  }
  return {wins >= 2, detail + fmt("%d/3 seeds", wins)};
}

CheckResult history() {
  int wins = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    const RunConfig cfg = desk(seed, {"synth.lag_frames=60"});
    progress(fmt("history sweep, seed %llu", static_cast<unsigned long long>(seed)));
    const auto points =
        history_sweep(cfg, {0.0, 2.0}, nullptr, lm_progress(fmt("sweep %llu", static_cast<unsigned long long>(seed))));
    const double h0 = points[0].report.l2_affect.value, h2 = points[1].report.l2_affect.value;
    wins += h2 < h0;
    detail += fmt("seed %llu: L2-Aff H=0 %.2f, H=2 %.2f; ", static_cast<unsigned long long>(seed), h0, h2);
  }
  return {wins >= 2, detail + fmt("%d/3 seeds", wins)};
}

CheckResult warm_start() {
  int wins = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    SeedRun& run = seed_run(seed);
    const auto& cold = run.lm("full");
    const auto& warm = run.lm("warm");
    auto head_mean = [](const std::vector<LmStepLog>& t) {
      double s = 0;
      const std::size_t n = std::min<std::size_t>(100, t.size());
      for (std::size_t i = 0; i < n; ++i) s += t[i].loss;
      return s / static_cast<double>(n);
    };
    const double c0 = cold.trace.front().loss, w0 = warm.trace.front().loss;
    const double ca = run.report("full").l2_affect.value, wa = run.report("warm").l2_affect.value;
    const bool win = w0 < c0 && wa <= ca;
    wins += win;
    detail += fmt("seed %llu %s: step-0 loss warm/random %.4f/%.4f (first-100 mean %.3f/%.3f), "
                  "L2-Aff %.1f/%.1f; ",
                  static_cast<unsigned long long>(seed), win ? "yes" : "no", w0, c0, head_mean(warm.trace),
                  head_mean(cold.trace), wa, ca);
  }
  return {wins >= 2, detail + fmt("%d/3 seeds", wins)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the same CLI pipeline in two directories and compares every output.
CheckResult cli_determinism() {
  const fs::path root = fs::temp_directory_path() / fmt("lltn_accept_%d", static_cast<int>(getpid()));
  fs::remove_all(root);
  const std::vector<std::string> steps{
      "synth --out d",
      "train-vqvae --train d/train.jsonl --out v",
      "pretrain-text --train d/train.jsonl --vq v/vq.lltn --out p",
      "train-lm --train d/train.jsonl --vq v/vq.lltn --init p/lm_text.lltn --out m",
      "generate --model m/lm.lltn --vq v/vq.lltn --segments d/test.jsonl --out g",
      "evaluate --predictions g/predictions.jsonl --truth d/test.jsonl --affect d/affect.json --vq v/vq.lltn --out e",
      "baseline random-train --train d/train.jsonl --segments d/test.jsonl --out b1",
      "baseline random-vq --train d/train.jsonl --segments d/test.jsonl --vq v/vq.lltn --out b2",
      "baseline mean --train d/train.jsonl --segments d/test.jsonl --out b3",
      "baseline nn --train d/train.jsonl --segments d/test.jsonl --set nn.min_frames=24 --out b4",
      "baseline uncond --train d/train.jsonl --segments d/test.jsonl --vq v/vq.lltn --out b5",
      "ablate nopt --train d/train.jsonl --segments d/test.jsonl --vq v/vq.lltn --out a1",
      "ablate unaligned --train d/train.jsonl --segments d/test.jsonl --vq v/vq.lltn --init p/lm_text.lltn --out a2",
      "ablate scrambled --train d/train.jsonl --segments d/test.jsonl --vq v/vq.lltn --out a3",
      "ablate fixtok --train d/train.jsonl --segments d/test.jsonl --vq v/vq.lltn --out a4",
      "ablate fixtok-punc --train d/train.jsonl --segments d/test.jsonl --vq v/vq.lltn --out a5",
      "analyze punctuation --data d/train.jsonl --vq v/vq.lltn --out n1",
      "analyze affect-hist --data d/train.jsonl --affect d/affect.json --k 20 --out n2",
      "analyze history-sweep --vq v/vq.lltn --history 0,2 --out n3",
  };
  for (const char* run : {"a", "b"}) {
    const fs::path dir = root / run;
    fs::create_directories(dir);
    fs::copy_file(LLTN_TINY_CONFIG, dir / "tiny.json");
    for (const auto& s : steps) {
      const std::string cmd = "cd '" + dir.string() + "' && '" LLTN_CLI_PATH "' " + s +
                              " --config tiny.json >> cli.log 2>&1";
      if (std::system(cmd.c_str()) != 0) return {false, "command failed: lltn " + s + " (see " + dir.string() + ")"};
    }
  }
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file() || e.path().filename() == "cli.log") continue;
    const fs::path rel = fs::relative(e.path(), root / "a");
    const fs::path other = root / "b" / rel;
    if (!fs::exists(other)) return {false, "missing in second run: " + rel.string()};
    ++files;
    if (e.path().filename() == "manifest.json") {
      auto ja = nlohmann::json::parse(slurp(e.path())), jb = nlohmann::json::parse(slurp(other));
      ja.erase("wall_time_seconds");
      jb.erase("wall_time_seconds");
      if (ja != jb) return {false, "manifest differs: " + rel.string()};
      continue;
    }
    if (slurp(e.path()) != slurp(other)) return {false, "output differs between runs: " + rel.string()};
  }
  fs::remove_all(root);
  return {true, fmt("%zu commands, %d files identical across two runs", steps.size(), files)};
}

CheckResult plumbing() {
  return all_of({check_round_trips(1201), check_corruption_rate(1202, 200000), cli_determinism()});
}

struct Criterion {
  int id;
  const char* name;
  std::function<CheckResult()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradients},
      {2, "causality", causality},
      {3, "quantizer vs brute force", quantizer},
      {4, "interleaving properties", interleaving},
      {5, "Frechet distance oracles", fd_oracles},
      {6, "statistics oracles", statistics},
      {7, "VQ-VAE desk training", vq_training},
      {8, "text conditioning beats Uncond and FixTok", text_ordering},
      {9, "punctuation lowers P-FD and pose FD", punctuation},
      {10, "speaker history helps with lagged reactions", history},
      {11, "text pretraining warm start", warm_start},
      {12, "plumbing and CLI determinism", plumbing},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string line =
        fmt("%s %2d %s (%.1f s): ", r.ok ? "PASS" : "FAIL", c.id, c.name, secs) + r.detail;
    std::cout << line << std::endl;
    failed += !r.ok;
  }
  std::cout << (failed ? fmt("%d criteria FAILED", failed) : std::string("all criteria passed")) << std::endl;
  return failed ? 1 : 0;
}
