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

#include "checks.hpp"

#include "support.hpp"

#include "lltn/dataset.hpp"
#include "lltn/interleave.hpp"
#include "lltn/lm.hpp"
#include "lltn/metrics.hpp"
#include "lltn/vq.hpp"

#include <Eigen/Eigenvalues>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace lltn::testing {

namespace {

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

constexpr double kGradTol = 1e-4;

LmConfig micro_lm(Rng& rng) {
  LmConfig c;
  c.layers = 1 + uniform_int(rng, 0, 1);
  c.heads = 1 + uniform_int(rng, 0, 1);
  c.model_dim = 4 * c.heads;
  c.ffn_multiplier = 2;
  c.max_positions = 16;
  c.init_std = 0.4;
  return c;
}

/// LayerNorm gains and biases start at 1/0; jitter them so their gradients
/// are generic.
void jitter_norms(LmParams& p, Rng& rng) {
  auto j = [&](nn::LayerNorm& ln) {
    ln.gain = (ln.gain.array() + random_mat(rng, 1, ln.gain.cols(), 0.3).array()).matrix();
    ln.bias = random_mat(rng, 1, ln.bias.cols(), 0.3);
  };
  for (auto& b : p.blocks) {
    j(b.ln1);
    j(b.ln2);
    b.qkv.bias = random_mat(rng, 1, b.qkv.bias.cols(), 0.1);
    b.fc.bias = random_mat(rng, 1, b.fc.bias.cols(), 0.1);
  }
  j(p.final_norm);
}

Vocabulary word_vocab(int words, int codebook) {
  std::vector<std::string> w;
  for (int i = 0; i < words; ++i) w.push_back("w" + std::to_string(i));
  w.push_back(".");
  w.push_back(",");
  return Vocabulary(w, codebook);
}

}  // namespace

CheckResult check_vq_gradients(int instances, std::uint64_t seed) {
  Rng rng(seed);
  CheckResult res;
  double worst = 0;
  long coords = 0;
  for (int k = 0; k < instances; ++k) {
    VqConfig c;
    c.codebook_size = 4 + uniform_int(rng, 0, 4);
    c.embed_dim = 2 + uniform_int(rng, 0, 2);
    c.downsample_levels = 1 + uniform_int(rng, 0, 1);
    c.channel_width = 3 + uniform_int(rng, 0, 2);
    c.embed_weight = 0.02 + uniform01(rng);
    c.velocity_weight = uniform01(rng);
    const int D = 3 + uniform_int(rng, 0, 3);
    VqParams p = make_vq_params(c, D, rng());
    p.codebook.embeddings = random_mat(rng, c.codebook_size, c.embed_dim, 0.5);
    // Zero biases put ReLU inputs exactly on the kink wherever a window is dead.
    for (auto& t : p.trainable()) *t.value += random_mat(rng, t.value->rows(), t.value->cols(), 0.05);
    const int r = p.frames_per_token();
    std::vector<Mat> batch;
    const int B = 1 + uniform_int(rng, 0, 2);
    for (int b = 0; b < B; ++b) batch.push_back(random_mat(rng, r * (1 + uniform_int(rng, 0, 2)), D, 1.5));
    const auto offsets = quantization_offsets(p, batch);
    VqParams g = zeros_like(p);
    vq_losses(p, batch, &g);  // straight-through path
    const auto rep =
        check_gradients(p.trainable(), g.trainable(),
                        [&] { return vq_losses(p, batch, nullptr, &offsets).losses.total; }, rng);
    coords += rep.checked;
    if (rep.max_error > worst) worst = rep.max_error;
    if (rep.max_error > kGradTol) {
      res.ok = false;
      res.detail = "instance " + std::to_string(k) + " " + rep.worst + fmt(" rel err %.3g", rep.max_error);
      return res;
    }
  }
  res.detail = std::to_string(instances) + " instances, " + std::to_string(coords) + " coordinates, max rel err " +
               fmt("%.2g", worst);
  return res;
}

CheckResult check_lm_gradients(int instances, std::uint64_t seed) {
  Rng rng(seed);
  CheckResult res;
  double worst = 0;
  long coords = 0;
  for (int k = 0; k < instances; ++k) {
    const LmConfig c = micro_lm(rng);
    const int text_vocab = 5 + uniform_int(rng, 0, 3), codes = 3 + uniform_int(rng, 0, 3);
    const Head head = k % 2 == 0 ? Head::Motion : Head::Text;
    LmParams p = make_lm_params(c, text_vocab, codes, head == Head::Text, rng());
    jitter_norms(p, rng);
    const int n = 3 + uniform_int(rng, 0, c.max_positions - 3);
    std::vector<int> input(static_cast<std::size_t>(n));
    for (auto& id : input) id = uniform_int(rng, 0, text_vocab + codes - 1);
    std::vector<LossTarget> targets;
    for (int row = 0; row < n; ++row)
      if (uniform01(rng) < 0.6)
        targets.push_back({row, uniform_int(rng, 0, (head == Head::Text ? text_vocab : codes) - 1)});
    if (targets.empty()) targets.push_back({n - 1, 0});
    LmParams g = zeros_like(p);
    cross_entropy_loss(p, input, targets, head, &g);
    const auto rep = check_gradients(p.collect(), g.collect(),
                                     [&] { return cross_entropy_loss(p, input, targets, head); }, rng);
    coords += rep.checked;
    if (rep.max_error > worst) worst = rep.max_error;
    if (rep.max_error > kGradTol) {
      res.ok = false;
      res.detail = "instance " + std::to_string(k) + " " + rep.worst + fmt(" rel err %.3g", rep.max_error);
      return res;
    }
  }
  res.detail = std::to_string(instances) + " instances, " + std::to_string(coords) + " coordinates, max rel err " +
               fmt("%.2g", worst);
  return res;
}

CheckResult check_forward_causality(int instances, std::uint64_t seed) {
  Rng rng(seed);
  CheckResult res;
  double worst = 0;
  for (int k = 0; k < instances; ++k) {
    LmConfig c = micro_lm(rng);
    c.max_positions = 24;
    c.init_std = 0.2;
    const int tv = 8, codes = 6;
    const LmParams p = make_lm_params(c, tv, codes, false, rng());
    const int n = 4 + uniform_int(rng, 0, 19);
    std::vector<int> input(static_cast<std::size_t>(n));
    for (auto& id : input) id = uniform_int(rng, 0, tv + codes - 1);
    const Mat base = forward(p, input);
    const int cut = uniform_int(rng, 0, n - 2);
    auto changed = input;
    for (int i = cut + 1; i < n; ++i) changed[static_cast<std::size_t>(i)] = uniform_int(rng, 0, tv + codes - 1);
    const Mat other = forward(p, changed);
    const double d = (base.topRows(cut + 1) - other.topRows(cut + 1)).cwiseAbs().maxCoeff();
    worst = std::max(worst, d);
    if (d > 1e-12) {
      res.ok = false;
      res.detail = "instance " + std::to_string(k) + fmt(": rows <= %g moved by %.3g", cut, d);
      return res;
    }
  }
  res.detail = std::to_string(instances) + " instances, max change " + fmt("%.2g", worst);
  return res;
}

CheckResult check_generate_causality(int instances, std::uint64_t seed) {
  Rng rng(seed);
  CheckResult res;
  for (int k = 0; k < instances; ++k) {
    ListenerModel m;
    LmConfig c = micro_lm(rng);
    c.max_positions = 64;
    c.init_std = 0.5;
    m.vocab = word_vocab(10, 6);
    m.params = make_lm_params(c, m.vocab.text_size(), 6, false, rng());
    m.interleave.frames_per_token = 4;
    m.interleave.max_tokens = 40 + uniform_int(rng, 0, 23);
    const int n = 3 + uniform_int(rng, 0, 8);
    std::vector<TimedToken> words, hist;
    const int nw = uniform_int(rng, 0, 2 * n);
    std::vector<int> frames;
    for (int i = 0; i < nw; ++i) frames.push_back(uniform_int(rng, 1, 4 * n));
    std::sort(frames.begin(), frames.end());
    for (int f : frames) words.push_back({m.vocab.words()[static_cast<std::size_t>(uniform_int(rng, 1, 12))], f});
    const int nh = uniform_int(rng, 0, 8);
    for (int i = 0; i < nh; ++i) hist.push_back({"w" + std::to_string(uniform_int(rng, 0, 9)), -20 + i});
    const auto full = generate(m, hist, words, n);
    for (int kk = 1; kk <= n; ++kk) {
      std::vector<TimedToken> early;
      for (const auto& w : words)
        if (w.end_frame <= 4 * kk) early.push_back(w);
      const auto cut = generate(m, hist, early, n);
      for (int i = 0; i < kk; ++i) {
        if (cut.tokens[static_cast<std::size_t>(i)] != full.tokens[static_cast<std::size_t>(i)]) {
          res.ok = false;
          res.detail = "instance " + std::to_string(k) + ": token " + std::to_string(i) + " changed when words after " +
                       std::to_string(4 * kk) + " were removed";
          return res;
        }
      }
    }
  }
  res.detail = std::to_string(instances) + " instances, every prefix length";
  return res;
}

CheckResult check_quantizer(int vectors, std::uint64_t seed) {
  Rng rng(seed);
  Codebook cb(64, 8);
  cb.embeddings = random_mat(rng, 64, 8);
  for (int j = 40; j < 48; ++j) cb.embeddings.row(j) = cb.embeddings.row(j - 40);  // exact ties
  int ties = 0;
  for (int i = 0; i < vectors; ++i) {
    RowVec z = random_mat(rng, 1, 8);
    if (i % 5 == 0) {
      z = cb.embeddings.row(uniform_int(rng, 40, 47));
      ++ties;
    }
    int best = 0;
    double bd = (cb.embeddings.row(0) - z).squaredNorm();
    for (int j = 1; j < cb.size(); ++j) {
      const double d = (cb.embeddings.row(j) - z).squaredNorm();
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    const int got = quantize(cb, z);
    if (got != best)
      return {false, "vector " + std::to_string(i) + ": got " + std::to_string(got) + ", brute force " +
                         std::to_string(best)};
  }
  return {true, std::to_string(vectors) + " vectors (" + std::to_string(ties) + " exact ties)"};
}

CheckResult check_interleaving(int segments, std::uint64_t seed) {
  Rng rng(seed);
  const Vocabulary vocab = word_vocab(50, 32);
  InterleaveConfig cfg;
  cfg.max_tokens = 480;
  InterleaveConfig unlimited = cfg;
  unlimited.max_tokens = 1 << 20;
  const int r = cfg.frames_per_token;
  int truncated = 0;
  auto fail = [](int s, const std::string& why) { return CheckResult{false, "segment " + std::to_string(s) + ": " + why}; };
  for (int s = 0; s < segments; ++s) {
    const int n = 3 + uniform_int(rng, 0, 27);  // 24..240 frames
    MotionTokenSequence motion;
    motion.frames_per_token = r;
    for (int t = 0; t < n; ++t) motion.tokens.push_back(uniform_int(rng, 0, 31));
    std::vector<TimedToken> words, hist;
    // Word density varies a lot so that some streams overflow the budget.
    const int nw = uniform_int(rng, 0, uniform01(rng) < 0.3 ? 500 : 60);
    std::vector<int> frames;
    for (int i = 0; i < nw; ++i) frames.push_back(uniform_int(rng, 1, r * n));
    std::sort(frames.begin(), frames.end());
    for (int f : frames) words.push_back({vocab.words()[static_cast<std::size_t>(uniform_int(rng, 1, 52))], f});
    const int nh = uniform_int(rng, 0, uniform01(rng) < 0.3 ? 400 : 40);
    for (int i = 0; i < nh; ++i) hist.push_back({"w" + std::to_string(uniform_int(rng, 0, 49)), -nh + i + 1});

    const auto seq = assemble(vocab, hist, words, motion, cfg);
    const auto all = assemble(vocab, hist, words, motion, unlimited);
    if (seq.size() > 480) return fail(s, "stream has " + std::to_string(seq.size()) + " tokens");
    if (seq.size() != std::min<std::size_t>(all.size(), 480)) return fail(s, "dropped more than needed");
    int t = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (seq.kinds[i] == TokenKind::Motion) {
        ++t;
        if (i == 0 || seq.kinds[i - 1] != TokenKind::Space || seq.ids[i - 1] != vocab.space_id())
          return fail(s, "motion token without a preceding SPACE");
        if (seq.ids[i] != vocab.motion_id(motion.tokens[static_cast<std::size_t>(t - 1)]))
          return fail(s, "motion tokens reordered");
        for (std::size_t j = 0; j < i; ++j)
          if (is_text(seq.kinds[j]) && seq.frames[j] > r * t) return fail(s, "text placed before its motion token");
      }
    }
    if (t != n) return fail(s, "motion tokens dropped");
    // Truncation: kept history and kept words are suffixes; words go only
    // after the whole history is gone.
    std::vector<int> kh, ks, ah, as;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (seq.kinds[i] == TokenKind::HistoryText) kh.push_back(seq.ids[i]);
      if (seq.kinds[i] == TokenKind::SegmentText) ks.push_back(seq.ids[i]);
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (all.kinds[i] == TokenKind::HistoryText) ah.push_back(all.ids[i]);
      if (all.kinds[i] == TokenKind::SegmentText) as.push_back(all.ids[i]);
    }
    if (!std::equal(kh.rbegin(), kh.rend(), ah.rbegin())) return fail(s, "history not truncated oldest first");
    if (!std::equal(ks.rbegin(), ks.rend(), as.rbegin())) return fail(s, "words not truncated from the front");
    if (ks.size() < as.size() && !kh.empty()) return fail(s, "words dropped while history remained");
    if (seq.size() < all.size()) ++truncated;
  }
  return {true, std::to_string(segments) + " segments (" + std::to_string(truncated) + " truncated)"};
}

namespace {

// Closed form through the eigenvalues of s1 s2, which are real and >= 0.
double gaussian_fd(const RowVec& m1, const Mat& s1, const RowVec& m2, const Mat& s2) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(s1 * s2), false);
  double tr = 0;
  for (Eigen::Index i = 0; i < s1.rows(); ++i) tr += std::sqrt(std::max(0.0, es.eigenvalues()[i].real()));
  return (m1 - m2).squaredNorm() + s1.trace() + s2.trace() - 2 * tr;
}

}  // namespace

CheckResult check_fd_oracles(std::uint64_t seed, int samples) {
  Rng rng(seed);
  CheckResult res;
  // FD(S, S) in both the covariance and the sample-space regime.
  for (auto [rows, cols] : {std::pair{200, 6}, std::pair{30, 90}}) {
    const Mat s = random_mat(rng, rows, cols);
    const double fd = frechet_distance(s, s);
    if (!(fd <= 1e-8)) return {false, fmt("FD(S,S) = %.3g for %g samples", fd, rows)};
  }
  // Sample-space shortcut agrees with the unregularized closed form.
  {
    const Mat a = random_mat(rng, 20, 40), b = random_mat(rng, 25, 40, 1.3);
    RowVec ma, mb;
    Mat ca, cb;
    mean_cov(a, ma, ca);
    mean_cov(b, mb, cb);
    const double direct = gaussian_fd(ma, ca, mb, cb), fast = frechet_distance(a, b);
    if (std::abs(direct - fast) > 1e-6 * std::max(1.0, direct))
      return {false, fmt("sample-space FD %.10g vs closed form %.10g", fast, direct)};
  }
  // Gaussian closed form: ||mu1 - mu2||^2 + tr S1 + tr S2 - 2 sum sqrt(eig(S1 S2)).
  const int d = 4;
  auto spd = [&](double scale) {
    const Mat a = random_mat(rng, d, d, scale);
    return Mat(a * a.transpose() + 0.2 * Mat::Identity(d, d));
  };
  auto sample = [&](const RowVec& mu, const Mat& cov) {
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Mat l = llt.matrixL();
    Mat z = random_mat(rng, samples, d);
    Mat x = z * l.transpose();
    x.rowwise() += mu;
    return x;
  };
  RowVec mu5 = RowVec::Zero(d);
  mu5[0] = 3;
  mu5[1] = 4;  // ||mu||^2 = 25
  struct Case {
    RowVec m1;
    Mat s1;
    RowVec m2;
    Mat s2;
  };
  std::vector<Case> cases{{RowVec::Zero(d), Mat::Identity(d, d), mu5, Mat::Identity(d, d)},
                          {RowVec::Zero(d), Mat::Identity(d, d), RowVec::Zero(d), 4 * Mat::Identity(d, d)},
                          {RowVec::Zero(d), spd(1.0), mu5, spd(1.5)},
                          {random_mat(rng, 1, d), spd(0.5), random_mat(rng, 1, d), spd(2.0)}};
  std::string summary;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const double want = gaussian_fd(c.m1, c.s1, c.m2, c.s2);
    const double got = frechet_distance(sample(c.m1, c.s1), sample(c.m2, c.s2));
    const double rel = std::abs(got - want) / want;
    summary += fmt(" %.3g/%.3g", got, want);
    if (rel > 0.05) return {false, "case " + std::to_string(i) + fmt(": FD %.4g vs closed form %.4g", got, want)};
  }
  // Square roots of random SPD matrices.
  double worst = 0;
  for (int k = 0; k < 20; ++k) {
    const int n = 2 + uniform_int(rng, 0, 38);
    const Mat a = random_mat(rng, n, n);
    const Mat s = a * a.transpose() + 1e-3 * Mat::Identity(n, n);
    const Mat root = sqrt_psd(s);
    worst = std::max(worst, (root * root - s).norm() / s.norm());
  }
  if (worst > 1e-6) return {false, fmt("matrix sqrt reconstruction error %.3g", worst)};
  res.detail = "FD/closed form" + summary + fmt("; sqrt err %.2g", worst);
  return res;
}

CheckResult check_statistics_oracles(std::uint64_t seed) {
  Rng rng(seed);
  // Bootstrap SE of a mean of n standard normals is ~1/sqrt(n).
  const int n = 400;
  std::vector<double> xs(n);
  for (auto& x : xs) x = normal(rng);
  const double se = bootstrap_se(xs, 10000, seed);
  const double want = 1 / std::sqrt(static_cast<double>(n));
  if (std::abs(se - want) / want > 0.15) return {false, fmt("bootstrap SE %.4g vs %.4g", se, want)};

  // Diversity: mean over random pairs vs the all-pairs mean.
  double worst = 0;
  for (int k = 0; k < 5; ++k) {
    const int T = 2 + uniform_int(rng, 0, 8);
    const MotionSequence m(random_mat(rng, T, 6));
    double all = 0;
    int pairs = 0;
    for (int i = 0; i < T; ++i)
      for (int j = 0; j < T; ++j)
        if (i != j) {
          all += (m.frames.row(i) - m.frames.row(j)).norm();
          ++pairs;
        }
    all /= pairs;
    double est = 0;
    const int reps = 4000;
    Rng drng(seed + static_cast<std::uint64_t>(k));
    for (int r = 0; r < reps; ++r) est += diversity(m, drng, 30);
    est /= reps;
    worst = std::max(worst, std::abs(est - all) / all);
  }
  if (worst > 0.02) return {false, fmt("diversity off the all-pairs mean by %.3g", worst)};

  // Shannon index: 0 for one code, ln V for a uniform histogram.
  MotionTokenSequence one, uniform;
  one.tokens.assign(50, 3);
  for (int v = 0; v < 64; ++v) uniform.tokens.insert(uniform.tokens.end(), 3, v);
  const double h0 = shannon_index({one}), hu = shannon_index({uniform});
  if (h0 != 0.0 || std::abs(hu - std::log(64.0)) > 1e-12)
    return {false, fmt("Shannon degenerate %.3g, uniform %.12g", h0, hu)};
  return {true, fmt("bootstrap SE %.4f vs %.4f; diversity rel err %.2g; Shannon exact", se, want, worst)};
}

CheckResult check_round_trips(std::uint64_t seed) {
  Rng rng(seed);
  TempDir dir("roundtrip");
  // LM weights.
  LmConfig c;
  c.layers = 2;
  c.model_dim = 16;
  c.heads = 2;
  c.max_positions = 32;
  LmParams p = make_lm_params(c, 12, 7, true, seed);
  nn::round_to_float(p.collect());
  export_checkpoint(p, dir.file("lm.lltn"));
  LmParams q = zeros_like(p);
  import_checkpoint(dir.file("lm.lltn"), q);
  auto pl = p.collect(), ql = q.collect();
  for (std::size_t i = 0; i < pl.size(); ++i)
    if (pl[i].name != ql[i].name || !(*pl[i].value == *ql[i].value)) return {false, "LM tensor " + pl[i].name + " differs"};
  // Wrong shapes are rejected.
  LmConfig other = c;
  other.model_dim = 8;
  LmParams wrong = make_lm_params(other, 12, 7, true, seed);
  try {
    import_checkpoint(dir.file("lm.lltn"), wrong);
    return {false, "import accepted a shape mismatch"};
  } catch (const Error&) {
  }
  // Listener model with vocabulary.
  ListenerModel m;
  m.vocab = Vocabulary({"a", "b", "."}, 7);
  m.params = make_lm_params(c, m.vocab.text_size(), 7, false, seed + 1);
  nn::round_to_float(m.params.collect());
  m.ablation = Ablation::FixTokPunc;
  save_listener(m, dir.file("model.lltn"));
  ListenerModel back = load_listener(dir.file("model.lltn"));
  if (!(back.vocab == m.vocab) || back.ablation != m.ablation) return {false, "listener metadata differs"};
  auto ml = m.params.collect(), bl = back.params.collect();
  for (std::size_t i = 0; i < ml.size(); ++i)
    if (!(*ml[i].value == *bl[i].value)) return {false, "listener tensor " + ml[i].name + " differs"};
  // Byte-identical re-export.
  save_listener(back, dir.file("again.lltn"));
  auto bytes = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  if (bytes(dir.file("model.lltn")) != bytes(dir.file("again.lltn"))) return {false, "re-export not byte identical"};

  // Dataset.
  Dataset ds;
  ds.expression_dim = 3;
  for (int i = 0; i < 3; ++i) {
    DyadSegment s;
    s.id = "s/turn" + std::to_string(i);
    s.listener = MotionSequence(random_mat(rng, 30 + i, 6));
    if (i != 1) s.speaker = MotionSequence(random_mat(rng, 30 + i, 6));
    s.words = {{"hi", 2}, {"there", 30}};
    s.history_words = {{"so", -3}};
    ds.segments.push_back(s);
  }
  save_dataset(ds, dir.file("d.jsonl"));
  if (!(load_dataset(dir.file("d.jsonl")) == ds)) return {false, "dataset differs after reload"};
  save_dataset(load_dataset(dir.file("d.jsonl")), dir.file("d2.jsonl"));
  if (bytes(dir.file("d.jsonl")) != bytes(dir.file("d2.jsonl"))) return {false, "dataset re-save not byte identical"};
  return {true, "LM, listener and dataset round trips exact"};
}

CheckResult check_corruption_rate(std::uint64_t seed, int tokens) {
  const int V = 16;
  const Vocabulary vocab({"a"}, V);
  InterleavedSequence seq;
  Rng gen(seed);
  for (int i = 0; i < tokens; ++i) {
    seq.push(vocab.space_id(), TokenKind::Space, 8 * (i + 1));
    seq.push(vocab.motion_id(uniform_int(gen, 0, V - 1)), TokenKind::Motion, 8 * (i + 1));
  }
  std::string summary;
  for (double p : {0.0, 0.5, 1.0}) {
    Rng rng = counter_stream(seed, static_cast<std::uint64_t>(p * 10));
    const auto c = corrupt_motion_tokens(seq, vocab, p, rng);
    long changed = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (c.target[i] != seq.ids[i]) return {false, "targets were modified"};
      if (seq.kinds[i] != TokenKind::Motion && c.input[i] != seq.ids[i]) return {false, "non-motion token corrupted"};
      if (c.input[i] != seq.ids[i]) ++changed;
    }
    // A replacement draws the original code again with probability 1/V.
    const double want = p * (1.0 - 1.0 / V);
    const double got = static_cast<double>(changed) / tokens;
    const double sd = std::sqrt(want * (1 - want) / tokens);
    if (std::abs(got - want) > 5 * sd + 1e-12) return {false, fmt("p=%.1f: changed rate %.4f, expected %.4f", p, got, want)};
    summary += fmt(" p=%.1f:%.4f", p, got);
  }
  return {true, "changed rate" + summary};
}

}  // namespace lltn::testing
