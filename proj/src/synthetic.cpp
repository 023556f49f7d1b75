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

#include "lltn/synthetic.hpp"

#include "lltn/interleave.hpp"
#include "lltn/rng.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace lltn {

using nlohmann::json;

namespace {

constexpr int kPitch = 0;  // rotation column holding pitch
constexpr int kYaw = 1;
constexpr int kRoll = 2;

bool is_end_mark(const std::string& t) { return t == "." || t == "!" || t == "?"; }

}  // namespace

void SynthConfig::validate() const {
  if (positive_words.empty() || negative_words.empty() || neutral_words.empty())
    throw InvariantError("synth config: degenerate vocabulary (positive, negative and neutral words are required)");
  std::set<std::string> seen;
  for (const auto* list : {&positive_words, &negative_words, &neutral_words, &conjunctions})
    for (const auto& w : *list) {
      if (w.empty() || tokenize_text(w) != std::vector<std::string>{w})
        throw InvariantError("synth config: '" + w + "' is not a single lowercase word");
      if (!seen.insert(w).second) throw InvariantError("synth config: word '" + w + "' listed twice");
    }
  auto prob = [](double p, const char* name) {
    if (!(p >= 0 && p <= 1)) throw InvariantError(std::string("synth config: ") + name + " must be in [0, 1]");
  };
  prob(kappa, "kappa");
  prob(rho, "rho");
  prob(affect_smoothing, "affect_smoothing");
  if (!(noise >= 0)) throw InvariantError("synth config: noise must be >= 0");
  if (expression_dim < 3) throw InvariantError("synth config: expression_dim must be >= 3");
  if (fps <= 0 || words_per_second <= 0) throw InvariantError("synth config: rates must be positive");
  if (lag_frames < 0 || nod_frames <= 0 || nod_delay_frames < 0)
    throw InvariantError("synth config: frame counts must be non-negative");
  if (train_sessions < 1 || val_sessions < 0 || test_sessions < 0 || turns_per_session < 1)
    throw InvariantError("synth config: session counts");
  if (min_turn_frames < 1 || max_turn_frames < min_turn_frames)
    throw InvariantError("synth config: turn lengths");
  segmentation.validate();
}

json to_json(const SynthConfig& c) {
  return {{"positive_words", c.positive_words},
          {"negative_words", c.negative_words},
          {"neutral_words", c.neutral_words},
          {"conjunctions", c.conjunctions},
          {"expression_dim", c.expression_dim},
          {"fps", c.fps},
          {"kappa", c.kappa},
          {"lag_frames", c.lag_frames},
          {"affect_amplitude", c.affect_amplitude},
          {"affect_smoothing", c.affect_smoothing},
          {"rho", c.rho},
          {"nod_amplitude", c.nod_amplitude},
          {"nod_frames", c.nod_frames},
          {"nod_delay_frames", c.nod_delay_frames},
          {"noise", c.noise},
          {"words_per_second", c.words_per_second},
          {"train_sessions", c.train_sessions},
          {"val_sessions", c.val_sessions},
          {"test_sessions", c.test_sessions},
          {"turns_per_session", c.turns_per_session},
          {"min_turn_frames", c.min_turn_frames},
          {"max_turn_frames", c.max_turn_frames},
          {"segmentation",
           {{"min_frames", c.segmentation.min_frames},
            {"max_frames", c.segmentation.max_frames},
            {"min_onset_seconds", c.segmentation.min_onset_seconds},
            {"history_seconds", c.segmentation.history_seconds}}},
          {"seed", c.seed}};
}

SynthConfig synth_config_from(const json& j) {
  SynthConfig c;
  static const std::set<std::string> known{
      "positive_words", "negative_words",   "neutral_words",   "conjunctions",     "expression_dim",
      "fps",            "kappa",            "lag_frames",      "affect_amplitude", "affect_smoothing",
      "rho",            "nod_amplitude",    "nod_frames",      "nod_delay_frames", "noise",
      "words_per_second", "train_sessions", "val_sessions",    "test_sessions",    "turns_per_session",
      "min_turn_frames", "max_turn_frames", "segmentation",    "seed"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ParseError("synth config: unknown key '" + k + "'");
  c.positive_words = j.value("positive_words", c.positive_words);
  c.negative_words = j.value("negative_words", c.negative_words);
  c.neutral_words = j.value("neutral_words", c.neutral_words);
  c.conjunctions = j.value("conjunctions", c.conjunctions);
  c.expression_dim = j.value("expression_dim", c.expression_dim);
  c.fps = j.value("fps", c.fps);
  c.kappa = j.value("kappa", c.kappa);
  c.lag_frames = j.value("lag_frames", c.lag_frames);
  c.affect_amplitude = j.value("affect_amplitude", c.affect_amplitude);
  c.affect_smoothing = j.value("affect_smoothing", c.affect_smoothing);
  c.rho = j.value("rho", c.rho);
  c.nod_amplitude = j.value("nod_amplitude", c.nod_amplitude);
  c.nod_frames = j.value("nod_frames", c.nod_frames);
  c.nod_delay_frames = j.value("nod_delay_frames", c.nod_delay_frames);
  c.noise = j.value("noise", c.noise);
  c.words_per_second = j.value("words_per_second", c.words_per_second);
  c.train_sessions = j.value("train_sessions", c.train_sessions);
  c.val_sessions = j.value("val_sessions", c.val_sessions);
  c.test_sessions = j.value("test_sessions", c.test_sessions);
  c.turns_per_session = j.value("turns_per_session", c.turns_per_session);
  c.min_turn_frames = j.value("min_turn_frames", c.min_turn_frames);
  c.max_turn_frames = j.value("max_turn_frames", c.max_turn_frames);
  if (j.contains("segmentation")) {
    const auto& s = j["segmentation"];
    c.segmentation.min_frames = s.value("min_frames", c.segmentation.min_frames);
    c.segmentation.max_frames = s.value("max_frames", c.segmentation.max_frames);
    c.segmentation.min_onset_seconds = s.value("min_onset_seconds", c.segmentation.min_onset_seconds);
    c.segmentation.history_seconds = s.value("history_seconds", c.segmentation.history_seconds);
  }
  c.seed = j.value("seed", c.seed);
  return c;
}

int word_sentiment(const SynthConfig& cfg, const std::string& word) {
  if (std::find(cfg.positive_words.begin(), cfg.positive_words.end(), word) != cfg.positive_words.end()) return 1;
  if (std::find(cfg.negative_words.begin(), cfg.negative_words.end(), word) != cfg.negative_words.end()) return -1;
  return 0;
}

namespace {

/// Orthonormal columns: [affect, drift] directions in expression space.
Mat basis(const SynthConfig& cfg, const char* name, int cols) {
  Rng rng = substream(cfg.seed, name);
  Mat g(cfg.expression_dim, cols);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(cfg.expression_dim, cols);
  return q;
}

/// Stationary AR(1) with marginal standard deviation `sd`.
std::vector<double> ar1(Rng& rng, int n, double phi, double sd) {
  std::vector<double> x(static_cast<std::size_t>(n));
  double v = normal(rng, 0, sd);
  const double innovation = sd * std::sqrt(1 - phi * phi);
  for (auto& xi : x) {
    xi = v;
    v = phi * v + normal(rng, 0, innovation);
  }
  return x;
}

/// Smoothed polarity of the most recent polar word ending at or before
/// t - lag, for t = 1..n.
std::vector<double> polarity_track(const SynthConfig& cfg, const std::vector<TimedToken>& transcript, int n,
                                   int lag) {
  std::vector<double> out(static_cast<std::size_t>(n));
  std::size_t w = 0;
  double target = 0, level = 0;
  for (int t = 1; t <= n; ++t) {
    while (w < transcript.size() && transcript[w].end_frame <= t - lag) {
      const int s = word_sentiment(cfg, transcript[w].text);
      if (s != 0) target = s;
      ++w;
    }
    level += cfg.affect_smoothing * (target - level);
    out[static_cast<std::size_t>(t - 1)] = level;
  }
  return out;
}

}  // namespace

AffectModel synth_affect_model(const SynthConfig& cfg) {
  AffectModel m;
  m.weights = basis(cfg, "synth-listener-basis", 2).col(0);
  m.bias = 0;
  return m;
}

Session generate_session(const SynthConfig& cfg, const std::string& id, std::uint64_t index) {
  cfg.validate();
  Rng rng = counter_stream(substream_seed(cfg.seed, "synth"), index);
  const int fps = cfg.fps;
  const int onset = static_cast<int>(std::lround(cfg.segmentation.min_onset_seconds * fps));
  auto pick = [&](const std::vector<std::string>& list) {
    return list[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(list.size()) - 1))];
  };

  Session s;
  s.id = id;
  // Turn plan and transcript.
  int cursor = fps;
  for (int k = 0; k < cfg.turns_per_session; ++k) {
    const int start = cursor + 1;
    const int end = start + onset + uniform_int(rng, cfg.min_turn_frames, cfg.max_turn_frames) - 1;
    s.speaker_turns.emplace_back(start, end);

    const double u = uniform01(rng);
    const int polarity = u < 0.4 ? 1 : (u < 0.8 ? -1 : 0);
    int t = start + uniform_int(rng, 0, fps / 3);
    bool open_with_conjunction = false;
    bool done = false;
    while (!done) {
      const int len = uniform_int(rng, 2, 5);
      for (int i = 0; i < len; ++i) {
        const double dur = fps / cfg.words_per_second * (0.7 + 0.6 * uniform01(rng));
        t += std::max(3, static_cast<int>(std::lround(dur)));
        if (t > end) {
          done = true;
          break;
        }
        std::string word;
        if (i == 0 && open_with_conjunction && !cfg.conjunctions.empty())
          word = pick(cfg.conjunctions);
        else if (polarity != 0 && uniform01(rng) < 0.5)
          word = pick(polarity > 0 ? cfg.positive_words : cfg.negative_words);
        else
          word = pick(cfg.neutral_words);
        s.transcript.push_back({word, t});
      }
      if (done) break;
      const double m = uniform01(rng);
      const std::string mark = m < 0.4 ? "." : (m < 0.55 ? "!" : (m < 0.7 ? "?" : ","));
      s.transcript.push_back({mark, t});
      open_with_conjunction = mark == "," && uniform01(rng) < 0.5;
      t += static_cast<int>(std::lround(fps * (0.2 + 0.4 * uniform01(rng))));
    }
    cursor = end + uniform_int(rng, fps, 2 * fps);
  }
  const int T = cursor + fps;

  // Listener.
  const Mat lb = basis(cfg, "synth-listener-basis", 2);
  const auto track = polarity_track(cfg, s.transcript, T, cfg.lag_frames);
  const auto drift_noise = ar1(rng, T, 0.7, 1.0);
  const auto z1 = ar1(rng, T, 0.998, 0.6);
  const auto head = ar1(rng, T, 0.99, 1.0);  // one slow drift shared by the three angles
  std::vector<double> nod(static_cast<std::size_t>(T), 0.0);
  for (const auto& w : s.transcript) {
    if (!is_end_mark(w.text) || !(uniform01(rng) < cfg.rho)) continue;
    for (int k = 0; k < cfg.nod_frames; ++k) {
      const int f = w.end_frame + cfg.nod_delay_frames + k;  // 1-based
      if (f >= 1 && f <= T)
        nod[static_cast<std::size_t>(f - 1)] +=
            cfg.nod_amplitude * std::sin(2 * std::numbers::pi * k / cfg.nod_frames);
    }
  }
  Mat lf(T, cfg.expression_dim + kRotationDims);
  for (int t = 0; t < T; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const double a =
        cfg.affect_amplitude * (cfg.kappa * track[i] + (1 - cfg.kappa) * std::tanh(drift_noise[i]));
    RowVec expr = (a * lb.col(0) + z1[i] * lb.col(1)).transpose();
    for (int c = 0; c < cfg.expression_dim; ++c) expr[c] += normal(rng, 0, cfg.noise);
    lf.row(t).head(cfg.expression_dim) = expr;
    lf(t, cfg.expression_dim + kPitch) = 0.02 * head[i] + nod[i];
    lf(t, cfg.expression_dim + kYaw) = 0.03 * head[i];
    lf(t, cfg.expression_dim + kRoll) = 0.015 * head[i];
  }
  s.listener = MotionSequence(std::move(lf), fps);

  // Speaker: weak expression of their own sentiment, small nods at their own
  // sentence ends.
  const Mat sb = basis(cfg, "synth-speaker-basis", 2);
  const auto own = polarity_track(cfg, s.transcript, T, 0);
  const auto sz = ar1(rng, T, 0.99, 0.4);
  const auto sp = ar1(rng, T, 0.98, 0.02);
  const auto sy = ar1(rng, T, 0.98, 0.04);
  const auto sr = ar1(rng, T, 0.98, 0.02);
  std::vector<double> snod(static_cast<std::size_t>(T), 0.0);
  for (const auto& w : s.transcript) {
    if (!is_end_mark(w.text)) continue;
    for (int k = 0; k < cfg.nod_frames; ++k) {
      const int f = w.end_frame + k;
      if (f >= 1 && f <= T)
        snod[static_cast<std::size_t>(f - 1)] += 0.3 * cfg.nod_amplitude * std::sin(2 * std::numbers::pi * k / cfg.nod_frames);
    }
  }
  Mat sf(T, cfg.expression_dim + kRotationDims);
  for (int t = 0; t < T; ++t) {
    const auto i = static_cast<std::size_t>(t);
    RowVec expr = (0.3 * own[i] * sb.col(0) + sz[i] * sb.col(1)).transpose();
    for (int c = 0; c < cfg.expression_dim; ++c) expr[c] += normal(rng, 0, cfg.noise);
    sf.row(t).head(cfg.expression_dim) = expr;
    sf(t, cfg.expression_dim + kPitch) = sp[i] + snod[i];
    sf(t, cfg.expression_dim + kYaw) = sy[i];
    sf(t, cfg.expression_dim + kRoll) = sr[i];
  }
  s.speaker = MotionSequence(std::move(sf), fps);
  return s;
}

SynthCorpus generate_corpus(const SynthConfig& cfg) {
  cfg.validate();
  SynthCorpus corpus;
  corpus.affect = synth_affect_model(cfg);
  std::uint64_t index = 0;
  auto fill = [&](Dataset& ds, const char* split, int sessions) {
    ds.expression_dim = cfg.expression_dim;
    ds.fps = cfg.fps;
    for (int k = 0; k < sessions; ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "%s-s%03d", split, k);
      const Session s = generate_session(cfg, name, index++);
      for (auto& seg : segment_session(s, cfg.segmentation)) ds.segments.push_back(std::move(seg));
    }
  };
  fill(corpus.train, "train", cfg.train_sessions);
  fill(corpus.val, "val", cfg.val_sessions);
  fill(corpus.test, "test", cfg.test_sessions);
  return corpus;
}

// ---------------------------------------------------------------------------

std::vector<Phrase> split_phrases(const SynthConfig& cfg, const std::vector<TimedToken>& words) {
  std::vector<Phrase> out;
  Phrase cur;
  int n = 0;
  double sum = 0;
  auto close = [&](int last_frame) {
    if (n == 0) return;
    cur.last_frame = last_frame;
    cur.sentiment = sum / n;
    out.push_back(cur);
    cur = Phrase{};
    n = 0;
    sum = 0;
  };
  for (const auto& w : words) {
    for (const auto& tok : tokenize_text(w.text)) {
      if (is_punctuation(tok)) {
        if (n > 0) cur.text += tok;
        close(w.end_frame);
        continue;
      }
      if (n == 0) cur.first_frame = w.end_frame;
      if (!cur.text.empty()) cur.text += ' ';
      cur.text += tok;
      sum += word_sentiment(cfg, tok);
      ++n;
      cur.last_frame = w.end_frame;
    }
  }
  close(cur.last_frame);
  return out;
}

std::string PhraseHistogram::to_csv() const {
  std::ostringstream out;
  out << "bin_low,bin_high,positive_count,negative_count\n";
  for (std::size_t b = 0; b + 1 < edges.size(); ++b)
    out << edges[b] << ',' << edges[b + 1] << ',' << positive[b] << ',' << negative[b] << '\n';
  return out.str();
}

PhraseHistogram affect_phrase_histogram(const SynthConfig& cfg, const Dataset& ds, const AffectModel& model, int k,
                                        int bins, double after_seconds) {
  if (k <= 0 || bins <= 0) throw InvariantError("affect_phrase_histogram: k and bins must be positive");
  struct Scored {
    double sentiment;
    std::string key;  // segment id + first frame, for deterministic ranking
    double affect;
  };
  std::vector<Scored> scored;
  for (const auto& seg : ds.segments) {
    const int T = seg.length();
    const int after = static_cast<int>(std::lround(after_seconds * seg.listener.fps));
    for (const auto& p : split_phrases(cfg, seg.words)) {
      const int lo = std::max(1, p.first_frame), hi = std::min(T, p.last_frame + after);
      if (lo > hi) continue;
      double a = 0;
      for (int f = lo; f <= hi; ++f) a += affect(model, seg.listener, f - 1);
      char key[32];
      std::snprintf(key, sizeof key, "%08d", p.first_frame);
      scored.push_back({p.sentiment, seg.id + "@" + key, a / (hi - lo + 1)});
    }
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    return a.sentiment != b.sentiment ? a.sentiment > b.sentiment : a.key < b.key;
  });

  PhraseHistogram h;
  for (int b = 0; b <= bins; ++b) h.edges.push_back(-1.0 + 2.0 * b / bins);
  h.positive.assign(static_cast<std::size_t>(bins), 0);
  h.negative.assign(static_cast<std::size_t>(bins), 0);
  auto bin_of = [&](double a) {
    return std::clamp(static_cast<int>(std::floor((a + 1.0) / 2.0 * bins)), 0, bins - 1);
  };
  const std::size_t take = std::min(static_cast<std::size_t>(k), scored.size());
  for (std::size_t i = 0; i < take; ++i) {
    if (scored[i].sentiment <= 0) break;
    h.positive_values.push_back(scored[i].affect);
    ++h.positive[static_cast<std::size_t>(bin_of(scored[i].affect))];
  }
  for (std::size_t i = 0; i < take; ++i) {
    const auto& s = scored[scored.size() - 1 - i];
    if (s.sentiment >= 0) break;
    h.negative_values.push_back(s.affect);
    ++h.negative[static_cast<std::size_t>(bin_of(s.affect))];
  }
  return h;
}

// ---------------------------------------------------------------------------

bool NodClassifier::is_nod(const MotionSequence& window) const {
  if (window.length() == 0) return false;
  const auto pitch = window.rotation().col(kPitch);
  return pitch.maxCoeff() - pitch.minCoeff() > threshold;
}

NodClassifier fit_nod_classifier(const Dataset& ds) {
  std::vector<double> pitch;
  for (const auto& seg : ds.segments)
    for (int t = 0; t < seg.length(); ++t) pitch.push_back(seg.listener.rotation()(t, kPitch));
  if (pitch.empty()) throw InvariantError("fit_nod_classifier: empty dataset");
  auto median = [](std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
  };
  const double m = median(pitch);
  for (auto& p : pitch) p = std::abs(p - m);
  return NodClassifier{3.0 * 1.4826 * median(pitch)};
}

std::string NodTable::to_csv() const {
  std::ostringstream out;
  out << "token,count";
  for (const auto& c : columns) out << ",pct_" << (c == "," ? "comma" : c);
  out << '\n';
  for (const auto& r : rows) {
    out << r.label << ',' << r.count;
    for (double p : r.percent) out << ',' << p;
    out << '\n';
  }
  return out.str();
}

double NodTable::end_punctuation_rate(const std::string& label) const {
  const auto col = std::find(columns.begin(), columns.end(), "end");
  for (const auto& r : rows)
    if (r.label == label) return r.percent[static_cast<std::size_t>(col - columns.begin())];
  return 0;
}

NodTable punctuation_nod_stats(const SynthConfig& cfg, const Dataset& ds, const VqParams& vq,
                               const NodClassifier& classifier, int context) {
  const int V = vq.codebook.size();
  std::vector<bool> nod_code(static_cast<std::size_t>(V));
  for (int c = 0; c < V; ++c) {
    MotionTokenSequence one;
    one.tokens = {c};
    one.frames_per_token = vq.frames_per_token();
    nod_code[static_cast<std::size_t>(c)] = classifier.is_nod(decode(vq, one));
  }

  NodTable table;
  table.columns = {".", ",", "?", "!"};
  for (const auto& c : cfg.conjunctions) table.columns.push_back(c);
  table.columns.push_back("end");
  const std::size_t C = table.columns.size();

  std::vector<std::vector<int>> hits(static_cast<std::size_t>(V), std::vector<int>(C, 0));
  std::vector<int> counts(static_cast<std::size_t>(V), 0);
  const int r = vq.frames_per_token();
  for (const auto& seg : ds.segments) {
    const auto toks = tokenize_motion(vq, seg.listener);
    std::vector<std::pair<int, std::string>> text;
    for (const auto* list : {&seg.history_words, &seg.words})
      for (const auto& w : *list)
        for (const auto& tok : tokenize_text(w.text)) text.emplace_back(w.end_frame, tok);
    std::size_t seen = 0;
    for (std::size_t t = 0; t < toks.tokens.size(); ++t) {
      const int limit = r * static_cast<int>(t + 1);
      while (seen < text.size() && text[seen].first <= limit) ++seen;
      const std::size_t from = seen > static_cast<std::size_t>(context) ? seen - static_cast<std::size_t>(context) : 0;
      const auto code = static_cast<std::size_t>(toks.tokens[t]);
      ++counts[code];
      bool any_end = false;
      for (std::size_t c = 0; c + 1 < C; ++c) {
        bool found = false;
        for (std::size_t i = from; i < seen; ++i) found = found || text[i].second == table.columns[c];
        hits[code][c] += found;
        any_end = any_end || (found && is_end_mark(table.columns[c]));
      }
      hits[code][C - 1] += any_end;
    }
  }

  auto row = [&](const std::string& label, int code, const std::vector<int>& codes) {
    NodRow nr{label, code, 0, std::vector<double>(C, 0.0)};
    std::vector<int> h(C, 0);
    for (int c : codes) {
      nr.count += counts[static_cast<std::size_t>(c)];
      for (std::size_t j = 0; j < C; ++j) h[j] += hits[static_cast<std::size_t>(c)][j];
    }
    if (nr.count > 0)
      for (std::size_t j = 0; j < C; ++j) nr.percent[j] = 100.0 * h[j] / nr.count;
    return nr;
  };
  std::vector<int> nods, plain;
  for (int c = 0; c < V; ++c) (nod_code[static_cast<std::size_t>(c)] ? nods : plain).push_back(c);
  for (int c : nods)
    if (counts[static_cast<std::size_t>(c)] > 0) table.rows.push_back(row("code " + std::to_string(c), c, {c}));
  if (!nods.empty()) table.rows.push_back(row("all nods", -1, nods));
  table.rows.push_back(row("plain", -1, plain));
  return table;
}

}  // namespace lltn
