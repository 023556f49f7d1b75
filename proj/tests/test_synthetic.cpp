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


#include "doctest.h"
#include "support.hpp"

#include "lltn/synthetic.hpp"

#include <cmath>

using namespace lltn;
using namespace lltn::testing;

namespace {

// Sign of the most recent polar word ending at or before frame t, 0 if none.
// Polar words and the frame of the first one are taken from the segment text.
struct PolarOracle {
  std::vector<std::pair<int, int>> marks;  // end frame, sign

  PolarOracle(const SynthConfig& cfg, const DyadSegment& seg) {
    for (const auto* list : {&seg.history_words, &seg.words})
      for (const auto& w : *list)
        if (int s = word_sentiment(cfg, w.text)) marks.emplace_back(w.end_frame, s);
  }
  int at(int t, int lag = 0) const {
    int s = 0;
    for (const auto& [f, v] : marks)
      if (f <= t - lag) s = v;
    return s;
  }
};

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double sentiment_affect_correlation(const SynthConfig& cfg) {
  const auto corpus = generate_corpus(cfg);
  std::vector<double> s, a;
  for (const auto& seg : corpus.train.segments) {
    const PolarOracle oracle(cfg, seg);
    for (int t = 1; t <= seg.length(); ++t) {
      s.push_back(oracle.at(t, cfg.lag_frames));
      a.push_back(affect(corpus.affect, seg.listener, t - 1));
    }
  }
  return correlation(s, a);
}

}  // namespace

TEST_CASE("corpus generation is deterministic per seed") {
  const auto a = generate_corpus(tiny_synth(91));
  const auto b = generate_corpus(tiny_synth(91));
  const auto c = generate_corpus(tiny_synth(92));
  CHECK(a.train.segments == b.train.segments);
  CHECK(a.test.segments == b.test.segments);
  CHECK(a.affect.weights == b.affect.weights);
  CHECK_FALSE(a.train.segments == c.train.segments);
  for (const auto& seg : a.train.segments) {
    CHECK_NOTHROW(validate_segment(seg, 8, 30, tiny_synth(91).segmentation));
    REQUIRE(seg.speaker.has_value());
    CHECK(seg.speaker->length() == seg.length());
  }
}

TEST_CASE("noise-free full coupling matches the polarity oracle exactly") {
  SynthConfig cfg = tiny_synth(93);
  cfg.kappa = 1.0;
  cfg.noise = 0.0;
  cfg.affect_smoothing = 1.0;
  const auto corpus = generate_corpus(cfg);
  int checked = 0;
  for (const auto& seg : corpus.train.segments) {
    const PolarOracle oracle(cfg, seg);
    // Frames before the first visible polar word may follow older text.
    int first = seg.length() + 1;
    for (const auto& w : seg.words)
      if (word_sentiment(cfg, w.text) != 0) {
        first = w.end_frame;
        break;
      }
    for (int t = std::max(first, 1); t <= seg.length(); ++t) {
      CHECK(affect(corpus.affect, seg.listener, t - 1) ==
            doctest::Approx(cfg.affect_amplitude * oracle.at(t)).epsilon(1e-9));
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("coupling strength controls sentiment-affect dependence") {
  SynthConfig cfg = tiny_synth(94);
  cfg.train_sessions = 8;
  cfg.turns_per_session = 8;
  cfg.kappa = 0.0;
  const double none = sentiment_affect_correlation(cfg);
  cfg.kappa = 0.9;
  const double strong = sentiment_affect_correlation(cfg);
  MESSAGE("corr kappa=0: " << none << ", kappa=0.9: " << strong);
  CHECK(std::abs(none) < 0.1);
  CHECK(strong > 0.6);
}

TEST_CASE("reactions follow the configured lag") {
  SynthConfig cfg = tiny_synth(95);
  cfg.kappa = 1.0;
  cfg.noise = 0.0;
  const auto now = generate_corpus(cfg);
  cfg.lag_frames = 20;
  const auto later = generate_corpus(cfg);
  REQUIRE(now.train.segments.size() == later.train.segments.size());
  int checked = 0, moved = 0;
  for (std::size_t i = 0; i < now.train.segments.size(); ++i) {
    const auto& a = now.train.segments[i];
    const auto& b = later.train.segments[i];
    REQUIRE(a.words == b.words);
    for (int t = cfg.lag_frames; t < a.length(); ++t) {
      const double want = affect(now.affect, a.listener, t - cfg.lag_frames);
      CHECK(affect(later.affect, b.listener, t) == doctest::Approx(want).epsilon(1e-12));
      moved += affect(later.affect, b.listener, t) != affect(now.affect, a.listener, t);
      ++checked;
    }
  }
  CHECK(checked > 100);
  CHECK(moved > 0);
}

TEST_CASE("phrases split at punctuation") {
  const SynthConfig cfg;
  const auto ph = split_phrases(cfg, {{"great", 3}, {"fun", 5}, {".", 5}, {"the", 9}, {"sad", 12}, {",", 12},
                                      {"it", 15}});
  REQUIRE(ph.size() == 3);
  CHECK(ph[0].text == "great fun.");
  CHECK(ph[0].first_frame == 3);
  CHECK(ph[0].last_frame == 5);
  CHECK(ph[0].sentiment == 1.0);
  CHECK(ph[1].text == "the sad,");
  CHECK(ph[1].sentiment == -0.5);
  CHECK(ph[2].text == "it");
  CHECK(ph[2].last_frame == 15);
}

TEST_CASE("phrase histogram separates polar phrases") {
  SynthConfig cfg = tiny_synth(96);
  cfg.train_sessions = 6;
  const auto corpus = generate_corpus(cfg);
  const auto h = affect_phrase_histogram(cfg, corpus.train, corpus.affect, 30);
  REQUIRE(h.edges.size() == 21);
  REQUIRE_FALSE(h.positive_values.empty());
  REQUIRE_FALSE(h.negative_values.empty());
  int pos = 0, neg = 0;
  for (int x : h.positive) pos += x;
  for (int x : h.negative) neg += x;
  CHECK(pos == static_cast<int>(h.positive_values.size()));
  CHECK(neg == static_cast<int>(h.negative_values.size()));
  double mp = 0, mn = 0;
  for (double v : h.positive_values) mp += v;
  for (double v : h.negative_values) mn += v;
  CHECK(mp / pos > mn / neg);
  CHECK(h.to_csv().rfind("bin_low,bin_high", 0) == 0);
}

TEST_CASE("nod classifier") {
  const auto corpus = generate_corpus(tiny_synth(97));
  const auto clf = fit_nod_classifier(corpus.train);
  CHECK(clf.threshold > 0);
  const SynthConfig cfg = tiny_synth(97);
  Mat w = Mat::Zero(cfg.nod_frames, cfg.expression_dim + kRotationDims);
  CHECK_FALSE(clf.is_nod(MotionSequence(w)));
  for (int k = 0; k < cfg.nod_frames; ++k)
    w(k, cfg.expression_dim) = cfg.nod_amplitude * std::sin(2 * M_PI * k / cfg.nod_frames);
  CHECK(clf.is_nod(MotionSequence(w)));
}

TEST_CASE("synth config rejects degenerate settings") {
  SynthConfig c;
  c.positive_words.clear();
  CHECK_THROWS_AS(c.validate(), InvariantError);
  c = SynthConfig{};
  c.neutral_words.push_back("great");
  CHECK_THROWS_AS(c.validate(), InvariantError);
  c = SynthConfig{};
  c.kappa = 1.5;
  CHECK_THROWS_AS(c.validate(), InvariantError);
  CHECK_THROWS_AS(synth_config_from({{"kapa", 0.5}}), ParseError);
  CHECK(synth_config_from(to_json(SynthConfig{})).kappa == SynthConfig{}.kappa);
}
