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
#include "checks.hpp"
#include "support.hpp"

#include "lltn/metrics.hpp"
#include "lltn/pipeline.hpp"

#include <algorithm>

using namespace lltn;
using namespace lltn::testing;

TEST_CASE("Frechet distance oracles") {
  const auto r = check_fd_oracles(71);
  CHECK_MESSAGE(r.ok, r.detail);
}

TEST_CASE("bootstrap, diversity and Shannon oracles") {
  const auto r = check_statistics_oracles(72);
  CHECK_MESSAGE(r.ok, r.detail);
}

TEST_CASE("FD of shifted identical samples is the squared shift") {
  Rng rng(73);
  const Mat a = random_mat(rng, 50, 3);
  Mat b = a;
  RowVec shift(3);
  shift << 1.0, -2.0, 0.5;
  b.rowwise() += shift;
  CHECK(frechet_distance(a, b) == doctest::Approx(shift.squaredNorm()).epsilon(1e-8));
  // Sample-space regime (fewer rows than columns).
  const Mat c = random_mat(rng, 10, 30);
  Mat d = c;
  d.rowwise() += RowVec::Constant(30, 0.5);
  CHECK(frechet_distance(c, d) == doctest::Approx(30 * 0.25).epsilon(1e-8));
}

TEST_CASE("per-frame metrics against direct formulas") {
  Mat pf(3, 4), gf(3, 4);
  pf << 0, 0, 0, 0, 1, 1, 1, 1, 2, 0, 0, 0;
  gf << 0, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0;
  const MotionSequence p(pf), g(gf);
  CHECK(l2_metric(p, g) == doctest::Approx((1.0 + 0.0 + 2.0) / 3));
  CHECK_THROWS_AS(l2_metric(p, MotionSequence(Mat::Zero(2, 4))), ShapeError);
  // Column variances of pf: [2/3, 2/9, 2/9, 2/9].
  CHECK(variation(p) == doctest::Approx((2.0 / 3 + 3 * 2.0 / 9) / 4));
}

TEST_CASE("windowed affect and its RMS difference") {
  AffectModel m;
  m.weights = Vec::Zero(2);
  m.weights[0] = 1.0;
  Mat pf = Mat::Zero(5, 5), gf = Mat::Zero(5, 5);
  for (int t = 0; t < 5; ++t) {
    pf(t, 0) = 0.1 * t;
    gf(t, 0) = -0.1 * t;
  }
  pf(4, 0) = 3.0;  // clamped to 1
  const MotionSequence p(pf), g(gf);
  const auto wa = window_affect(m, p, 2);
  REQUIRE(wa.size() == 4);
  CHECK(wa[0] == doctest::Approx(0.05));
  CHECK(wa[3] == doctest::Approx((0.3 + 1.0) / 2));
  const auto wb = window_affect(m, g, 2);
  double s = 0;
  for (int i = 0; i < 4; ++i) s += (wa[i] - wb[i]) * (wa[i] - wb[i]);
  CHECK(l2_affect(m, p, g, 2) == doctest::Approx(std::sqrt(s / 4)));
  CHECK(window_affect(m, p, 10).size() == 1);
  AffectModel back = AffectModel::from_json(m.to_json());
  CHECK(back.weights == m.weights);
}

TEST_CASE("window samples flatten non-overlapping windows") {
  Mat a(5, 3);
  for (int i = 0; i < 15; ++i) a.data()[i] = i;
  const Mat w = window_samples({&a}, 1, 2, 2);
  REQUIRE(w.rows() == 2);
  REQUIRE(w.cols() == 4);
  CHECK(w(0, 0) == 1);
  CHECK(w(0, 1) == 2);
  CHECK(w(0, 2) == 4);
  CHECK(w(1, 3) == 11);
}

TEST_CASE("evaluate: report round trip, order independence and warnings") {
  const auto corpus = generate_corpus(tiny_synth(74));
  const auto& segs = corpus.test.segments;
  Rng rng(75);
  std::vector<MotionSequence> pred;
  for (const auto& s : segs) {
    Mat f = s.listener.frames + random_mat(rng, s.length(), s.listener.frame_dim(), 0.05);
    pred.emplace_back(f, s.listener.fps);
  }
  EvalOptions o;
  o.bootstrap_resamples = 200;
  o.fd_bootstrap_resamples = 5;
  o.seed = 3;
  const auto rep = evaluate(pred, segs, corpus.affect, nullptr, o);
  CHECK(rep.segments == static_cast<int>(segs.size()));
  CHECK(rep.l2.value > 0);
  REQUIRE(rep.pfd.has_value());
  CHECK_FALSE(rep.shannon_index.has_value());

  auto rsegs = segs;
  auto rpred = pred;
  std::reverse(rsegs.begin(), rsegs.end());
  std::reverse(rpred.begin(), rpred.end());
  const auto again = evaluate(rpred, rsegs, corpus.affect, nullptr, o);
  CHECK(again.to_json() == rep.to_json());

  const auto back = MetricsReport::from_json(rep.to_json());
  CHECK(back.to_json() == rep.to_json());

  auto no_speaker = segs;
  for (auto& s : no_speaker) s.speaker.reset();
  const auto ns = evaluate(pred, no_speaker, corpus.affect, nullptr, o);
  CHECK_FALSE(ns.pfd.has_value());
  CHECK_FALSE(ns.warnings.empty());

  const auto gt = evaluate(listeners(segs), segs, corpus.affect, nullptr, o);
  CHECK(gt.l2.value == 0.0);
  CHECK(gt.fd_expression.value < 1e-8);
  CHECK(gt.l2_affect.value == 0.0);

  const std::string table = format_table({{"noisy", rep}, {"truth", gt}});
  CHECK(table.find("noisy") != std::string::npos);
  CHECK(table.find("L2 Affect") != std::string::npos);

  pred.pop_back();
  CHECK_THROWS_AS(evaluate(pred, segs, corpus.affect, nullptr, o), ShapeError);
}
