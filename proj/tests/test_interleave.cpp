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

#include "lltn/interleave.hpp"

#include <map>

using namespace lltn;
using namespace lltn::testing;

namespace {

MotionTokenSequence motion(std::vector<int> tokens, int r = 8) {
  MotionTokenSequence m;
  m.tokens = std::move(tokens);
  m.frames_per_token = r;
  return m;
}

}  // namespace

TEST_CASE("text tokenizer splits punctuation and lowercases") {
  CHECK(tokenize_text("Hello, World!") == std::vector<std::string>{"hello", ",", "world", "!"});
  CHECK(tokenize_text("wait...") == std::vector<std::string>{"wait", ".", ".", "."});
  CHECK(tokenize_text("  ") .empty());
  CHECK(is_punctuation("?"));
  CHECK_FALSE(is_punctuation("so"));
}

TEST_CASE("vocabulary id layout") {
  const Vocabulary v({"b", "a", "."}, 5);
  CHECK(v.word_id("<unk>") == 0);
  CHECK(v.word_id("zebra") == 0);
  CHECK(v.space_id() == v.word_count());
  CHECK(v.fixed_id() == v.word_count() + 1);
  CHECK(v.pad_id() == v.word_count() + 2);
  CHECK(v.motion_id(0) == v.text_size());
  CHECK(v.size() == v.text_size() + 5);
  CHECK(v.is_motion(v.motion_id(4)));
  CHECK_FALSE(v.is_motion(v.pad_id()));
  CHECK(v.is_punctuation_id(v.word_id(".")));
  CHECK(Vocabulary::from_json(v.to_json()) == v);
}

TEST_CASE("assemble places words before the first motion token that covers them") {
  const Vocabulary v({"a", "b", "c", "h"}, 4);
  InterleaveConfig cfg;
  const auto seq = assemble(v, {{"h", -5}}, {{"a", 1}, {"b", 8}, {"c", 9}}, motion({2, 3}), cfg);
  const std::vector<int> want{v.word_id("h"), v.word_id("a"), v.word_id("b"), v.space_id(), v.motion_id(2),
                              v.word_id("c"), v.space_id(), v.motion_id(3)};
  CHECK(seq.ids == want);
  CHECK(seq.kinds.front() == TokenKind::HistoryText);
  CHECK(seq.motion_count() == 2);
  CHECK_THROWS_AS(assemble(v, {}, {{"a", 17}}, motion({1, 1}), cfg), InvariantError);
}

TEST_CASE("assemble drops history before segment words when over budget") {
  const Vocabulary v({"a", "h"}, 4);
  InterleaveConfig cfg;
  cfg.max_tokens = 7;
  // 3 history + 3 words + 2 motion pairs = 10 tokens; drop 3.
  const auto seq = assemble(v, {{"h", -3}, {"h", -2}, {"h", -1}}, {{"a", 1}, {"a", 2}, {"a", 3}}, motion({0, 1}), cfg);
  CHECK(seq.size() == 7);
  for (auto k : seq.kinds) CHECK(k != TokenKind::HistoryText);
  cfg.max_tokens = 5;
  const auto tighter = assemble(v, {{"h", -1}}, {{"a", 1}, {"a", 2}, {"a", 3}}, motion({0, 1}), cfg);
  CHECK(tighter.size() == 5);
  CHECK(tighter.frames[0] == 3);
}

TEST_CASE("interleaving properties on random segments") {
  const auto r = check_interleaving(150, 31);
  CHECK_MESSAGE(r.ok, r.detail);
}

TEST_CASE("ablation transforms") {
  const Vocabulary v({"a", "b", "."}, 4);
  InterleaveConfig cfg;
  const auto seq = assemble(v, {{"b", 0}}, {{"a", 2}, {".", 2}, {"b", 12}}, motion({1, 2}), cfg);

  const auto un = transform_unaligned(seq);
  CHECK(un.size() == 4 + 2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(is_text(un.kinds[i]));
  for (auto k : un.kinds) CHECK(k != TokenKind::Space);

  const auto ft = transform_fixtok(seq, v);
  const auto fp = transform_fixtok_punc(seq, v);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (!is_text(seq.kinds[i])) {
      CHECK(ft.ids[i] == seq.ids[i]);
      CHECK(fp.ids[i] == seq.ids[i]);
      continue;
    }
    CHECK(ft.ids[i] == v.fixed_id());
    CHECK(fp.ids[i] == (v.is_punctuation_id(seq.ids[i]) ? seq.ids[i] : v.fixed_id()));
  }

  Rng rng(3);
  const auto sc = transform_scrambled(seq, rng);
  std::vector<int> a, b;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CHECK(sc.kinds[i] == seq.kinds[i]);
    if (is_text(seq.kinds[i])) {
      a.push_back(seq.ids[i]);
      b.push_back(sc.ids[i]);
    } else {
      CHECK(sc.ids[i] == seq.ids[i]);
    }
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);

  Rng rng2(4);
  const auto unc = assemble_for(Ablation::Uncond, v, {{"b", 0}}, {{"a", 2}}, motion({1, 2}), cfg, rng2);
  for (auto k : unc.kinds) CHECK_FALSE(is_text(k));
  CHECK(ablation_from_string(to_string(Ablation::FixTokPunc)) == Ablation::FixTokPunc);
  CHECK_THROWS_AS(ablation_from_string("nope"), InvariantError);
}

TEST_CASE("scrambling is a uniform permutation") {
  const Vocabulary v({"a", "b", "c"}, 2);
  InterleavedSequence seq;
  seq.push(v.word_id("a"), TokenKind::SegmentText, 1);
  seq.push(v.word_id("b"), TokenKind::SegmentText, 1);
  seq.push(v.word_id("c"), TokenKind::SegmentText, 1);
  std::map<std::vector<int>, int> counts;
  Rng rng(5);
  const int n = 60000;
  for (int i = 0; i < n; ++i) counts[transform_scrambled(seq, rng).ids]++;
  CHECK(counts.size() == 6);
  for (const auto& [perm, c] : counts) CHECK(std::abs(c - n / 6.0) < 5 * std::sqrt(n / 6.0));
}

TEST_CASE("corruption changes only motion inputs at the requested rate") {
  const auto r = check_corruption_rate(41, 40000);
  CHECK_MESSAGE(r.ok, r.detail);
}
