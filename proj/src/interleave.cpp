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

#include "lltn/interleave.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace lltn {

using nlohmann::json;

namespace {

constexpr std::string_view kEllipsis = "\xE2\x80\xA6";

bool is_mark(char c) { return c == ',' || c == '.' || c == '!' || c == '?' || c == '"'; }

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::vector<std::string> tokenize_text(std::string_view s) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < s.size();) {
    const char c = s[i];
    if (s.substr(i, kEllipsis.size()) == kEllipsis) {
      flush();
      out.emplace_back(kEllipsis);
      i += kEllipsis.size();
    } else if (is_mark(c)) {
      flush();
      out.emplace_back(1, c);
      ++i;
    } else if (is_space(c)) {
      flush();
      ++i;
    } else {
      word.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
      ++i;
    }
  }
  flush();
  return out;
}

bool is_punctuation(std::string_view token) {
  return token == kEllipsis || (token.size() == 1 && is_mark(token[0]));
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> words, int codebook_size)
    : words_(std::move(words)), codebook_size_(codebook_size) {
  if (codebook_size < 0) throw InvariantError("vocabulary: negative codebook size");
  if (words_.empty() || words_.front() != kUnknown) {
    std::erase(words_, std::string(kUnknown));
    words_.insert(words_.begin(), kUnknown);
  }
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<int>(i)).second)
      throw InvariantError("vocabulary: duplicate word '" + words_[i] + "'");
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, int codebook_size) {
  std::set<std::string> seen;
  for (const auto& t : texts)
    for (auto& tok : tokenize_text(t)) seen.insert(std::move(tok));
  seen.erase(kUnknown);
  std::vector<std::string> words{kUnknown};
  words.insert(words.end(), seen.begin(), seen.end());
  return Vocabulary(std::move(words), codebook_size);
}

int Vocabulary::word_id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? 0 : it->second;
}

const std::string& Vocabulary::word(int id) const {
  static const std::string space = "<space>", fixed = "<fixed>", pad = "<pad>", motion = "<motion>";
  if (id >= 0 && id < word_count()) return words_[static_cast<std::size_t>(id)];
  if (id == space_id()) return space;
  if (id == fixed_id()) return fixed;
  if (id == pad_id()) return pad;
  return motion;
}

bool Vocabulary::is_punctuation_id(int id) const {
  return id >= 0 && id < word_count() && is_punctuation(words_[static_cast<std::size_t>(id)]);
}

json Vocabulary::to_json() const {
  return {{"words", words_},
          {"reserved", {{"space", space_id()}, {"fixed", fixed_id()}, {"pad", pad_id()}}},
          {"v_vq", codebook_size_}};
}

Vocabulary Vocabulary::from_json(const json& j) {
  try {
    Vocabulary v(j.at("words").get<std::vector<std::string>>(), j.at("v_vq").get<int>());
    const auto& r = j.at("reserved");
    if (r.at("space").get<int>() != v.space_id() || r.at("fixed").get<int>() != v.fixed_id() ||
        r.at("pad").get<int>() != v.pad_id())
      throw ParseError("vocabulary: reserved ids do not follow the word table");
    return v;
  } catch (const json::exception& e) {
    throw ParseError(std::string("vocabulary: ") + e.what());
  }
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary '" + path + "'");
  out << to_json().dump() << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary '" + path + "'");
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

std::size_t InterleavedSequence::motion_count() const {
  return static_cast<std::size_t>(std::count(kinds.begin(), kinds.end(), TokenKind::Motion));
}

void InterleaveConfig::validate() const {
  if (max_tokens <= 0) throw InvariantError("interleave config: max_tokens must be positive");
  if (!(corruption_probability >= 0 && corruption_probability <= 1))
    throw InvariantError("interleave config: corruption probability outside [0, 1]");
  if (frames_per_token <= 0 || fps <= 0) throw InvariantError("interleave config: r and fps must be positive");
}

TimedIds text_ids(const Vocabulary& vocab, const std::vector<TimedToken>& words) {
  TimedIds out;
  for (const auto& w : words) {
    for (const auto& tok : tokenize_text(w.text)) {
      out.ids.push_back(vocab.word_id(tok));
      out.frames.push_back(w.end_frame);
    }
  }
  return out;
}

InterleavedSequence assemble(const Vocabulary& vocab, const std::vector<TimedToken>& history,
                             const std::vector<TimedToken>& words, const MotionTokenSequence& motion,
                             const InterleaveConfig& cfg) {
  cfg.validate();
  const int r = motion.frames_per_token;
  if (r != cfg.frames_per_token) throw ShapeError("assemble: motion tokens use a different r");
  const int n = static_cast<int>(motion.tokens.size());
  TimedIds hist = text_ids(vocab, history);
  TimedIds seg = text_ids(vocab, words);
  for (std::size_t i = 0; i < seg.frames.size(); ++i) {
    if (seg.frames[i] < 1 || seg.frames[i] > r * n)
      throw InvariantError("assemble: word ending at frame " + std::to_string(seg.frames[i]) +
                           " lies outside the " + std::to_string(r * n) + " motion frames");
    if (i > 0 && seg.frames[i] < seg.frames[i - 1]) throw InvariantError("assemble: words not sorted by end_frame");
  }
  for (int q : motion.tokens)
    if (q < 0 || q >= vocab.codebook_size()) throw InvariantError("assemble: motion token out of range");

  const std::size_t fixed = 2 * static_cast<std::size_t>(n);
  if (fixed > static_cast<std::size_t>(cfg.max_tokens))
    throw InvariantError("assemble: " + std::to_string(n) + " motion tokens exceed the token budget");
  std::size_t over = hist.ids.size() + seg.ids.size() + fixed;
  over = over > static_cast<std::size_t>(cfg.max_tokens) ? over - static_cast<std::size_t>(cfg.max_tokens) : 0;
  const std::size_t drop_hist = std::min(over, hist.ids.size());
  const std::size_t drop_seg = over - drop_hist;

  InterleavedSequence out;
  out.ids.reserve(hist.ids.size() + seg.ids.size() + fixed - over);
  for (std::size_t i = drop_hist; i < hist.ids.size(); ++i)
    out.push(hist.ids[i], TokenKind::HistoryText, hist.frames[i]);
  std::size_t w = drop_seg;
  for (int t = 1; t <= n; ++t) {
    while (w < seg.ids.size() && seg.frames[w] <= r * t) {
      out.push(seg.ids[w], TokenKind::SegmentText, seg.frames[w]);
      ++w;
    }
    out.push(vocab.space_id(), TokenKind::Space, r * t);
    out.push(vocab.motion_id(motion.tokens[static_cast<std::size_t>(t - 1)]), TokenKind::Motion, r * t);
  }
  return out;
}

CorruptedSequence corrupt_motion_tokens(const InterleavedSequence& seq, const Vocabulary& vocab, double p,
                                        Rng& rng) {
  if (!(p >= 0 && p <= 1)) throw InvariantError("corrupt_motion_tokens: p outside [0, 1]");
  CorruptedSequence out{seq.ids, seq.ids};
  if (vocab.codebook_size() == 0) return out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq.kinds[i] != TokenKind::Motion) continue;
    // Draw both numbers unconditionally so the stream position is independent of p.
    const double u = uniform01(rng);
    const int code = uniform_int(rng, 0, vocab.codebook_size() - 1);
    if (u < p) out.input[i] = vocab.motion_id(code);
  }
  return out;
}

InterleavedSequence transform_unaligned(const InterleavedSequence& seq) {
  InterleavedSequence out;
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (is_text(seq.kinds[i])) out.push(seq.ids[i], seq.kinds[i], seq.frames[i]);
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (seq.kinds[i] == TokenKind::Motion) out.push(seq.ids[i], seq.kinds[i], seq.frames[i]);
  return out;
}

InterleavedSequence transform_scrambled(const InterleavedSequence& seq, Rng& rng) {
  InterleavedSequence out = seq;
  std::vector<std::size_t> pos;
  std::vector<int> ids;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (is_text(seq.kinds[i])) {
      pos.push_back(i);
      ids.push_back(seq.ids[i]);
    }
  }
  // Fisher-Yates with our own draws so the permutation is library independent.
  for (std::size_t i = ids.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i) - 1));
    std::swap(ids[i - 1], ids[j]);
  }
  for (std::size_t k = 0; k < pos.size(); ++k) out.ids[pos[k]] = ids[k];
  return out;
}

InterleavedSequence transform_fixtok(const InterleavedSequence& seq, const Vocabulary& vocab) {
  InterleavedSequence out = seq;
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (is_text(seq.kinds[i])) out.ids[i] = vocab.fixed_id();
  return out;
}

InterleavedSequence transform_fixtok_punc(const InterleavedSequence& seq, const Vocabulary& vocab) {
  InterleavedSequence out = seq;
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (is_text(seq.kinds[i]) && !vocab.is_punctuation_id(seq.ids[i])) out.ids[i] = vocab.fixed_id();
  return out;
}

// ---------------------------------------------------------------------------

Ablation ablation_from_string(std::string_view name) {
  if (name == "full") return Ablation::Full;
  if (name == "nopt") return Ablation::NoPretrain;
  if (name == "unaligned") return Ablation::Unaligned;
  if (name == "scrambled") return Ablation::Scrambled;
  if (name == "fixtok") return Ablation::FixTok;
  if (name == "fixtok-punc") return Ablation::FixTokPunc;
  if (name == "uncond") return Ablation::Uncond;
  throw InvariantError("unknown ablation '" + std::string(name) + "'");
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::NoPretrain: return "nopt";
    case Ablation::Unaligned: return "unaligned";
    case Ablation::Scrambled: return "scrambled";
    case Ablation::FixTok: return "fixtok";
    case Ablation::FixTokPunc: return "fixtok-punc";
    case Ablation::Uncond: return "uncond";
  }
  return "full";
}

InterleavedSequence assemble_for(Ablation ablation, const Vocabulary& vocab,
                                 const std::vector<TimedToken>& history, const std::vector<TimedToken>& words,
                                 const MotionTokenSequence& motion, const InterleaveConfig& cfg, Rng& rng) {
  switch (ablation) {
    case Ablation::Uncond:
      return assemble(vocab, {}, {}, motion, cfg);
    case Ablation::Unaligned:
      return transform_unaligned(assemble(vocab, history, words, motion, cfg));
    case Ablation::Scrambled:
      return transform_scrambled(assemble(vocab, history, words, motion, cfg), rng);
    case Ablation::FixTok:
      return transform_fixtok(assemble(vocab, history, words, motion, cfg), vocab);
    case Ablation::FixTokPunc:
      return transform_fixtok_punc(assemble(vocab, history, words, motion, cfg), vocab);
    case Ablation::Full:
    case Ablation::NoPretrain:
      break;
  }
  return assemble(vocab, history, words, motion, cfg);
}

}  // namespace lltn
