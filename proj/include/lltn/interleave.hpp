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

// Mixed text/motion token streams. Speaker words are placed among listener
// motion tokens by timestamp so that every motion token only follows words
// that have already been spoken.

#pragma once

#include "lltn/rng.hpp"
#include "lltn/types.hpp"
#include "lltn/vq.hpp"
#include "json.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lltn {

/// Lowercased word split; the marks , . ! ? " and the ellipsis character are
/// separate tokens.
std::vector<std::string> tokenize_text(std::string_view s);

bool is_punctuation(std::string_view token);

/// Id layout: [words (id 0 is "<unk>")] [SPACE FIXED PAD] [V_vq motion ids].
class Vocabulary {
 public:
  static constexpr const char* kUnknown = "<unk>";

  Vocabulary() : Vocabulary(std::vector<std::string>{}, 0) {}
  /// `words` in id order; "<unk>" is inserted at id 0 when absent.
  Vocabulary(std::vector<std::string> words, int codebook_size);

  /// Words seen in `texts` (tokenized), sorted, with "<unk>" first.
  static Vocabulary build(const std::vector<std::string>& texts, int codebook_size);

  int word_count() const { return static_cast<int>(words_.size()); }
  int space_id() const { return word_count(); }
  int fixed_id() const { return word_count() + 1; }
  int pad_id() const { return word_count() + 2; }
  /// Rows of the text embedding table: words plus reserved tokens.
  int text_size() const { return word_count() + 3; }
  int codebook_size() const { return codebook_size_; }
  int size() const { return text_size() + codebook_size_; }

  int word_id(std::string_view token) const;
  const std::string& word(int id) const;
  int motion_id(int code) const { return text_size() + code; }
  bool is_motion(int id) const { return id >= text_size() && id < size(); }
  int motion_code(int id) const { return id - text_size(); }
  bool is_punctuation_id(int id) const;
  const std::vector<std::string>& words() const { return words_; }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_ && a.codebook_size_ == b.codebook_size_;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
  int codebook_size_ = 0;
};

enum class TokenKind : std::uint8_t { HistoryText, SegmentText, Space, Motion };

inline bool is_text(TokenKind k) { return k == TokenKind::HistoryText || k == TokenKind::SegmentText; }

struct InterleavedSequence {
  std::vector<int> ids;
  std::vector<TokenKind> kinds;
  /// Text: the token's end frame. Motion: r*t, the end of its interval.
  /// Space: the frame of the motion token it announces.
  std::vector<int> frames;

  std::size_t size() const { return ids.size(); }
  void push(int id, TokenKind kind, int frame) {
    ids.push_back(id);
    kinds.push_back(kind);
    frames.push_back(frame);
  }
  std::size_t motion_count() const;

  friend bool operator==(const InterleavedSequence&, const InterleavedSequence&) = default;
};

struct InterleaveConfig {
  int max_tokens = 480;
  double corruption_probability = 0.5;
  int frames_per_token = 8;
  int fps = kDefaultFps;

  void validate() const;
};

/// Text ids of a timed word list, each word expanded by tokenize_text.
struct TimedIds {
  std::vector<int> ids;
  std::vector<int> frames;
};
TimedIds text_ids(const Vocabulary& vocab, const std::vector<TimedToken>& words);

/// [history] then for each t: [words ending in (r(t-1), rt]] [SPACE] [q_t].
/// Words ending at or before r go before q_1. Over budget, history tokens are
/// dropped oldest first, then leading segment words.
InterleavedSequence assemble(const Vocabulary& vocab, const std::vector<TimedToken>& history,
                             const std::vector<TimedToken>& words, const MotionTokenSequence& motion,
                             const InterleaveConfig& cfg);

struct CorruptedSequence {
  std::vector<int> input;
  std::vector<int> target;
};

/// Each motion input id is independently replaced with probability p by a
/// uniformly drawn motion id. Targets are the original ids.
CorruptedSequence corrupt_motion_tokens(const InterleavedSequence& seq, const Vocabulary& vocab, double p,
                                        Rng& rng);

/// All text first (original order), then the motion tokens; no SPACE tokens.
InterleavedSequence transform_unaligned(const InterleavedSequence& seq);
/// Uniform permutation of the text ids over the text positions.
InterleavedSequence transform_scrambled(const InterleavedSequence& seq, Rng& rng);
/// Every text id becomes FIXED.
InterleavedSequence transform_fixtok(const InterleavedSequence& seq, const Vocabulary& vocab);
/// Every non-punctuation text id becomes FIXED.
InterleavedSequence transform_fixtok_punc(const InterleavedSequence& seq, const Vocabulary& vocab);

/// Conditioning variants compared against the full model.
enum class Ablation { Full, NoPretrain, Unaligned, Scrambled, FixTok, FixTokPunc, Uncond };

Ablation ablation_from_string(std::string_view name);
std::string to_string(Ablation a);

/// Assembles the stream for one segment under the given ablation.
InterleavedSequence assemble_for(Ablation ablation, const Vocabulary& vocab,
                                 const std::vector<TimedToken>& history, const std::vector<TimedToken>& words,
                                 const MotionTokenSequence& motion, const InterleaveConfig& cfg, Rng& rng);

}  // namespace lltn
