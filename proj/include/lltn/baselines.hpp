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

// Reference systems the listener model is compared against.

#pragma once

#include "lltn/dataset.hpp"
#include "lltn/lm.hpp"
#include "lltn/rng.hpp"
#include "lltn/types.hpp"
#include "lltn/vq.hpp"
#include "json.hpp"

#include <map>
#include <string>
#include <vector>

namespace lltn {

/// First `length` frames of `seq`; a shorter sequence is extended by
/// repeating its last frame.
MotionSequence fit_length(const MotionSequence& seq, int length);

/// A uniformly chosen training listener, cut to `length` frames.
MotionSequence baseline_random_train(const std::vector<DyadSegment>& train, Rng& rng, int length);

/// ceil(length / r) uniform codebook tokens, decoded and trimmed.
MotionSequence baseline_random_vq(const VqParams& vq, Rng& rng, int length);

/// The training mean frame repeated.
class MeanBaseline {
 public:
  explicit MeanBaseline(const std::vector<DyadSegment>& train);
  MotionSequence generate(int length) const;
  const Vec& mean() const { return mean_; }

 private:
  Vec mean_;
  int fps_ = kDefaultFps;
};

/// Sparse TF-IDF vector: term -> weight, L2-normalized.
using SparseVec = std::map<std::string, double>;

/// Unigrams and bigrams of the tokenized text, joined with a space.
std::vector<std::string> ngram_terms(const std::string& text);

double cosine(const SparseVec& a, const SparseVec& b);

struct NnIndexConfig {
  double history_seconds = 3.0;
  /// Only training segments at least this long are indexed.
  int min_frames = 240;
};

/// Text retrieval over training segments. The key of a segment is its
/// history words inside the history window followed by its own words.
class NnIndex {
 public:
  struct Entry {
    std::string segment_id;
    std::string key;
    SparseVec vector;
    MotionSequence motion;
  };

  NnIndex() = default;
  static NnIndex build(const std::vector<DyadSegment>& train, const NnIndexConfig& cfg = {});

  static std::string key_of(const DyadSegment& seg, double history_seconds);
  SparseVec vectorize(const std::string& text) const;

  /// Index of the best entry for `text`: highest cosine, smallest key on ties.
  std::size_t nearest(const std::string& text) const;
  /// Retrieved listener motion fit to the query's length.
  MotionSequence query(const DyadSegment& seg) const;

  const std::vector<Entry>& entries() const { return entries_; }
  const NnIndexConfig& config() const { return config_; }

  nlohmann::json to_json() const;
  static NnIndex from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static NnIndex load(const std::string& path);

 private:
  NnIndexConfig config_;
  std::map<std::string, double> idf_;
  std::vector<Entry> entries_;
};

/// Listener model trained on SPACE + motion streams with all text removed.
LmTrainResult baseline_uncond(const std::vector<DyadSegment>& train, const VqParams& vq, const Vocabulary& vocab,
                              const LmConfig& cfg, const InterleaveConfig& interleave, std::uint64_t seed,
                              const LmProgress& progress = {});

}  // namespace lltn
