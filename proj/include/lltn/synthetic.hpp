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

// Synthetic dyadic conversations with known text -> listener couplings:
//   * listener valence follows the polarity of the speaker's most recent
//     polar word seen `lag_frames` earlier, with strength kappa;
//   * the listener nods (one pitch sine period) shortly after '.', '!' or '?'
//     with probability rho;
//   * everything else is smooth noise.
// The speaker talks in turns whose polar words all share one polarity, and the
// listener's expression is low dimensional so a small codebook can cover it.

#pragma once

#include "lltn/dataset.hpp"
#include "lltn/metrics.hpp"
#include "lltn/types.hpp"
#include "lltn/vq.hpp"
#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lltn {

struct SynthConfig {
  std::vector<std::string> positive_words{"great", "love", "wonderful", "happy", "amazing", "fantastic", "nice", "fun"};
  std::vector<std::string> negative_words{"terrible", "hate", "awful", "sad", "horrible", "angry", "bad", "boring"};
  std::vector<std::string> neutral_words{"the", "a", "we", "it", "was", "there", "then", "they", "went", "thing",
                                         "show", "today", "people", "very", "really", "just", "about", "time"};
  std::vector<std::string> conjunctions{"and", "but", "so"};

  int expression_dim = 50;
  int fps = kDefaultFps;

  double kappa = 0.9;            // affect coupling strength
  int lag_frames = 0;            // delay between a polar word and the reaction
  double affect_amplitude = 0.8;
  double affect_smoothing = 0.2;  // per-frame approach rate toward the target
  double rho = 0.8;               // nod probability after end punctuation
  double nod_amplitude = 0.15;    // radians of pitch
  int nod_frames = 8;
  int nod_delay_frames = 3;
  double noise = 0.02;            // per-coefficient white noise
  double words_per_second = 2.5;

  int train_sessions = 24;
  int val_sessions = 4;
  int test_sessions = 6;
  int turns_per_session = 8;
  int min_turn_frames = 24;   // segment frames after the onset
  int max_turn_frames = 300;
  SegmentationConfig segmentation;

  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SynthConfig& c);
SynthConfig synth_config_from(const nlohmann::json& j);

struct SynthCorpus {
  Dataset train, val, test;
  AffectModel affect;
};

/// Unsegmented session `index` of the corpus (split-independent stream).
Session generate_session(const SynthConfig& cfg, const std::string& id, std::uint64_t index);

SynthCorpus generate_corpus(const SynthConfig& cfg);

/// Ground-truth affect direction: the returned model reads the latent valence
/// back from a listener frame exactly when noise is zero.
AffectModel synth_affect_model(const SynthConfig& cfg);

/// -1, 0 or +1 from the configured word lists.
int word_sentiment(const SynthConfig& cfg, const std::string& word);

/// A run of words closed by punctuation (or the end of the segment).
struct Phrase {
  std::string text;
  int first_frame = 0;  // end frame of the first word
  int last_frame = 0;   // end frame of the last token
  double sentiment = 0;  // mean word label
};

std::vector<Phrase> split_phrases(const SynthConfig& cfg, const std::vector<TimedToken>& words);

struct PhraseHistogram {
  std::vector<double> edges;  // bins + 1 edges over [-1, 1]
  std::vector<int> positive;
  std::vector<int> negative;
  std::vector<double> positive_values;
  std::vector<double> negative_values;

  std::string to_csv() const;
};

/// Listener affect averaged over each phrase and the following
/// `after_seconds`, for the k most positive and k most negative phrases.
PhraseHistogram affect_phrase_histogram(const SynthConfig& cfg, const Dataset& ds, const AffectModel& model,
                                        int k = 100, int bins = 20, double after_seconds = 2.0);

/// A token window is a nod when its pitch peak-to-peak exceeds `threshold`.
struct NodClassifier {
  double threshold = 0;
  bool is_nod(const MotionSequence& window) const;
};

/// threshold = 3 x robust (MAD) standard deviation of listener pitch.
NodClassifier fit_nod_classifier(const Dataset& ds);

struct NodRow {
  std::string label;  // "code N", "all nods" or "plain"
  int code = -1;
  int count = 0;
  std::vector<double> percent;  // one per column
};

struct NodTable {
  std::vector<std::string> columns;  // the marks and conjunctions counted
  std::vector<NodRow> rows;

  std::string to_csv() const;
  /// Share of rows' occurrences preceded by any of '.', '!', '?'.
  double end_punctuation_rate(const std::string& label) const;
};

/// Each codebook entry decoded alone is classified nod/plain. For every token
/// of every listener, the `context` text tokens preceding it in the stream
/// are searched for each column entry.
NodTable punctuation_nod_stats(const SynthConfig& cfg, const Dataset& ds, const VqParams& vq,
                               const NodClassifier& classifier, int context = 5);

}  // namespace lltn
