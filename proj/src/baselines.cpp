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

#include "lltn/baselines.hpp"

#include "lltn/interleave.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace lltn {

using nlohmann::json;

MotionSequence fit_length(const MotionSequence& seq, int length) {
  if (length < 0) throw InvariantError("fit_length: negative length");
  if (seq.length() == 0 && length > 0) throw InvariantError("fit_length: cannot extend an empty sequence");
  Mat out(length, seq.frame_dim());
  const int keep = std::min(length, seq.length());
  out.topRows(keep) = seq.frames.topRows(keep);
  for (int t = keep; t < length; ++t) out.row(t) = seq.frames.row(seq.length() - 1);
  return MotionSequence(std::move(out), seq.fps);
}

MotionSequence baseline_random_train(const std::vector<DyadSegment>& train, Rng& rng, int length) {
  if (train.empty()) throw InvariantError("random-train baseline: empty training set");
  const auto k = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(train.size()) - 1));
  return fit_length(train[k].listener, length);
}

MotionSequence baseline_random_vq(const VqParams& vq, Rng& rng, int length) {
  if (length <= 0) throw InvariantError("random-VQ baseline: length must be positive");
  const int r = vq.frames_per_token();
  MotionTokenSequence toks;
  toks.frames_per_token = r;
  const int n = (length + r - 1) / r;
  for (int i = 0; i < n; ++i) toks.tokens.push_back(uniform_int(rng, 0, vq.codebook.size() - 1));
  toks.pad = n * r - length;
  return decode(vq, toks);
}

MeanBaseline::MeanBaseline(const std::vector<DyadSegment>& train) {
  if (train.empty()) throw InvariantError("mean baseline: empty training set");
  mean_ = compute_normalization(train).mean;
  fps_ = train.front().listener.fps;
}

MotionSequence MeanBaseline::generate(int length) const {
  if (length < 0) throw InvariantError("mean baseline: negative length");
  Mat out(length, mean_.size());
  for (int t = 0; t < length; ++t) out.row(t) = mean_.transpose();
  return MotionSequence(std::move(out), fps_);
}

// ---------------------------------------------------------------------------

std::vector<std::string> ngram_terms(const std::string& text) {
  const auto toks = tokenize_text(text);
  std::vector<std::string> terms(toks.begin(), toks.end());
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) terms.push_back(toks[i] + " " + toks[i + 1]);
  return terms;
}

double cosine(const SparseVec& a, const SparseVec& b) {
  double dot = 0, na = 0, nb = 0;
  for (const auto& [t, w] : a) {
    na += w * w;
    auto it = b.find(t);
    if (it != b.end()) dot += w * it->second;
  }
  for (const auto& [t, w] : b) nb += w * w;
  if (na == 0 || nb == 0) return 0;
  return dot / std::sqrt(na * nb);
}

namespace {

SparseVec tf_sublinear(const std::vector<std::string>& terms) {
  SparseVec tf;
  for (const auto& t : terms) tf[t] += 1;
  for (auto& [t, c] : tf) c = 1.0 + std::log(c);
  return tf;
}

void l2_normalize(SparseVec& v) {
  double n = 0;
  for (const auto& [t, w] : v) n += w * w;
  if (n == 0) return;
  n = std::sqrt(n);
  for (auto& [t, w] : v) w /= n;
}

json motion_json(const MotionSequence& m) {
  json rows = json::array();
  for (Eigen::Index t = 0; t < m.frames.rows(); ++t)
    rows.push_back(std::vector<double>(m.frames.row(t).data(), m.frames.row(t).data() + m.frames.cols()));
  return {{"fps", m.fps}, {"frames", rows}};
}

MotionSequence motion_from(const json& j) {
  const auto& rows = j.at("frames");
  const Eigen::Index T = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index D = T ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Mat f(T, D);
  for (Eigen::Index t = 0; t < T; ++t) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(t)].size()) != D)
      throw ParseError("nn index: ragged motion frames");
    for (Eigen::Index c = 0; c < D; ++c) f(t, c) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
  }
  return MotionSequence(std::move(f), j.value("fps", kDefaultFps));
}

}  // namespace

std::string NnIndex::key_of(const DyadSegment& seg, double history_seconds) {
  const int fps = seg.listener.fps;
  const int earliest = -static_cast<int>(std::lround(history_seconds * fps)) + 1;
  std::string key;
  auto add = [&](const std::string& w) {
    if (!key.empty()) key += ' ';
    key += w;
  };
  for (const auto& w : seg.history_words)
    if (w.end_frame >= earliest) add(w.text);
  for (const auto& w : seg.words) add(w.text);
  return key;
}

NnIndex NnIndex::build(const std::vector<DyadSegment>& train, const NnIndexConfig& cfg) {
  NnIndex index;
  index.config_ = cfg;
  // Deduplicate on keys, keeping the smallest segment id.
  std::map<std::string, const DyadSegment*> by_key;
  for (const auto& seg : train) {
    if (seg.length() < cfg.min_frames) continue;
    const std::string key = key_of(seg, cfg.history_seconds);
    auto [it, inserted] = by_key.emplace(key, &seg);
    if (!inserted && seg.id < it->second->id) it->second = &seg;
  }
  if (by_key.empty())
    throw InvariantError("nn index: no training segment has at least " + std::to_string(cfg.min_frames) + " frames");

  std::map<std::string, int> df;
  std::vector<SparseVec> tfs;
  for (const auto& [key, seg] : by_key) {
    tfs.push_back(tf_sublinear(ngram_terms(key)));
    for (const auto& [t, w] : tfs.back()) df[t] += 1;
  }
  const double N = static_cast<double>(by_key.size());
  for (const auto& [t, d] : df) index.idf_[t] = std::log((1.0 + N) / (1.0 + d)) + 1.0;

  std::size_t k = 0;
  for (const auto& [key, seg] : by_key) {
    SparseVec v = tfs[k++];
    for (auto& [t, w] : v) w *= index.idf_.at(t);
    l2_normalize(v);
    index.entries_.push_back({seg->id, key, std::move(v), seg->listener});
  }
  return index;
}

SparseVec NnIndex::vectorize(const std::string& text) const {
  SparseVec v;
  for (const auto& [t, c] : tf_sublinear(ngram_terms(text))) {
    auto it = idf_.find(t);
    if (it != idf_.end()) v[t] = c * it->second;
  }
  l2_normalize(v);
  return v;
}

std::size_t NnIndex::nearest(const std::string& text) const {
  if (entries_.empty()) throw InvariantError("nn index: empty index");
  const SparseVec q = vectorize(text);
  constexpr double kTie = 1e-12;
  std::size_t best = 0;
  double best_sim = cosine(q, entries_[0].vector);
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    const double s = cosine(q, entries_[i].vector);
    if (s > best_sim + kTie || (std::abs(s - best_sim) <= kTie && entries_[i].key < entries_[best].key)) {
      best = i;
      best_sim = s;
    }
  }
  return best;
}

MotionSequence NnIndex::query(const DyadSegment& seg) const {
  const auto& e = entries_[nearest(key_of(seg, config_.history_seconds))];
  return fit_length(e.motion, seg.length());
}

json NnIndex::to_json() const {
  json entries = json::array();
  for (const auto& e : entries_)
    entries.push_back({{"segment_id", e.segment_id}, {"key", e.key}, {"vector", e.vector}, {"motion", motion_json(e.motion)}});
  return {{"format", "lltn-nn-index-v1"},
          {"history_seconds", config_.history_seconds},
          {"min_frames", config_.min_frames},
          {"idf", idf_},
          {"entries", entries}};
}

NnIndex NnIndex::from_json(const json& j) {
  if (j.value("format", "") != "lltn-nn-index-v1") throw ParseError("nn index: unknown format");
  NnIndex index;
  index.config_.history_seconds = j.at("history_seconds").get<double>();
  index.config_.min_frames = j.at("min_frames").get<int>();
  index.idf_ = j.at("idf").get<std::map<std::string, double>>();
  std::set<std::string> keys;
  for (const auto& e : j.at("entries")) {
    Entry entry{e.at("segment_id").get<std::string>(), e.at("key").get<std::string>(),
                e.at("vector").get<SparseVec>(), motion_from(e.at("motion"))};
    if (!keys.insert(entry.key).second) throw ParseError("nn index: duplicate key '" + entry.key + "'");
    index.entries_.push_back(std::move(entry));
  }
  return index;
}

void NnIndex::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << to_json().dump() << '\n';
}

NnIndex NnIndex::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

LmTrainResult baseline_uncond(const std::vector<DyadSegment>& train, const VqParams& vq, const Vocabulary& vocab,
                              const LmConfig& cfg, const InterleaveConfig& interleave, std::uint64_t seed,
                              const LmProgress& progress) {
  LmTrainOptions options;
  options.config = cfg;
  options.interleave = interleave;
  options.ablation = Ablation::Uncond;
  return train_lm(train, vq, vocab, options, seed, progress);
}

}  // namespace lltn
