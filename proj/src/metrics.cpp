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

#include "lltn/metrics.hpp"

#include "lltn/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace lltn {

using nlohmann::json;

namespace {

constexpr double kCovJitter = 1e-10;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite input");
}

}  // namespace

double AffectModel::operator()(const Eigen::Ref<const RowVec>& expression) const {
  if (expression.size() != weights.size())
    throw ShapeError("affect: model expects " + std::to_string(weights.size()) + " expression coefficients, got " +
                     std::to_string(expression.size()));
  return std::clamp(expression.dot(weights.transpose()) + bias, -1.0, 1.0);
}

json AffectModel::to_json() const {
  return {{"weights", std::vector<double>(weights.data(), weights.data() + weights.size())}, {"bias", bias}};
}

AffectModel AffectModel::from_json(const json& j) {
  AffectModel m;
  const auto w = j.at("weights").get<std::vector<double>>();
  m.weights = Eigen::Map<const Vec>(w.data(), static_cast<Eigen::Index>(w.size()));
  m.bias = j.value("bias", 0.0);
  if (!m.weights.allFinite() || !std::isfinite(m.bias)) throw ParseError("affect model: non-finite parameters");
  return m;
}

void AffectModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << to_json().dump(2) << '\n';
}

AffectModel AffectModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

double affect(const AffectModel& model, const MotionSequence& seq, int frame) {
  return model(seq.frames.row(frame).head(seq.expression_dim()));
}

std::vector<double> window_affect(const AffectModel& model, const MotionSequence& seq, int window) {
  if (window <= 0) throw InvariantError("window_affect: window must be positive");
  const int n = seq.length();
  if (n == 0) return {};
  std::vector<double> per_frame(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) per_frame[static_cast<std::size_t>(t)] = affect(model, seq, t);
  const int w = std::min(window, n);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n - w + 1));
  double sum = std::accumulate(per_frame.begin(), per_frame.begin() + w, 0.0);
  out.push_back(sum / w);
  for (int t = w; t < n; ++t) {
    sum += per_frame[static_cast<std::size_t>(t)] - per_frame[static_cast<std::size_t>(t - w)];
    out.push_back(sum / w);
  }
  return out;
}

double l2_affect(const AffectModel& model, const MotionSequence& pred, const MotionSequence& gt, int window) {
  const auto a = window_affect(model, pred, window);
  const auto b = window_affect(model, gt, window);
  const std::size_t n = std::min(a.size(), b.size());
  if (n == 0) return 0;
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(n));
}

double l2_metric(const MotionSequence& pred, const MotionSequence& gt) {
  if (pred.frames.rows() != gt.frames.rows() || pred.frames.cols() != gt.frames.cols())
    throw ShapeError("l2_metric: prediction is " + std::to_string(pred.length()) + "x" +
                     std::to_string(pred.frame_dim()) + ", ground truth " + std::to_string(gt.length()) + "x" +
                     std::to_string(gt.frame_dim()));
  if (pred.length() == 0) return 0;
  return (pred.frames - gt.frames).rowwise().norm().mean();
}

double variation(const MotionSequence& seq) {
  if (seq.length() == 0) return 0;
  const RowVec mean = seq.frames.colwise().mean();
  return (seq.frames.rowwise() - mean).array().square().colwise().mean().mean();
}

double diversity(const MotionSequence& seq, Rng& rng, int pairs) {
  const int n = seq.length();
  if (n < 2 || pairs <= 0) return 0;
  double s = 0;
  for (int k = 0; k < pairs; ++k) {
    const int i = uniform_int(rng, 0, n - 1);
    int j = uniform_int(rng, 0, n - 2);
    if (j >= i) ++j;
    s += (seq.frames.row(i) - seq.frames.row(j)).norm();
  }
  return s / pairs;
}

Mat sqrt_psd(const Mat& a) {
  if (a.rows() != a.cols()) throw ShapeError("sqrt_psd: matrix is not square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw NumericError("sqrt_psd: eigen-decomposition failed");
  const Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

void mean_cov(const Mat& samples, RowVec& mean, Mat& cov) {
  if (samples.rows() == 0) throw InvariantError("mean_cov: no samples");
  mean = samples.colwise().mean();
  const Mat centered = samples.rowwise() - mean;
  cov = (centered.transpose() * centered) / static_cast<double>(samples.rows());
}

double frechet_distance(const RowVec& mu_a, const Mat& cov_a, const RowVec& mu_b, const Mat& cov_b) {
  const Eigen::Index d = mu_a.size();
  if (mu_b.size() != d || cov_a.rows() != d || cov_b.rows() != d)
    throw ShapeError("frechet_distance: dimension mismatch");
  const Mat ja = cov_a + kCovJitter * Mat::Identity(d, d);
  const Mat jb = cov_b + kCovJitter * Mat::Identity(d, d);
  const Mat root_a = sqrt_psd(ja);
  Mat middle = root_a * jb * root_a;
  middle = 0.5 * (middle + middle.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(middle, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("frechet_distance: eigen-decomposition failed");
  const double tr_root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double fd = (mu_a - mu_b).squaredNorm() + ja.trace() + jb.trace() - 2.0 * tr_root;
  return std::max(0.0, fd);
}

double frechet_distance(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) throw ShapeError("frechet_distance: sample dimensions differ");
  require_finite(a, "frechet_distance");
  require_finite(b, "frechet_distance");
  if (a.rows() == 0 || b.rows() == 0) throw InvariantError("frechet_distance: no samples");
  if (std::min(a.rows(), b.rows()) >= a.cols()) {
    RowVec ma, mb;
    Mat ca, cb;
    mean_cov(a, ma, ca);
    mean_cov(b, mb, cb);
    return frechet_distance(ma, ca, mb, cb);
  }
  // Fewer samples than dimensions. With cov = X^T X, tr sqrt(cov_a cov_b) is
  // the sum of singular values of X_a X_b^T, which is only Na x Nb.
  const RowVec ma = a.colwise().mean(), mb = b.colwise().mean();
  const Mat xa = (a.rowwise() - ma) / std::sqrt(static_cast<double>(a.rows()));
  const Mat xb = (b.rowwise() - mb) / std::sqrt(static_cast<double>(b.rows()));
  const Mat cross = xa * xb.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(cross);
  const double tr_root = svd.singularValues().sum();
  const double fd = (ma - mb).squaredNorm() + xa.squaredNorm() + xb.squaredNorm() - 2.0 * tr_root;
  return std::max(0.0, fd);
}

Mat window_samples(const std::vector<const Mat*>& seqs, int col, int cols, int window) {
  if (window <= 0) throw InvariantError("window_samples: window must be positive");
  Eigen::Index count = 0;
  for (const Mat* m : seqs) count += m->rows() / window;
  Mat out(count, static_cast<Eigen::Index>(window) * cols);
  Eigen::Index r = 0;
  for (const Mat* m : seqs) {
    for (Eigen::Index w = 0; w + window <= m->rows(); w += window, ++r) {
      for (int t = 0; t < window; ++t)
        out.row(r).segment(static_cast<Eigen::Index>(t) * cols, cols) = m->row(w + t).segment(col, cols);
    }
  }
  return out;
}

namespace {

std::vector<const Mat*> frame_ptrs(const std::vector<MotionSequence>& seqs) {
  std::vector<const Mat*> out;
  for (const auto& s : seqs) out.push_back(&s.frames);
  return out;
}

double fd_or_nan(const Mat& a, const Mat& b) {
  if (a.rows() == 0 || b.rows() == 0) return kNaN;
  return frechet_distance(a, b);
}

Mat concat_columns(const MotionSequence& listener, const MotionSequence& speaker) {
  if (listener.length() != speaker.length())
    throw ShapeError("paired_fd: listener and speaker lengths differ");
  const int dl = listener.expression_dim(), ds = speaker.expression_dim();
  Mat out(listener.length(), dl + ds + 2 * kRotationDims);
  out << listener.expression(), speaker.expression(), listener.rotation(), speaker.rotation();
  return out;
}

}  // namespace

FdPair fd_motion(const std::vector<MotionSequence>& pred, const std::vector<MotionSequence>& gt, int window) {
  if (pred.empty() || gt.empty()) throw InvariantError("fd_motion: empty sequence set");
  const int dm = pred.front().expression_dim();
  const auto p = frame_ptrs(pred), g = frame_ptrs(gt);
  FdPair out;
  out.expression = fd_or_nan(window_samples(p, 0, dm, window), window_samples(g, 0, dm, window));
  out.pose = fd_or_nan(window_samples(p, dm, kRotationDims, window), window_samples(g, dm, kRotationDims, window));
  return out;
}

namespace {

double paired_from_concat(const std::vector<Mat>& pc, const std::vector<Mat>& gc, int de, int window) {
  std::vector<const Mat*> p, g;
  for (const auto& m : pc) p.push_back(&m);
  for (const auto& m : gc) g.push_back(&m);
  const double e = fd_or_nan(window_samples(p, 0, de, window), window_samples(g, 0, de, window));
  const double r = fd_or_nan(window_samples(p, de, 2 * kRotationDims, window),
                             window_samples(g, de, 2 * kRotationDims, window));
  return e + r;
}

}  // namespace

double paired_fd(const std::vector<MotionSequence>& pred, const std::vector<MotionSequence>& speakers,
                 const std::vector<MotionSequence>& gt, int window) {
  if (pred.size() != speakers.size() || pred.size() != gt.size())
    throw ShapeError("paired_fd: set sizes differ");
  if (pred.empty()) throw InvariantError("paired_fd: empty sequence set");
  std::vector<Mat> pc, gc;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pc.push_back(concat_columns(pred[i], speakers[i]));
    gc.push_back(concat_columns(gt[i], speakers[i]));
  }
  const int de = pred.front().expression_dim() + speakers.front().expression_dim();
  return paired_from_concat(pc, gc, de, window);
}

namespace {

double entropy(const std::vector<double>& counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (total <= 0) return 0;
  double h = 0;
  for (double c : counts)
    if (c > 0) h -= (c / total) * std::log(c / total);
  return h;
}

}  // namespace

double shannon_index(const std::vector<MotionTokenSequence>& tokens) {
  std::vector<double> counts;
  for (const auto& seq : tokens)
    for (int t : seq.tokens) {
      if (t < 0) throw InvariantError("shannon_index: negative token");
      if (static_cast<std::size_t>(t) >= counts.size()) counts.resize(static_cast<std::size_t>(t) + 1, 0.0);
      counts[static_cast<std::size_t>(t)] += 1;
    }
  return entropy(counts);
}

namespace {

/// Resample r draws indices from counter stream r, so any statistic gets the
/// same resamples regardless of threads.
std::vector<std::size_t> resample_indices(std::size_t n, std::uint64_t seed, std::uint64_t r) {
  Rng rng = counter_stream(seed, r);
  std::vector<std::size_t> idx(n);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

double stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0;
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double s = 0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

}  // namespace

double bootstrap_se(const std::vector<double>& values, int resamples, std::uint64_t seed) {
  if (values.empty() || resamples <= 0) return 0;
  std::vector<double> means(static_cast<std::size_t>(resamples));
  parallel_for(means.size(), [&](std::size_t r) {
    const auto idx = resample_indices(values.size(), seed, r);
    double s = 0;
    for (auto i : idx) s += values[i];
    means[r] = s / static_cast<double>(values.size());
  });
  return stddev(means);
}

// ---------------------------------------------------------------------------

namespace {

json metric_json(const MetricValue& m) {
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  return {{"value", num(m.value)}, {"se", num(m.se)}};
}

MetricValue metric_from(const json& j) {
  auto num = [](const json& x) { return x.is_null() ? kNaN : x.get<double>(); };
  return {num(j.at("value")), num(j.at("se"))};
}

std::uint64_t id_hash(const std::string& id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

MetricValue mean_se(const std::vector<double>& xs, int resamples, std::uint64_t seed) {
  MetricValue m;
  m.value = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  m.se = bootstrap_se(xs, resamples, seed);
  return m;
}

}  // namespace

json MetricsReport::to_json() const {
  json metrics{{"l2", metric_json(l2)},
               {"fd_expression", metric_json(fd_expression)},
               {"fd_pose", metric_json(fd_pose)},
               {"fd", metric_json({fd_expression.value + fd_pose.value, std::hypot(fd_expression.se, fd_pose.se)})},
               {"variation", metric_json(variation)},
               {"diversity", metric_json(diversity)},
               {"l2_affect_x100", metric_json(l2_affect)}};
  metrics["pfd"] = pfd ? metric_json(*pfd) : json(nullptr);
  metrics["shannon_index"] = shannon_index ? metric_json(*shannon_index) : json(nullptr);
  return {{"segments", segments}, {"metrics", metrics}, {"warnings", warnings}};
}

MetricsReport MetricsReport::from_json(const json& j) {
  MetricsReport r;
  r.segments = j.at("segments").get<int>();
  const auto& m = j.at("metrics");
  r.l2 = metric_from(m.at("l2"));
  r.fd_expression = metric_from(m.at("fd_expression"));
  r.fd_pose = metric_from(m.at("fd_pose"));
  r.variation = metric_from(m.at("variation"));
  r.diversity = metric_from(m.at("diversity"));
  r.l2_affect = metric_from(m.at("l2_affect_x100"));
  if (m.contains("pfd") && !m["pfd"].is_null()) r.pfd = metric_from(m["pfd"]);
  if (m.contains("shannon_index") && !m["shannon_index"].is_null()) r.shannon_index = metric_from(m["shannon_index"]);
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

MetricsReport evaluate(const std::vector<MotionSequence>& predictions, const std::vector<DyadSegment>& segments,
                       const AffectModel& affect_model, const VqParams* vq, const EvalOptions& options) {
  if (predictions.size() != segments.size())
    throw ShapeError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(segments.size()) + " segments");
  if (segments.empty()) throw InvariantError("evaluate: no segments");

  // Work in segment-id order so the report does not depend on input order.
  std::vector<std::size_t> order(segments.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return segments[a].id < segments[b].id; });

  const std::size_t n = order.size();
  std::vector<MotionSequence> pred(n), gt(n);
  for (std::size_t k = 0; k < n; ++k) {
    pred[k] = predictions[order[k]];
    gt[k] = segments[order[k]].listener;
    if (pred[k].length() != gt[k].length() || pred[k].frame_dim() != gt[k].frame_dim())
      throw ShapeError("evaluate: prediction for segment '" + segments[order[k]].id + "' has shape " +
                       std::to_string(pred[k].length()) + "x" + std::to_string(pred[k].frame_dim()) + ", expected " +
                       std::to_string(gt[k].length()) + "x" + std::to_string(gt[k].frame_dim()));
  }

  const std::uint64_t boot_seed = substream_seed(options.seed, "bootstrap");
  const std::uint64_t div_seed = substream_seed(options.seed, "diversity");
  std::vector<double> l2(n), var(n), div(n), aff(n);
  parallel_for(n, [&](std::size_t k) {
    l2[k] = l2_metric(pred[k], gt[k]);
    var[k] = variation(pred[k]);
    Rng rng = counter_stream(div_seed, id_hash(segments[order[k]].id));
    div[k] = diversity(pred[k], rng, options.diversity_pairs);
    aff[k] = 100.0 * l2_affect(affect_model, pred[k], gt[k], pred[k].fps);
  });

  MetricsReport report;
  report.segments = static_cast<int>(n);
  report.l2 = mean_se(l2, options.bootstrap_resamples, boot_seed);
  report.variation = mean_se(var, options.bootstrap_resamples, boot_seed);
  report.diversity = mean_se(div, options.bootstrap_resamples, boot_seed);
  report.l2_affect = mean_se(aff, options.bootstrap_resamples, boot_seed);

  const FdPair fd = fd_motion(pred, gt, options.fd_window);
  report.fd_expression.value = fd.expression;
  report.fd_pose.value = fd.pose;
  if (!std::isfinite(fd.expression))
    report.warnings.push_back("no sequence spans a full " + std::to_string(options.fd_window) +
                              "-frame window; FD undefined");

  bool have_speakers = true;
  for (const auto& s : segments) have_speakers = have_speakers && s.speaker.has_value();
  std::vector<Mat> pc, gc;
  int de = 0;
  if (have_speakers) {
    for (std::size_t k = 0; k < n; ++k) {
      const auto& sp = *segments[order[k]].speaker;
      pc.push_back(concat_columns(pred[k], sp));
      gc.push_back(concat_columns(gt[k], sp));
    }
    de = pred.front().expression_dim() + segments[order[0]].speaker->expression_dim();
    report.pfd = MetricValue{paired_from_concat(pc, gc, de, options.fd_window), 0};
  } else {
    report.warnings.push_back("speaker motion missing; P-FD skipped");
  }

  if (options.fd_bootstrap_resamples > 0 && std::isfinite(fd.expression)) {
    const int R = options.fd_bootstrap_resamples;
    std::vector<double> fe(static_cast<std::size_t>(R)), fp(static_cast<std::size_t>(R)),
        ff(static_cast<std::size_t>(R));
    parallel_for(static_cast<std::size_t>(R), [&](std::size_t r) {
      const auto idx = resample_indices(n, boot_seed, r);
      std::vector<MotionSequence> ps, gs;
      std::vector<Mat> pcs, gcs;
      for (auto i : idx) {
        ps.push_back(pred[i]);
        gs.push_back(gt[i]);
        if (have_speakers) {
          pcs.push_back(pc[i]);
          gcs.push_back(gc[i]);
        }
      }
      const FdPair f = fd_motion(ps, gs, options.fd_window);
      fe[r] = f.expression;
      fp[r] = f.pose;
      if (have_speakers) ff[r] = paired_from_concat(pcs, gcs, de, options.fd_window);
    });
    auto finite = [](std::vector<double> xs) {
      xs.erase(std::remove_if(xs.begin(), xs.end(), [](double x) { return !std::isfinite(x); }), xs.end());
      return xs;
    };
    report.fd_expression.se = stddev(finite(fe));
    report.fd_pose.se = stddev(finite(fp));
    if (report.pfd) report.pfd->se = stddev(finite(ff));
  }

  if (vq) {
    std::vector<MotionTokenSequence> toks(n);
    parallel_for(n, [&](std::size_t k) { toks[k] = tokenize_motion(*vq, pred[k]); });
    MetricValue h{shannon_index(toks), 0};
    if (options.bootstrap_resamples > 0) {
      const std::size_t V = static_cast<std::size_t>(vq->codebook.size());
      std::vector<std::vector<double>> hist(n, std::vector<double>(V, 0.0));
      for (std::size_t k = 0; k < n; ++k)
        for (int t : toks[k].tokens) hist[k][static_cast<std::size_t>(t)] += 1;
      std::vector<double> hs(static_cast<std::size_t>(options.bootstrap_resamples));
      parallel_for(hs.size(), [&](std::size_t r) {
        std::vector<double> counts(V, 0.0);
        for (auto i : resample_indices(n, boot_seed, r))
          for (std::size_t v = 0; v < V; ++v) counts[v] += hist[i][v];
        hs[r] = entropy(counts);
      });
      h.se = stddev(hs);
    }
    report.shannon_index = h;
  }
  return report;
}

std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  const std::vector<std::string> header{"Method",    "L2",  "FD-expr", "FD-pose",           "FD",
                                        "Variation", "Diversity", "P-FD", "L2 Affect (10^2)", "Shannon"};
  auto cell = [](const std::optional<MetricValue>& m) -> std::string {
    if (!m || !std::isfinite(m->value)) return "-";
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << m->value << " ± " << m->se;
    return s.str();
  };
  std::vector<std::vector<std::string>> table{header};
  for (const auto& [name, r] : rows) {
    const MetricValue fd_sum{r.fd_expression.value + r.fd_pose.value, std::hypot(r.fd_expression.se, r.fd_pose.se)};
    table.push_back({name, cell(r.l2), cell(r.fd_expression), cell(r.fd_pose), cell(fd_sum), cell(r.variation),
                     cell(r.diversity), cell(r.pfd), cell(r.l2_affect), cell(r.shannon_index)});
  }
  // Display width: "±" is one column but two bytes.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : table)
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], width(row[c]));
  std::ostringstream out;
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << row[c] << std::string(widths[c] - width(row[c]), ' ');
      out << (c + 1 < row.size() ? "  " : "\n");
    }
  }
  return out.str();
}

}  // namespace lltn
