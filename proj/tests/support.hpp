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

// Helpers shared by the unit tests and the acceptance runner.

#pragma once

#include "lltn/lm.hpp"
#include "lltn/nn.hpp"
#include "lltn/rng.hpp"
#include "lltn/synthetic.hpp"
#include "lltn/types.hpp"
#include "lltn/vq.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <unistd.h>
#include <string>
#include <vector>

namespace lltn::testing {

struct GradReport {
  double max_error = 0;
  std::string worst;
  long checked = 0;
};

/// |a - n| / max(|a| + |n|, floor): the floor keeps coordinates whose true
/// gradient is ~0 from dominating through round-off.
inline double grad_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

/// Central differences of `loss` against `grads` for every coordinate of
/// `params` (or `max_per_tensor` random ones when positive).
inline GradReport check_gradients(const nn::ParamList& params, const nn::ParamList& grads,
                                  const std::function<double()>& loss, Rng& rng, int max_per_tensor = 0,
                                  double h = 1e-4) {
  GradReport rep;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Mat& w = *params[p].value;
    const Mat& g = *grads[p].value;
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(w.size()));
    for (Eigen::Index i = 0; i < w.size(); ++i) coords[static_cast<std::size_t>(i)] = i;
    if (max_per_tensor > 0 && static_cast<int>(coords.size()) > max_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<std::size_t>(max_per_tensor));
    }
    for (auto i : coords) {
      double& x = w.data()[i];
      const double saved = x;
      auto at = [&](double d) {
        x = saved + d;
        return loss();
      };
      // Five-point central stencil, shrinking the step while it disagrees. A
      // ReLU kink within 2h spoils the larger steps; roundoff spoils the
      // smallest ones on tiny gradients.
      auto stencil = [&](double s) { return (8 * (at(s) - at(-s)) - (at(2 * s) - at(-2 * s))) / (12 * s); };
      double e = grad_error(g.data()[i], stencil(h));
      for (double s : {h / 10, h / 100, h / 1000})
        if (e > 1e-6) e = std::min(e, grad_error(g.data()[i], stencil(s)));
      x = saved;
      ++rep.checked;
      if (e > rep.max_error) {
        rep.max_error = e;
        rep.worst = params[p].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return rep;
}

inline Mat random_mat(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng, 0.0, scale);
  return m;
}

/// A small synthetic corpus that trains in seconds.
inline SynthConfig tiny_synth(std::uint64_t seed) {
  SynthConfig c;
  c.expression_dim = 8;
  c.train_sessions = 3;
  c.val_sessions = 1;
  c.test_sessions = 1;
  c.turns_per_session = 4;
  c.seed = seed;
  return c;
}

inline VqConfig tiny_vq() {
  VqConfig c;
  c.codebook_size = 16;
  c.embed_dim = 8;
  c.downsample_levels = 3;
  c.channel_width = 8;
  c.batch_size = 4;
  c.total_steps = 40;
  c.warmup_steps = 5;
  c.decay_step = 30;
  c.reset_interval = 10;
  c.learning_rate = 2e-3;
  return c;
}

inline LmConfig tiny_lm() {
  LmConfig c;
  c.layers = 1;
  c.model_dim = 16;
  c.heads = 2;
  c.max_positions = 512;
  c.learning_rate = 1e-3;
  c.max_steps = 20;
  c.batch_size = 2;
  c.early_stop_window = 1000;
  return c;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("lltn-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace lltn::testing
