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

#include "lltn/nn.hpp"

#include <cmath>

namespace lltn::nn {

void zero(const ParamList& params) {
  for (const auto& p : params) p.value->setZero();
}

std::size_t count_parameters(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.value->size());
  return n;
}

void round_to_float(const ParamList& params) {
  for (const auto& p : params)
    for (Eigen::Index i = 0; i < p.value->size(); ++i)
      p.value->data()[i] = static_cast<double>(static_cast<float>(p.value->data()[i]));
}

// ---------------------------------------------------------------------------

void Linear::init_normal(Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = normal(rng, 0.0, stddev);
  bias.setZero();
}

void Linear::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

Mat Linear::forward(const Mat& x) const {
  Mat y = x * weight;
  y.rowwise() += bias.row(0);
  return y;
}

Mat Linear::backward(const Mat& x, const Mat& dy, Linear& grad) const {
  grad.weight.noalias() += x.transpose() * dy;
  grad.bias += dy.colwise().sum();
  return dy * weight.transpose();
}

// ---------------------------------------------------------------------------

void Conv1d::init_kaiming(Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(weight.rows()));
  for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = normal(rng, 0.0, stddev);
  bias.setZero();
}

void Conv1d::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

Mat Conv1d::forward(const Mat& x, Cache& cache) const {
  const int in = in_channels();
  if (x.cols() != in) throw ShapeError("conv1d: expected " + std::to_string(in) + " input channels");
  const int T = static_cast<int>(x.rows());
  const int T_out = output_length(T);
  if (T_out <= 0) throw ShapeError("conv1d: input too short");
  cache.input_length = T;
  cache.cols.setZero(T_out, kernel * in);
  for (int t = 0; t < T_out; ++t) {
    for (int j = 0; j < kernel; ++j) {
      const int src = t * stride - pad + j;
      if (src < 0 || src >= T) continue;
      cache.cols.block(t, j * in, 1, in) = x.row(src);
    }
  }
  Mat y = cache.cols * weight;
  y.rowwise() += bias.row(0);
  return y;
}

Mat Conv1d::backward(const Mat& dy, const Cache& cache, Conv1d& grad) const {
  const int in = in_channels();
  grad.weight.noalias() += cache.cols.transpose() * dy;
  grad.bias += dy.colwise().sum();
  const Mat dcols = dy * weight.transpose();
  Mat dx = Mat::Zero(cache.input_length, in);
  for (int t = 0; t < dcols.rows(); ++t) {
    for (int j = 0; j < kernel; ++j) {
      const int src = t * stride - pad + j;
      if (src < 0 || src >= cache.input_length) continue;
      dx.row(src) += dcols.block(t, j * in, 1, in);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------

void LayerNorm::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".gain", &gain});
  out.push_back({prefix + ".bias", &bias});
}

Mat LayerNorm::forward(const Mat& x, Cache& cache) const {
  const double d = static_cast<double>(x.cols());
  const Vec mean = x.rowwise().mean();
  Mat centered = x.colwise() - mean;
  const Vec var = centered.array().square().rowwise().sum().matrix() / d;
  cache.inv_std = (var.array() + eps).rsqrt().matrix();
  cache.normalized = centered.array().colwise() * cache.inv_std.array();
  Mat y = cache.normalized.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

Mat LayerNorm::backward(const Mat& dy, const Cache& cache, LayerNorm& grad) const {
  const double d = static_cast<double>(dy.cols());
  grad.gain += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
  grad.bias += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * gain.row(0).array();
  const Vec sum_dxhat = dxhat.rowwise().sum();
  const Vec sum_dxhat_xhat = (dxhat.array() * cache.normalized.array()).rowwise().sum();
  Mat dx = (d * dxhat.array() - cache.normalized.array().colwise() * sum_dxhat_xhat.array())
               .colwise() -
           sum_dxhat.array();
  dx.array().colwise() *= cache.inv_std.array() / d;
  return dx;
}

// ---------------------------------------------------------------------------

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

Mat relu_backward(const Mat& x, const Mat& dy) {
  return (x.array() > 0.0).select(dy, 0.0);
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Mat gelu(const Mat& x) {
  return x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  });
}

Mat gelu_backward(const Mat& x, const Mat& dy) {
  Mat d = x.unaryExpr([](double v) {
    const double u = kGeluC * (v + kGeluA * v * v * v);
    const double th = std::tanh(u);
    const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
    return 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
  });
  return d.cwiseProduct(dy);
}

Mat upsample2(const Mat& x) {
  Mat y(2 * x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    y.row(2 * t) = x.row(t);
    y.row(2 * t + 1) = x.row(t);
  }
  return y;
}

Mat upsample2_backward(const Mat& dy) {
  Mat dx(dy.rows() / 2, dy.cols());
  for (Eigen::Index t = 0; t < dx.rows(); ++t) dx.row(t) = dy.row(2 * t) + dy.row(2 * t + 1);
  return dx;
}

double smooth_l1(const Mat& pred, const Mat& target) {
  const auto diff = (pred - target).array().abs();
  return (diff < 1.0).select(0.5 * diff.square(), diff - 0.5).sum();
}

Mat smooth_l1_grad(const Mat& pred, const Mat& target) {
  const Mat diff = pred - target;
  return diff.unaryExpr([](double v) { return std::abs(v) < 1.0 ? v : (v > 0 ? 1.0 : -1.0); });
}

// ---------------------------------------------------------------------------

void Adam::step(const ParamList& params, const ParamList& grads, double lr) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Mat& g = *grads[i].value;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    params[i].value->array() -=
        lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
  }
}

double LrSchedule::at(int step) const {
  double lr = base;
  if (warmup_steps > 0 && step < warmup_steps)
    lr *= static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  if (step >= decay_step) lr *= decay_factor;
  return lr;
}

}  // namespace lltn::nn
