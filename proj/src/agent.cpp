// Copyright 2026 The RIGL Authors.
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

#include "rigl/agent.hpp"

#include <cmath>
#include <sstream>

namespace rigl {

Vec pool_kg(const KgState& state, const SpatialKG& kg) {
  const auto d = static_cast<Eigen::Index>(state.dim());
  if (static_cast<std::size_t>(state.heads.cols()) != kg.num_pois() ||
      static_cast<std::size_t>(state.tails.cols()) != kg.num_tails()) {
    fail(ErrorKind::kInvalidArgument, "KG state does not match the spatial KG");
  }
  Vec belong = Vec::Zero(d);
  Vec locate = Vec::Zero(d);
  std::size_t nb = 0;
  std::size_t nl = 0;
  for (std::size_t p = 0; p < kg.num_pois(); ++p) {
    belong += state.heads.col(static_cast<Eigen::Index>(p));
    locate += state.heads.col(static_cast<Eigen::Index>(p));
    ++nb;
    ++nl;
  }
  for (std::size_t c = 0; c < kg.num_categories(); ++c, ++nb)
    belong += state.tails.col(static_cast<Eigen::Index>(kg.category_tail(c)));
  for (std::size_t z = 0; z < kg.num_zones(); ++z, ++nl)
    locate += state.tails.col(static_cast<Eigen::Index>(kg.zone_tail(z)));
  Vec g = Vec::Zero(d);
  if (nb > 0) g += 0.5 * belong / static_cast<double>(nb);
  if (nl > 0) g += 0.5 * locate / static_cast<double>(nl);
  return g;
}

QNetwork::QNetwork(std::size_t input, const std::vector<std::size_t>& hidden, std::size_t output,
                   std::uint64_t seed) {
  if (input == 0 || output == 0) fail(ErrorKind::kConfig, "network dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::size_t fan_in = input;
  std::vector<std::size_t> sizes = hidden;
  sizes.push_back(output);
  for (std::size_t out : sizes) {
    if (out == 0) fail(ErrorKind::kConfig, "hidden layer sizes must be positive");
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    DenseLayer layer;
    layer.w = Mat(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(fan_in));
    for (Eigen::Index j = 0; j < layer.w.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.w.rows(); ++i) layer.w(i, j) = dist(rng);
    layer.b = Vec::Zero(static_cast<Eigen::Index>(out));
    layers_.push_back(std::move(layer));
    fan_in = out;
  }
}

QNetwork::QNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) fail(ErrorKind::kInvalidArgument, "network needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].b.size() != layers_[i].w.rows() ||
        (i > 0 && layers_[i].w.cols() != layers_[i - 1].w.rows())) {
      fail(ErrorKind::kInvalidArgument, "inconsistent layer shapes");
    }
  }
}

QNetwork QNetwork::zeros_like(const QNetwork& net) {
  std::vector<DenseLayer> layers;
  for (const auto& l : net.layers_) {
    layers.push_back({Mat::Zero(l.w.rows(), l.w.cols()), Vec::Zero(l.b.size())});
  }
  QNetwork z;
  z.layers_ = std::move(layers);
  return z;
}

std::size_t QNetwork::input_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().w.cols());
}

std::size_t QNetwork::output_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().w.rows());
}

std::size_t QNetwork::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.w.size() + l.b.size());
  return n;
}

Vec QNetwork::forward(const Vec& x) const {
  Cache unused;
  return forward(x, unused);
}

Vec QNetwork::forward(const Vec& x, Cache& cache) const {
  if (static_cast<std::size_t>(x.size()) != input_dim()) {
    fail(ErrorKind::kInvalidArgument, "network input has length " + std::to_string(x.size()) +
                                          ", expected " + std::to_string(input_dim()));
  }
  cache.inputs.clear();
  cache.pre.clear();
  Vec a = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    cache.inputs.push_back(a);
    Vec z = layers_[i].w * a + layers_[i].b;
    cache.pre.push_back(z);
    a = i + 1 < layers_.size() ? Vec(z.cwiseMax(0.0)) : z;
  }
  return a;
}

Vec QNetwork::backward(const Cache& cache, const Vec& d_out, QNetwork& grad) const {
  Vec delta = d_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    if (k + 1 < layers_.size()) {
      delta = delta.cwiseProduct((cache.pre[k].array() > 0.0).cast<double>().matrix());
    }
    grad.layers_[k].w += delta * cache.inputs[k].transpose();
    grad.layers_[k].b += delta;
    delta = layers_[k].w.transpose() * delta;
  }
  return delta;
}

Vec QNetwork::input_gradient(const Cache& cache, std::size_t action) const {
  if (action >= output_dim()) fail(ErrorKind::kInvalidArgument, "action out of range");
  Vec delta = layers_.back().w.row(static_cast<Eigen::Index>(action)).transpose();
  for (std::size_t k = layers_.size() - 1; k-- > 0;) {
    delta = delta.cwiseProduct((cache.pre[k].array() > 0.0).cast<double>().matrix());
    delta = layers_[k].w.transpose() * delta;
  }
  return delta;
}

void QNetwork::add_scaled(const QNetwork& other, double scale) {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    layers_[k].w += scale * other.layers_[k].w;
    layers_[k].b += scale * other.layers_[k].b;
  }
}

bool QNetwork::all_finite() const {
  for (const auto& l : layers_) {
    if (!l.w.allFinite() || !l.b.allFinite()) return false;
  }
  return true;
}

bool operator==(const QNetwork& a, const QNetwork& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t k = 0; k < a.layers_.size(); ++k) {
    const auto& x = a.layers_[k];
    const auto& y = b.layers_[k];
    if (x.w.rows() != y.w.rows() || x.w.cols() != y.w.cols() || x.w != y.w || x.b != y.b) {
      return false;
    }
  }
  return true;
}

SparseQGradient::SparseQGradient(const QNetwork& like) {
  const auto& layers = like.layers();
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
    hidden_.push_back(
        {Mat::Zero(layers[k].w.rows(), layers[k].w.cols()), Vec::Zero(layers[k].b.size())});
  }
}

Vec SparseQGradient::accumulate(const QNetwork& net, const QNetwork::Cache& cache,
                                std::size_t action, double g) {
  const auto& layers = net.layers();
  const std::size_t last = layers.size() - 1;
  if (action >= net.output_dim()) fail(ErrorKind::kInvalidArgument, "action out of range");
  const auto a = static_cast<Eigen::Index>(action);
  auto [it, inserted] = out_rows_.try_emplace(
      action, std::pair{Vec::Zero(layers[last].w.cols()), 0.0});
  it->second.first += g * cache.inputs[last];
  it->second.second += g;
  Vec delta = g * layers[last].w.row(a).transpose();
  for (std::size_t k = last; k-- > 0;) {
    delta = delta.cwiseProduct((cache.pre[k].array() > 0.0).cast<double>().matrix());
    hidden_[k].w += delta * cache.inputs[k].transpose();
    hidden_[k].b += delta;
    delta = layers[k].w.transpose() * delta;
  }
  return delta;
}

void SparseQGradient::apply(QNetwork& net, double scale) const {
  auto& layers = net.layers();
  for (std::size_t k = 0; k < hidden_.size(); ++k) {
    layers[k].w += scale * hidden_[k].w;
    layers[k].b += scale * hidden_[k].b;
  }
  auto& out = layers.back();
  for (const auto& [row, g] : out_rows_) {
    const auto r = static_cast<Eigen::Index>(row);
    out.w.row(r) += scale * g.first.transpose();
    out.b(r) += scale * g.second;
  }
}

double SparseQGradient::squared_norm() const {
  double s = 0.0;
  for (const auto& layer : hidden_) s += layer.w.squaredNorm() + layer.b.squaredNorm();
  for (const auto& [row, g] : out_rows_) s += g.first.squaredNorm() + g.second * g.second;
  return s;
}

QNetwork SparseQGradient::to_dense(const QNetwork& like) const {
  QNetwork dense = QNetwork::zeros_like(like);
  apply(dense, 1.0);
  return dense;
}

namespace {

void check_halves(const Vec& v) {
  if (v.size() % 2 != 0) fail(ErrorKind::kInvalidArgument, "observation must have two halves");
}

}  // namespace

Vec scale_state(const Vec& obs, StateScaling scaling) {
  if (scaling == StateScaling::kNone) return obs;
  check_halves(obs);
  const Eigen::Index h = obs.size() / 2;
  Vec out = obs;
  for (Eigen::Index start : {Eigen::Index{0}, h}) {
    const double n = obs.segment(start, h).norm();
    if (n > 0.0) out.segment(start, h) /= n;
  }
  return out;
}

Vec scale_state_backward(const Vec& obs, StateScaling scaling, const Vec& d_scaled) {
  if (scaling == StateScaling::kNone) return d_scaled;
  check_halves(obs);
  const Eigen::Index h = obs.size() / 2;
  Vec out = Vec::Zero(obs.size());
  for (Eigen::Index start : {Eigen::Index{0}, h}) {
    const double n = obs.segment(start, h).norm();
    if (n == 0.0) continue;
    const Vec y = obs.segment(start, h) / n;
    const Vec dy = d_scaled.segment(start, h);
    out.segment(start, h) = (dy - y * y.dot(dy)) / n;
  }
  return out;
}

std::size_t greedy_action(const Vec& q) {
  if (q.size() == 0) fail(ErrorKind::kInvalidArgument, "empty action space");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i) {
    if (q(i) > q(best)) best = i;
  }
  return static_cast<std::size_t>(best);
}

std::size_t select_action(const Vec& q, double epsilon, std::mt19937_64& rng) {
  if (q.size() == 0) fail(ErrorKind::kInvalidArgument, "empty action space");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(q.size()) - 1);
    return pick(rng);
  }
  return greedy_action(q);
}

double compute_target(PolicyVariant variant, double reward, const Vec& q_e_next,
                      const Vec& q_t_next, double gamma) {
  if (q_t_next.size() == 0 || q_e_next.size() != q_t_next.size()) {
    fail(ErrorKind::kInvalidArgument, "target networks disagree on the action space");
  }
  if (variant == PolicyVariant::kDqn) return reward + gamma * q_t_next.maxCoeff();
  return reward + gamma * q_t_next(static_cast<Eigen::Index>(greedy_action(q_e_next)));
}

void AgentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) fail(ErrorKind::kConfig, "gamma must lie in [0, 1)");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail(ErrorKind::kConfig, "lr must be positive");
  if (!(env_lr >= 0.0) || !std::isfinite(env_lr)) {
    fail(ErrorKind::kConfig, "env_lr must be non-negative");
  }
  if (!(env_clip > 0.0)) fail(ErrorKind::kConfig, "env_clip must be positive");
  if (!(grad_clip >= 0.0)) fail(ErrorKind::kConfig, "grad_clip must be >= 0");
  if (target_sync < 1) fail(ErrorKind::kConfig, "target_sync must be >= 1");
  if (train_every < 1) fail(ErrorKind::kConfig, "train_every must be >= 1");
  if (batch < 1) fail(ErrorKind::kConfig, "batch must be >= 1");
  if (capacity < 1) fail(ErrorKind::kConfig, "capacity must be >= 1");
  for (double e : {eps_start, eps_end}) {
    if (!(e >= 0.0 && e <= 1.0)) fail(ErrorKind::kConfig, "epsilon values must lie in [0, 1]");
  }
  if (!(eps_fraction >= 0.0 && eps_fraction <= 1.0)) {
    fail(ErrorKind::kConfig, "eps_fraction must lie in [0, 1]");
  }
  for (std::size_t h : hidden) {
    if (h == 0) fail(ErrorKind::kConfig, "hidden layer sizes must be positive");
  }
}

double epsilon_at(const AgentConfig& cfg, std::uint64_t step, std::uint64_t total_steps) {
  const double horizon = cfg.eps_fraction * static_cast<double>(total_steps);
  if (horizon <= 0.0) return cfg.eps_end;
  const double frac = std::min(1.0, static_cast<double>(step) / horizon);
  return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac;
}

LossResult td_loss(std::span<const Transition> batch, const QNetwork& q_e, const QNetwork& q_t,
                   PolicyVariant variant, double gamma, SparseQGradient* grad) {
  if (batch.empty()) fail(ErrorKind::kInvalidArgument, "empty training batch");
  LossResult out;
  const double n = static_cast<double>(batch.size());
  QNetwork::Cache cache;
  for (const auto& t : batch) {
    const double y = compute_target(variant, t.reward, q_e.forward(t.next_state),
                                    q_t.forward(t.next_state), gamma);
    const Vec q = q_e.forward(t.state, cache);
    if (t.action >= static_cast<std::size_t>(q.size())) {
      fail(ErrorKind::kInvalidArgument, "transition action out of range");
    }
    const double pred = q(static_cast<Eigen::Index>(t.action));
    const double diff = pred - y;
    out.loss += diff * diff / n;
    out.targets.push_back(y);
    out.predictions.push_back(pred);
    if (grad != nullptr) grad->accumulate(q_e, cache, t.action, 2.0 * diff / n);
  }
  return out;
}

LossResult train_step(std::span<const Transition> batch, QNetwork& q_e, const QNetwork& q_t,
                      PolicyVariant variant, double gamma, double lr, double clip) {
  SparseQGradient grad(q_e);
  LossResult res = td_loss(batch, q_e, q_t, variant, gamma, &grad);
  if (!std::isfinite(res.loss)) {
    std::ostringstream diag;
    diag << "non-finite TD loss " << res.loss << " on a batch of " << batch.size() << ":";
    for (std::size_t i = 0; i < batch.size() && i < 8; ++i) {
      diag << " [a=" << batch[i].action << " r=" << batch[i].reward
           << " q=" << res.predictions[i] << " y=" << res.targets[i] << "]";
    }
    fail(ErrorKind::kNumeric, diag.str());
  }
  double step = lr;
  if (clip > 0.0) {
    const double norm = std::sqrt(grad.squared_norm());
    if (norm > clip) step *= clip / norm;
  }
  grad.apply(q_e, -step);
  if (!q_e.all_finite()) fail(ErrorKind::kNumeric, "Q-network parameters became non-finite");
  return res;
}

bool sync_target(const QNetwork& q_e, QNetwork& q_t, std::uint64_t step, std::size_t k) {
  if (k == 0) fail(ErrorKind::kConfig, "target_sync must be >= 1");
  if (step == 0 || step % k != 0) return false;
  q_t = q_e;
  return true;
}

}  // namespace rigl
