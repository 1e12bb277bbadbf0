#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ptx/classifiers/classifier.hpp"
#include "ptx/rng.hpp"

namespace ptx {

struct MlpParams {
  std::size_t hidden = 13;
  std::size_t max_iter = 500;
  double lr_init = 0.3;
  double momentum = 0.2;
  double alpha = 1e-5;
  double tol = 1e-6;
  std::size_t stall_epochs = 10;
  double min_lr = 1e-6;
  bool shuffle = true;  // full-batch updates make this a no-op
  bool zero_init = false;
  bool standardize = true;
  std::uint64_t seed = 0;
};

/// Parameter layout: W1 (hidden x in), b1, W2 (out x hidden), b2.
struct MlpNet {
  std::size_t in = 0, hidden = 0, out = 0;
  std::vector<double> theta;

  std::size_t size() const { return hidden * in + hidden + out * hidden + out; }
  std::size_t b1() const { return hidden * in; }
  std::size_t w2() const { return b1() + hidden; }
  std::size_t b2() const { return w2() + out * hidden; }

  double weight_norm_sq() const {
    double s = 0;
    for (std::size_t i = 0; i < b1(); ++i) s += theta[i] * theta[i];
    for (std::size_t i = w2(); i < b2(); ++i) s += theta[i] * theta[i];
    return s;
  }

  void forward(const double* x, std::vector<double>& h, std::vector<double>& o) const {
    h.assign(hidden, 0.0);
    o.assign(out, 0.0);
    for (std::size_t j = 0; j < hidden; ++j) {
      double z = theta[b1() + j];
      const double* w = &theta[j * in];
      for (std::size_t i = 0; i < in; ++i) z += w[i] * x[i];
      h[j] = 1 / (1 + std::exp(-z));
    }
    double mx = -1e300;
    for (std::size_t c = 0; c < out; ++c) {
      double z = theta[b2() + c];
      const double* w = &theta[w2() + c * hidden];
      for (std::size_t j = 0; j < hidden; ++j) z += w[j] * h[j];
      o[c] = z;
      mx = std::max(mx, z);
    }
    double total = 0;
    for (double& v : o) total += (v = std::exp(v - mx));
    for (double& v : o) v /= total;
  }
};

/// Mean cross-entropy plus alpha/(2n) times the squared weight norm (biases
/// unpenalized). Fills `grad` when non-null.
inline double mlp_loss(const MlpNet& net, const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                       double alpha, std::vector<double>* grad) {
  const double n = static_cast<double>(x.size());
  if (grad) grad->assign(net.size(), 0.0);
  std::vector<double> h, o, d1(net.hidden);
  double loss = 0;
  for (std::size_t s = 0; s < x.size(); ++s) {
    net.forward(x[s].data(), h, o);
    loss -= std::log(std::max(o[static_cast<std::size_t>(y[s])], 1e-300));
    if (!grad) continue;
    auto& g = *grad;
    std::fill(d1.begin(), d1.end(), 0.0);
    for (std::size_t c = 0; c < net.out; ++c) {
      const double d2 = (o[c] - (static_cast<int>(c) == y[s] ? 1.0 : 0.0)) / n;
      g[net.b2() + c] += d2;
      const double* w = &net.theta[net.w2() + c * net.hidden];
      double* gw = &g[net.w2() + c * net.hidden];
      for (std::size_t j = 0; j < net.hidden; ++j) {
        gw[j] += d2 * h[j];
        d1[j] += w[j] * d2;
      }
    }
    for (std::size_t j = 0; j < net.hidden; ++j) {
      const double dz = d1[j] * h[j] * (1 - h[j]);
      g[net.b1() + j] += dz;
      double* gw = &g[j * net.in];
      for (std::size_t i = 0; i < net.in; ++i) gw[i] += dz * x[s][i];
    }
  }
  loss = loss / n + alpha / (2 * n) * net.weight_norm_sq();
  if (grad) {
    for (std::size_t i = 0; i < net.b1(); ++i) (*grad)[i] += alpha / n * net.theta[i];
    for (std::size_t i = net.w2(); i < net.b2(); ++i) (*grad)[i] += alpha / n * net.theta[i];
  }
  return loss;
}

/// One-hidden-layer logistic network with softmax output, trained by
/// full-batch gradient descent with momentum. The learning rate halves after
/// `stall_epochs` epochs without a loss improvement of at least `tol`;
/// training stops at max_iter or once the rate falls below min_lr.
class MlpClassifier final : public Classifier {
public:
  struct History {
    std::vector<double> loss;
    std::size_t halvings = 0;
  };

  MlpClassifier() = default;

  static MlpClassifier fit(const TrainingData& d, const MlpParams& p = {}, History* history = nullptr) {
    check_training(d);
    if (p.hidden == 0 || p.max_iter == 0 || !(p.lr_init > 0)) throw ParameterError("invalid MLP parameters");
    MlpClassifier m;
    m.labels_ = d.labels;
    m.dim_ = d.dim();
    m.mean_.assign(m.dim_, 0.0);
    m.scale_.assign(m.dim_, 1.0);
    if (p.standardize) {
      const double n = static_cast<double>(d.size());
      for (const auto& r : d.x)
        for (std::size_t j = 0; j < m.dim_; ++j) m.mean_[j] += r[j] / n;
      std::vector<double> var(m.dim_, 0.0);
      for (const auto& r : d.x)
        for (std::size_t j = 0; j < m.dim_; ++j) var[j] += (r[j] - m.mean_[j]) * (r[j] - m.mean_[j]) / n;
      for (std::size_t j = 0; j < m.dim_; ++j) m.scale_[j] = var[j] > 0 ? std::sqrt(var[j]) : 1.0;
    }
    std::vector<std::vector<double>> x(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) x[i] = m.transform(d.x[i]);

    m.net_ = initial_net(m.dim_, p.hidden, d.n_labels(), p.zero_init, p.seed);
    History hist;
    std::vector<double> grad, velocity(m.net_.size(), 0.0);
    double lr = p.lr_init, best = std::numeric_limits<double>::infinity();
    std::size_t stall = 0;
    for (std::size_t epoch = 1; epoch <= p.max_iter; ++epoch) {
      const double loss = mlp_loss(m.net_, x, d.y, p.alpha, &grad);
      if (!std::isfinite(loss)) throw TrainingError("MLP loss diverged at epoch " + std::to_string(epoch));
      hist.loss.push_back(loss);
      if (loss < best - p.tol) {
        best = loss;
        stall = 0;
      } else if (++stall >= p.stall_epochs) {
        lr /= 2;
        ++hist.halvings;
        stall = 0;
        if (lr < p.min_lr) break;
      }
      for (std::size_t i = 0; i < velocity.size(); ++i) {
        velocity[i] = p.momentum * velocity[i] - lr * grad[i];
        m.net_.theta[i] += velocity[i];
      }
    }
    if (history) *history = std::move(hist);
    return m;
  }

  static MlpNet initial_net(std::size_t in, std::size_t hidden, std::size_t out, bool zero, std::uint64_t seed) {
    MlpNet net{in, hidden, out, {}};
    net.theta.assign(net.size(), 0.0);
    if (zero) return net;
    Rng rng(seed);
    const double b1 = std::sqrt(6.0 / static_cast<double>(in + hidden));
    const double b2 = std::sqrt(6.0 / static_cast<double>(hidden + out));
    for (std::size_t i = 0; i < net.w2(); ++i) net.theta[i] = rng.uniform(-b1, b1);
    for (std::size_t i = net.w2(); i < net.size(); ++i) net.theta[i] = rng.uniform(-b2, b2);
    return net;
  }

  ModelKind kind() const override { return ModelKind::MLP; }
  const std::vector<std::string>& labels() const override { return labels_; }
  std::size_t dim() const override { return dim_; }
  const MlpNet& net() const noexcept { return net_; }

  std::vector<double> transform(const std::vector<double>& x) const {
    std::vector<double> z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean_[j]) / scale_[j];
    return z;
  }

  std::vector<double> probabilities(const std::vector<double>& x) const override {
    std::vector<double> h, o;
    const auto z = transform(x);
    net_.forward(z.data(), h, o);
    return o;
  }

  void save_payload(BinaryWriter& w) const override {
    w.strings(labels_);
    w.u64(dim_);
    w.vec(mean_);
    w.vec(scale_);
    w.u64(net_.hidden);
    w.vec(net_.theta);
  }

  static MlpClassifier load_payload(BinaryReader& r) {
    MlpClassifier m;
    m.labels_ = r.strings();
    m.dim_ = r.count();
    m.mean_ = r.vec();
    m.scale_ = r.vec();
    m.net_.in = m.dim_;
    m.net_.hidden = r.count();
    m.net_.out = m.labels_.size();
    m.net_.theta = r.vec();
    if (m.mean_.size() != m.dim_ || m.scale_.size() != m.dim_ || m.net_.theta.size() != m.net_.size())
      throw FormatError("MLP parameter count mismatch");
    return m;
  }

private:
  std::vector<std::string> labels_;
  std::size_t dim_ = 0;
  std::vector<double> mean_, scale_;
  MlpNet net_;
};

}  // namespace ptx
