#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <string>
#include <unordered_map>
#include <vector>

#include "ptx/classifiers/classifier.hpp"

namespace ptx {

/// RBF Gram matrix over a training set. Small sets are materialized; larger
/// ones keep an LRU cache of rows.
class RbfKernel {
public:
  RbfKernel(const std::vector<std::vector<double>>& x, double gamma, std::size_t cache_bytes = std::size_t{256} << 20)
      : x_(x), gamma_(gamma) {
    const std::size_t n = x.size();
    sq_.resize(n);
    for (std::size_t i = 0; i < n; ++i) sq_[i] = dot(x[i], x[i]);
    capacity_ = std::max<std::size_t>(2, cache_bytes / (sizeof(double) * std::max<std::size_t>(n, 1)));
    if (capacity_ >= n) {
      full_.resize(n * n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) full_[i * n + j] = full_[j * n + i] = eval(i, j);
    }
  }

  std::size_t size() const noexcept { return x_.size(); }
  double gamma() const noexcept { return gamma_; }

  const double* row(std::size_t i) {
    const std::size_t n = x_.size();
    if (!full_.empty()) return full_.data() + i * n;
    if (auto it = index_.find(i); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second.data();
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    std::vector<double> r(n);
    for (std::size_t j = 0; j < n; ++j) r[j] = eval(i, j);
    lru_.emplace_front(i, std::move(r));
    index_[i] = lru_.begin();
    return lru_.front().second.data();
  }

  double diag(std::size_t) const { return 1.0; }

  static double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }

private:
  double eval(std::size_t i, std::size_t j) const {
    return std::exp(-gamma_ * std::max(0.0, sq_[i] + sq_[j] - 2 * dot(x_[i], x_[j])));
  }

  const std::vector<std::vector<double>>& x_;
  double gamma_;
  std::vector<double> sq_;
  std::vector<double> full_;
  std::size_t capacity_ = 0;
  std::list<std::pair<std::size_t, std::vector<double>>> lru_;
  std::unordered_map<std::size_t, decltype(lru_)::iterator> index_;
};

struct BinarySvmSolution {
  std::vector<double> alpha;
  double rho = 0;  // decision = sum_i y_i alpha_i K(x_i, x) - rho
  double gap = 0;
  long iterations = 0;
};

/// Dual soft-margin SVM by SMO with second-order working-set selection.
/// Stops when the maximal violating pair gap drops below `tol`.
inline BinarySvmSolution solve_binary_svm(RbfKernel& kernel, const std::vector<int>& y, double C, double tol,
                                          long max_iter = 0) {
  const std::size_t n = y.size();
  if (max_iter <= 0) max_iter = std::max<long>(10'000'000, 100 * static_cast<long>(n));
  constexpr double kTau = 1e-12;
  BinarySvmSolution s;
  s.alpha.assign(n, 0.0);
  std::vector<double> G(n, -1.0);
  auto& a = s.alpha;
  auto up = [&](std::size_t t) { return y[t] > 0 ? a[t] < C : a[t] > 0; };
  auto low = [&](std::size_t t) { return y[t] > 0 ? a[t] > 0 : a[t] < C; };

  while (true) {
    double gmax = -std::numeric_limits<double>::infinity(), gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t)
      if (up(t) && -y[t] * G[t] > gmax) {
        i = t;
        gmax = -y[t] * G[t];
      }
    std::size_t j = n;
    double best = std::numeric_limits<double>::infinity();
    const double* Ki = i < n ? kernel.row(i) : nullptr;
    for (std::size_t t = 0; t < n; ++t) {
      if (!low(t)) continue;
      gmax2 = std::max(gmax2, y[t] * G[t]);
      const double b = gmax + y[t] * G[t];
      if (i < n && b > 0) {
        double q = kernel.diag(i) + kernel.diag(t) - 2.0 * Ki[t];
        if (q <= 0) q = kTau;
        if (-(b * b) / q < best) {
          best = -(b * b) / q;
          j = t;
        }
      }
    }
    s.gap = gmax + gmax2;
    if (i == n || j == n || s.gap < tol) break;
    if (s.iterations >= max_iter)
      throw ConvergenceError("SMO did not converge; violating-pair gap " + std::to_string(s.gap), s.gap,
                             s.iterations);
    ++s.iterations;

    const double* Kj = kernel.row(j);
    Ki = kernel.row(i);
    const double yi = y[i], yj = y[j];
    const double Qij = yi * yj * Ki[j];
    const double ai_old = a[i], aj_old = a[j];
    if (yi != yj) {
      double q = kernel.diag(i) + kernel.diag(j) + 2 * Qij;
      if (q <= 0) q = kTau;
      const double delta = (-G[i] - G[j]) / q;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0) {
        if (a[j] < 0) { a[j] = 0; a[i] = diff; }
      } else if (a[i] < 0) { a[i] = 0; a[j] = -diff; }
      if (diff > 0) {
        if (a[i] > C) { a[i] = C; a[j] = C - diff; }
      } else if (a[j] > C) { a[j] = C; a[i] = C + diff; }
    } else {
      double q = kernel.diag(i) + kernel.diag(j) - 2 * Qij;
      if (q <= 0) q = kTau;
      const double delta = (G[i] - G[j]) / q;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > C) {
        if (a[i] > C) { a[i] = C; a[j] = sum - C; }
      } else if (a[j] < 0) { a[j] = 0; a[i] = sum; }
      if (sum > C) {
        if (a[j] > C) { a[j] = C; a[i] = sum - C; }
      } else if (a[i] < 0) { a[i] = 0; a[j] = sum; }
    }
    const double di = a[i] - ai_old, dj = a[j] - aj_old;
    for (std::size_t t = 0; t < n; ++t) G[t] += y[t] * (yi * Ki[t] * di + yj * Kj[t] * dj);
  }

  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity(), sum_free = 0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (a[t] >= C) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (a[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  s.rho = n_free ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2;
  return s;
}

/// Sigmoid P(+1 | f) = 1 / (1 + exp(A f + B)) fitted by regularized Newton
/// steps with backtracking.
inline std::pair<double, double> fit_platt(const std::vector<double>& dec, const std::vector<int>& y) {
  double prior1 = 0, prior0 = 0;
  for (int v : y) (v > 0 ? prior1 : prior0) += 1;
  const double hi = (prior1 + 1) / (prior1 + 2), lo = 1 / (prior0 + 2);
  const std::size_t n = dec.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = y[i] > 0 ? hi : lo;
  double A = 0, B = std::log((prior0 + 1) / (prior1 + 1));
  auto objective = [&](double a, double b) {
    double f = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * a + b;
      f += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1) * z + std::log1p(std::exp(z));
    }
    return f;
  };
  double fval = objective(A, B);
  constexpr double kSigma = 1e-12, kEps = 1e-5, kMinStep = 1e-10;
  for (int it = 0; it < 100; ++it) {
    double h11 = kSigma, h22 = kSigma, h21 = 0, g1 = 0, g2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * A + B;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1 + std::exp(-z));
        q = 1 / (1 + std::exp(-z));
      } else {
        p = 1 / (1 + std::exp(z));
        q = std::exp(z) / (1 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det, dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1;
    while (step >= kMinStep) {
      const double na = A + step * dA, nb = B + step * dB;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        A = na;
        B = nb;
        fval = nf;
        break;
      }
      step /= 2;
    }
    if (step < kMinStep) break;
  }
  return {A, B};
}

struct SvmParams {
  double C = 1.0;
  double tol = 1e-3;
  double gamma = 0;  // 0: 1 / (dim * variance of all training values)
  long max_iter = 0;
};

/// One-vs-rest RBF SVM. Each machine's decision value passes through its
/// own sigmoid; the per-label values are renormalized to sum to one.
class SvmClassifier final : public Classifier {
public:
  struct Machine {
    std::vector<double> coef;  // y_i alpha_i per stored support row
    double rho = 0, A = 0, B = 0;
  };

  SvmClassifier() = default;

  static double scale_gamma(const TrainingData& d) {
    double sum = 0, sq = 0, n = 0;
    for (const auto& r : d.x)
      for (double v : r) {
        sum += v;
        n += 1;
      }
    const double mean = sum / n;
    for (const auto& r : d.x)
      for (double v : r) sq += (v - mean) * (v - mean);
    const double var = sq / n;
    return var > 0 ? 1.0 / (static_cast<double>(d.dim()) * var) : 1.0;
  }

  /// `solutions`, when given, receives each machine's dual solution.
  static SvmClassifier fit(const TrainingData& d, const SvmParams& p = {},
                           std::vector<BinarySvmSolution>* solutions = nullptr) {
    check_training(d);
    if (d.n_labels() < 2) throw ParameterError("SVM needs at least two labels");
    if (!(p.C > 0) || !(p.tol > 0)) throw ParameterError("SVM needs positive C and tol");
    SvmClassifier m;
    m.labels_ = d.labels;
    m.dim_ = d.dim();
    m.gamma_ = p.gamma > 0 ? p.gamma : scale_gamma(d);
    RbfKernel kernel(d.x, m.gamma_);
    const std::size_t n = d.size();
    std::vector<BinarySvmSolution> sols;
    const std::size_t machines = d.n_labels();
    for (std::size_t c = 0; c < machines; ++c) {
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = d.y[i] == static_cast<int>(c) ? 1 : -1;
      sols.push_back(solve_binary_svm(kernel, y, p.C, p.tol, p.max_iter));
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& s : sols)
        if (s.alpha[i] > 0) {
          keep.push_back(i);
          break;
        }
    for (auto i : keep) m.sv_.push_back(d.x[i]);
    for (std::size_t c = 0; c < machines; ++c) {
      Machine mc;
      mc.rho = sols[c].rho;
      for (auto i : keep) mc.coef.push_back((d.y[i] == static_cast<int>(c) ? 1.0 : -1.0) * sols[c].alpha[i]);
      m.machines_.push_back(std::move(mc));
    }
    for (std::size_t c = 0; c < machines; ++c) {
      std::vector<double> dec(n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double* K = kernel.row(i);
        double f = -sols[c].rho;
        for (std::size_t t = 0; t < n; ++t)
          if (sols[c].alpha[t] > 0) f += (d.y[t] == static_cast<int>(c) ? 1.0 : -1.0) * sols[c].alpha[t] * K[t];
        dec[i] = f;
        y[i] = d.y[i] == static_cast<int>(c) ? 1 : -1;
      }
      std::tie(m.machines_[c].A, m.machines_[c].B) = fit_platt(dec, y);
    }
    if (solutions) *solutions = std::move(sols);
    return m;
  }

  ModelKind kind() const override { return ModelKind::SVM; }
  const std::vector<std::string>& labels() const override { return labels_; }
  std::size_t dim() const override { return dim_; }
  double gamma() const noexcept { return gamma_; }
  const std::vector<Machine>& machines() const noexcept { return machines_; }

  std::vector<double> decision_values(const std::vector<double>& x) const {
    std::vector<double> k(sv_.size());
    for (std::size_t t = 0; t < sv_.size(); ++t) {
      double s = 0;
      for (std::size_t j = 0; j < x.size(); ++j) s += (sv_[t][j] - x[j]) * (sv_[t][j] - x[j]);
      k[t] = std::exp(-gamma_ * s);
    }
    std::vector<double> out;
    for (const auto& mc : machines_) {
      double f = -mc.rho;
      for (std::size_t t = 0; t < k.size(); ++t) f += mc.coef[t] * k[t];
      out.push_back(f);
    }
    return out;
  }

  std::vector<double> probabilities(const std::vector<double>& x) const override {
    const auto dec = decision_values(x);
    std::vector<double> p(dec.size());
    double total = 0;
    for (std::size_t c = 0; c < dec.size(); ++c) {
      const double z = dec[c] * machines_[c].A + machines_[c].B;
      p[c] = z >= 0 ? std::exp(-z) / (1 + std::exp(-z)) : 1 / (1 + std::exp(z));
      total += p[c];
    }
    if (!(total > 0)) return std::vector<double>(p.size(), 1.0 / static_cast<double>(p.size()));
    for (double& v : p) v /= total;
    return p;
  }

  void save_payload(BinaryWriter& w) const override {
    w.strings(labels_);
    w.u64(dim_);
    w.f64(gamma_);
    w.u64(sv_.size());
    for (const auto& r : sv_) w.vec(r);
    w.u64(machines_.size());
    for (const auto& mc : machines_) {
      w.vec(mc.coef);
      w.f64(mc.rho);
      w.f64(mc.A);
      w.f64(mc.B);
    }
  }

  static SvmClassifier load_payload(BinaryReader& r) {
    SvmClassifier m;
    m.labels_ = r.strings();
    m.dim_ = r.count();
    m.gamma_ = r.f64();
    m.sv_.resize(r.count());
    for (auto& v : m.sv_) v = r.vec();
    m.machines_.resize(r.count());
    for (auto& mc : m.machines_) {
      mc.coef = r.vec();
      mc.rho = r.f64();
      mc.A = r.f64();
      mc.B = r.f64();
      if (mc.coef.size() != m.sv_.size()) throw FormatError("SVM coefficient count mismatch");
    }
    return m;
  }

private:
  std::vector<std::string> labels_;
  std::size_t dim_ = 0;
  double gamma_ = 1;
  std::vector<std::vector<double>> sv_;
  std::vector<Machine> machines_;
};

}  // namespace ptx
