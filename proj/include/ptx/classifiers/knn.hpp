#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "ptx/classifiers/classifier.hpp"

namespace ptx {

/// Euclidean k-nearest-neighbour voter. Scores are vote fractions; distance
/// ties go to the lower training row.
class KnnClassifier final : public Classifier {
public:
  KnnClassifier() = default;

  static KnnClassifier fit(const TrainingData& d, std::size_t k) {
    check_training(d);
    if (k == 0 || k > d.size())
      throw ParameterError("k=" + std::to_string(k) + " needs 1..training size (" + std::to_string(d.size()) + ")");
    KnnClassifier m;
    m.k_ = k;
    m.x_ = d.x;
    m.y_ = d.y;
    m.labels_ = d.labels;
    return m;
  }

  ModelKind kind() const override { return ModelKind::KNN; }
  const std::vector<std::string>& labels() const override { return labels_; }
  std::size_t dim() const override { return x_.empty() ? 0 : x_.front().size(); }
  std::size_t k() const noexcept { return k_; }

  /// Training rows of the k nearest neighbours, nearest first.
  std::vector<std::size_t> neighbours(const std::vector<double>& x) const {
    std::vector<double> dist(x_.size());
    for (std::size_t i = 0; i < x_.size(); ++i) {
      double s = 0;
      for (std::size_t j = 0; j < x.size(); ++j) s += (x_[i][j] - x[j]) * (x_[i][j] - x[j]);
      dist[i] = s;
    }
    std::vector<std::size_t> idx(x_.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k_), idx.end(),
                      [&](std::size_t a, std::size_t b) { return dist[a] != dist[b] ? dist[a] < dist[b] : a < b; });
    idx.resize(k_);
    return idx;
  }

  std::vector<double> probabilities(const std::vector<double>& x) const override {
    std::vector<double> p(labels_.size(), 0.0);
    for (auto i : neighbours(x)) p[static_cast<std::size_t>(y_[i])] += 1.0;
    for (double& v : p) v /= static_cast<double>(k_);
    return p;
  }

  /// Vote ties go to the label of the nearest tied neighbour.
  std::size_t predict_index(const std::vector<double>& x) const override {
    const auto nn = neighbours(x);
    std::vector<std::size_t> votes(labels_.size(), 0);
    for (auto i : nn) ++votes[static_cast<std::size_t>(y_[i])];
    const auto top = *std::max_element(votes.begin(), votes.end());
    for (auto i : nn)
      if (votes[static_cast<std::size_t>(y_[i])] == top) return static_cast<std::size_t>(y_[i]);
    return 0;
  }

  void save_payload(BinaryWriter& w) const override {
    w.u64(k_);
    w.strings(labels_);
    w.u64(x_.size());
    for (std::size_t i = 0; i < x_.size(); ++i) {
      w.u64(static_cast<std::uint64_t>(y_[i]));
      w.vec(x_[i]);
    }
  }

  static KnnClassifier load_payload(BinaryReader& r) {
    KnnClassifier m;
    m.k_ = r.count();
    m.labels_ = r.strings();
    const auto n = r.count();
    for (std::size_t i = 0; i < n; ++i) {
      m.y_.push_back(static_cast<int>(r.count(m.labels_.size() - 1)));
      m.x_.push_back(r.vec());
    }
    return m;
  }

private:
  std::size_t k_ = 1;
  std::vector<std::vector<double>> x_;
  std::vector<int> y_;
  std::vector<std::string> labels_;
};

}  // namespace ptx
