#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ptx/dataset/feature_matrix.hpp"
#include "ptx/error.hpp"
#include "ptx/io/binary.hpp"

namespace ptx {

/// Per-label probabilities in a fixed label order.
struct ScoreVector {
  std::vector<std::string> labels;
  std::vector<double> scores;

  /// Index of the highest score; ties go to the earlier label.
  std::size_t argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
      if (scores[i] > scores[best]) best = i;
    return best;
  }
  const std::string& top() const { return labels.at(argmax()); }

  bool operator==(const ScoreVector&) const = default;
};

/// Dense training view: rows, label indices into a sorted label list, and
/// optional per-row weights.
struct TrainingData {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::vector<std::string> labels;

  std::size_t size() const noexcept { return x.size(); }
  std::size_t dim() const { return x.empty() ? 0 : x.front().size(); }
  std::size_t n_labels() const noexcept { return labels.size(); }

  std::vector<std::size_t> label_counts() const {
    std::vector<std::size_t> c(labels.size(), 0);
    for (int v : y) ++c[static_cast<std::size_t>(v)];
    return c;
  }

  static TrainingData from_rows(const std::vector<std::vector<double>>& x, const std::vector<std::string>& names) {
    if (x.size() != names.size()) throw DimensionError("row and label counts differ");
    TrainingData d;
    std::set<std::string> uniq(names.begin(), names.end());
    d.labels.assign(uniq.begin(), uniq.end());
    d.x = x;
    for (const auto& n : names)
      d.y.push_back(static_cast<int>(std::lower_bound(d.labels.begin(), d.labels.end(), n) - d.labels.begin()));
    for (const auto& r : d.x)
      if (r.size() != d.x.front().size()) throw DimensionError("training rows differ in dimension");
    return d;
  }

  /// Training rows of a matrix, labeled by `key(label path)`.
  template <typename KeyFn>
  static TrainingData from_matrix(const FeatureMatrix& m, KeyFn key) {
    std::vector<std::vector<double>> x;
    std::vector<std::string> names;
    for (const auto& r : m.rows)
      if (r.split == Split::Train) {
        x.push_back(r.values);
        names.push_back(key(r.label));
      }
    return from_rows(x, names);
  }

  /// `balanced` class weights: n / (n_labels * count).
  std::vector<double> balanced_weights() const {
    const auto c = label_counts();
    std::vector<double> w(size());
    for (std::size_t i = 0; i < size(); ++i)
      w[i] = static_cast<double>(size()) /
             (static_cast<double>(n_labels()) * static_cast<double>(c[static_cast<std::size_t>(y[i])]));
    return w;
  }
};

enum class ModelKind : std::uint8_t { KNN = 1, DT = 2, RF = 3, SVM = 4, MLP = 5, PCT = 16, PCT_FOREST = 17 };

/// A fitted flat classifier. Implementations are immutable after fitting.
class Classifier {
public:
  virtual ~Classifier() = default;

  virtual ModelKind kind() const = 0;
  virtual const std::vector<std::string>& labels() const = 0;
  virtual std::size_t dim() const = 0;

  /// Probabilities aligned with labels(); callers validate the dimension.
  virtual std::vector<double> probabilities(const std::vector<double>& x) const = 0;

  virtual std::size_t predict_index(const std::vector<double>& x) const {
    return ScoreVector{labels(), probabilities(x)}.argmax();
  }

  virtual void save_payload(BinaryWriter& w) const = 0;

  ScoreVector predict_scores(const std::vector<double>& x) const {
    if (x.size() != dim())
      throw ParameterError("input dimension " + std::to_string(x.size()) + ", model expects " + std::to_string(dim()));
    return {labels(), probabilities(x)};
  }

  std::string predict(const std::vector<double>& x) const {
    if (x.size() != dim()) throw ParameterError("input dimension mismatch");
    return labels()[predict_index(x)];
  }
};

inline void check_training(const TrainingData& d) {
  if (d.size() == 0) throw ParameterError("training set is empty");
  for (const auto& r : d.x)
    for (double v : r)
      if (!std::isfinite(v)) throw ParameterError("training features must be finite");
}

}  // namespace ptx
