#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ptx/dataset/feature_matrix.hpp"
#include "ptx/resampling/editing.hpp"
#include "ptx/resampling/oversampling.hpp"
#include "ptx/rng.hpp"

namespace ptx {

enum class ResamplingAlgorithm { NONE, ADASYN, SMOTE, SMOTE_B1, SMOTE_B2, ALLKNN, ENN, RENN, TOMEK, SMOTE_TL };

inline constexpr std::array<ResamplingAlgorithm, 9> kPaperResamplers = {
    ResamplingAlgorithm::ADASYN, ResamplingAlgorithm::SMOTE,  ResamplingAlgorithm::SMOTE_B1,
    ResamplingAlgorithm::SMOTE_B2, ResamplingAlgorithm::ALLKNN, ResamplingAlgorithm::ENN,
    ResamplingAlgorithm::RENN,   ResamplingAlgorithm::TOMEK,  ResamplingAlgorithm::SMOTE_TL};

inline std::string_view resampler_name(ResamplingAlgorithm a) {
  switch (a) {
    case ResamplingAlgorithm::NONE: return "NONE";
    case ResamplingAlgorithm::ADASYN: return "ADASYN";
    case ResamplingAlgorithm::SMOTE: return "SMOTE";
    case ResamplingAlgorithm::SMOTE_B1: return "SMOTE_B1";
    case ResamplingAlgorithm::SMOTE_B2: return "SMOTE_B2";
    case ResamplingAlgorithm::ALLKNN: return "ALLKNN";
    case ResamplingAlgorithm::ENN: return "ENN";
    case ResamplingAlgorithm::RENN: return "RENN";
    case ResamplingAlgorithm::TOMEK: return "TOMEK";
    case ResamplingAlgorithm::SMOTE_TL: return "SMOTE_TL";
  }
  return "?";
}

inline ResamplingAlgorithm parse_resampler(std::string_view name) {
  for (auto a : kPaperResamplers)
    if (resampler_name(a) == name) return a;
  if (name == "NONE") return ResamplingAlgorithm::NONE;
  throw ParameterError("unknown resampling algorithm '" + std::string(name) + "'");
}

inline bool is_oversampler(ResamplingAlgorithm a) {
  return a == ResamplingAlgorithm::ADASYN || a == ResamplingAlgorithm::SMOTE || a == ResamplingAlgorithm::SMOTE_B1 ||
         a == ResamplingAlgorithm::SMOTE_B2 || a == ResamplingAlgorithm::SMOTE_TL;
}

struct ResamplingSpec {
  ResamplingAlgorithm algorithm = ResamplingAlgorithm::NONE;
  std::size_t k_neighbors = 0;  // 0: 5 for oversamplers, 3 for the edited family
  std::uint64_t seed = 0;
  std::size_t class_floor = 2;

  std::size_t k() const {
    if (k_neighbors) return k_neighbors;
    return is_oversampler(algorithm) || algorithm == ResamplingAlgorithm::TOMEK ? 5 : 3;
  }
};

/// How rows are grouped into classes: by the last path segment or by the
/// full label path.
enum class LabelMode { Flat, LeafPath };

struct ResampleReport {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // key -> (before, after)
  std::vector<std::string> notes;
};

inline std::string label_key(const std::string& path, LabelMode mode) {
  if (mode == LabelMode::LeafPath) return path;
  const auto pos = path.rfind(kPathSeparator);
  return pos == std::string::npos ? path : path.substr(pos + 1);
}

namespace detail {

inline const std::string kRest = std::string("\x01rest");

/// Labels in processing order: descending count, ties lexicographic.
inline std::vector<std::string> processing_order(const LabeledSet& set) {
  std::vector<std::pair<std::string, std::size_t>> v;
  for (const auto& [l, c] : count_labels(set)) v.emplace_back(l, c);
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (const auto& [l, c] : v) out.push_back(l);
  return out;
}

inline LabeledSet one_against_all(const LabeledSet& set, const std::string& label) {
  LabeledSet b = set;
  for (auto& p : b)
    if (p.label != label) p.label = kRest;
  return b;
}

/// O-A-A undersampling: indices removed by any decomposition, subject to
/// the class floor.
inline std::vector<std::size_t> undersample_oaa(const LabeledSet& set, ResamplingAlgorithm algo, std::size_t k,
                                                std::size_t floor, ResampleReport& report) {
  std::set<std::size_t> doomed;
  const auto counts = count_labels(set);
  for (const auto& label : processing_order(set)) {
    const auto binary = one_against_all(set, label);
    const std::size_t own = counts.at(label);
    const std::string protect = own <= set.size() - own ? label : kRest;
    UndersampleResult r;
    if (algo == ResamplingAlgorithm::TOMEK || algo == ResamplingAlgorithm::SMOTE_TL) {
      r = tomek_links(binary, protect);
    } else {
      const auto mode = algo == ResamplingAlgorithm::ENN    ? EnnMode::ENN
                        : algo == ResamplingAlgorithm::RENN ? EnnMode::RENN
                                                            : EnnMode::ALLKNN;
      r = edited_nn(binary, mode, std::min(k, set.size() - 1), protect, 1);
    }
    std::set<std::size_t> kept(r.kept.begin(), r.kept.end());
    for (std::size_t i = 0; i < set.size(); ++i)
      if (!kept.count(i)) doomed.insert(i);
  }
  std::vector<std::size_t> skipped;
  auto alive = apply_removals(set, all_indices(set.size()), doomed, floor, skipped);
  if (!skipped.empty())
    report.notes.push_back(std::to_string(skipped.size()) + " removal(s) withheld by the class floor");
  return alive;
}

}  // namespace detail

/// Rebalances the training rows of a matrix by One-Against-All
/// decomposition. Rows not tagged train are passed through without being
/// read. Synthetic rows are appended after the originals.
inline FeatureMatrix resample_multiclass(const FeatureMatrix& m, const ResamplingSpec& spec,
                                         LabelMode mode = LabelMode::Flat, ResampleReport* report_out = nullptr) {
  ResampleReport report;
  std::vector<std::size_t> train_rows;
  for (std::size_t i = 0; i < m.rows.size(); ++i)
    if (m.rows[i].split == Split::Train) train_rows.push_back(i);

  LabeledSet set;
  std::map<std::string, std::string> path_of;
  for (auto i : train_rows) {
    const auto key = label_key(m.rows[i].label, mode);
    path_of.emplace(key, m.rows[i].label);
    set.push_back({m.rows[i].values, key, false});
  }
  const auto before = count_labels(set);
  if (before.size() < 2) throw ResamplingError("resampling needs at least two labels among training rows");

  FeatureMatrix out{m.descriptor_set, m.dim, {}};
  if (spec.algorithm == ResamplingAlgorithm::NONE) {
    out = m;
  } else if (is_oversampler(spec.algorithm)) {
    const auto order = detail::processing_order(set);
    const std::size_t target = before.at(order.front());
    LabeledSet grown = set;
    std::vector<std::size_t> origin_row = train_rows;  // per point of `grown`; synthetic points get SIZE_MAX
    for (std::size_t li = 1; li < order.size(); ++li) {
      const auto& label = order[li];
      if (before.at(label) >= target) continue;
      const auto binary = detail::one_against_all(set, label);
      const auto seed = derive_seed(spec.seed, label);
      OversampleResult r;
      switch (spec.algorithm) {
        case ResamplingAlgorithm::ADASYN: r = adasyn(binary, label, target, spec.k(), seed, true); break;
        case ResamplingAlgorithm::SMOTE_B1: r = smote(binary, label, target, SmoteVariant::Borderline1, spec.k(), seed); break;
        case ResamplingAlgorithm::SMOTE_B2: r = smote(binary, label, target, SmoteVariant::Borderline2, spec.k(), seed); break;
        default: r = smote(binary, label, target, SmoteVariant::Plain, spec.k(), seed); break;
      }
      if (r.fallback) report.notes.push_back(label + ": fell back to plain SMOTE seeding");
      for (std::size_t s = binary.size(); s < r.set.size(); ++s) {
        grown.push_back(r.set[s]);
        origin_row.push_back(SIZE_MAX);
      }
    }
    std::vector<std::size_t> alive = all_indices(grown.size());
    if (spec.algorithm == ResamplingAlgorithm::SMOTE_TL)
      alive = detail::undersample_oaa(grown, spec.algorithm, spec.k(), spec.class_floor, report);

    std::set<std::size_t> kept_rows;
    for (auto g : alive)
      if (origin_row[g] != SIZE_MAX) kept_rows.insert(origin_row[g]);
    for (std::size_t i = 0; i < m.rows.size(); ++i)
      if (m.rows[i].split != Split::Train || kept_rows.count(i)) out.rows.push_back(m.rows[i]);
    std::map<std::string, std::size_t> serial;
    for (auto g : alive) {
      if (origin_row[g] != SIZE_MAX) continue;
      const auto& p = grown[g];
      FeatureRow row{"synthetic:" + p.label + ":" + std::to_string(serial[p.label]++), p.x, path_of.at(p.label),
                     Split::Train, true};
      out.rows.push_back(std::move(row));
    }
  } else {
    const auto alive = detail::undersample_oaa(set, spec.algorithm, spec.k(), spec.class_floor, report);
    std::set<std::size_t> kept_rows;
    for (auto a : alive) kept_rows.insert(train_rows[a]);
    for (std::size_t i = 0; i < m.rows.size(); ++i)
      if (m.rows[i].split != Split::Train || kept_rows.count(i)) out.rows.push_back(m.rows[i]);
  }

  for (const auto& [label, c] : before) report.counts[label] = {c, 0};
  for (const auto& r : out.rows)
    if (r.split == Split::Train) ++report.counts[label_key(r.label, mode)].second;
  if (report_out) *report_out = std::move(report);
  return out;
}

}  // namespace ptx
