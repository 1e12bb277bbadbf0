#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ptx/resampling/labeled_set.hpp"
#include "ptx/rng.hpp"

namespace ptx {

enum class SmoteVariant { Plain, Borderline1, Borderline2 };

/// One synthetic point: x[p] + u * (x[q] - x[p]), indices into the input set.
struct SmoteDraw {
  std::size_t p;
  std::size_t q;
  double u;
};

struct OversampleResult {
  LabeledSet set;  // input followed by the synthetic points
  std::vector<SmoteDraw> draws;
  bool fallback = false;  // borderline with no danger points, or ADASYN without majority neighbors
};

namespace detail {

inline std::vector<std::size_t> members(const LabeledSet& set, const std::string& label) {
  std::vector<std::size_t> m;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set[i].label == label) m.push_back(i);
  return m;
}

inline void check_oversampling(const LabeledSet& set, const std::vector<std::size_t>& minority, std::size_t target,
                               std::size_t k) {
  if (minority.size() < 2) throw ResamplingError("oversampling needs at least two minority points");
  if (target < minority.size()) throw ResamplingError("target count is below the current minority count");
  if (k < 1) throw ParameterError("k must be positive");
  check_dimensions(set);
}

inline LabeledPoint interpolate(const LabeledSet& set, const SmoteDraw& d, const std::string& label) {
  const auto& a = set[d.p].x;
  const auto& b = set[d.q].x;
  LabeledPoint out{std::vector<double>(a.size()), label, true};
  for (std::size_t i = 0; i < a.size(); ++i) out.x[i] = a[i] + d.u * (b[i] - a[i]);
  return out;
}

inline OversampleResult materialize(const LabeledSet& set, std::vector<SmoteDraw> draws, const std::string& label,
                                    bool fallback) {
  OversampleResult r{set, std::move(draws), fallback};
  for (const auto& d : r.draws) r.set.push_back(interpolate(set, d, label));
  return r;
}

inline std::size_t majority_neighbors(const LabeledSet& set, const std::vector<std::size_t>& nn,
                                      const std::string& label) {
  std::size_t m = 0;
  for (auto j : nn) m += set[j].label != label;
  return m;
}

}  // namespace detail

/// Adds (target - current) synthetic minority points. Neighbor counts are
/// clamped to what the data can supply.
inline OversampleResult smote(const LabeledSet& set, const std::string& minority_label, std::size_t target,
                              SmoteVariant variant = SmoteVariant::Plain, std::size_t k = 5, std::uint64_t seed = 0) {
  const auto minority = detail::members(set, minority_label);
  detail::check_oversampling(set, minority, target, k);
  const std::size_t needed = target - minority.size();
  if (needed == 0) return {set, {}, false};

  const Distances dist(set);
  const auto everyone = all_indices(set.size());
  const std::size_t k_min = std::min(k, minority.size() - 1);

  std::vector<std::size_t> seeds = minority;
  bool fallback = false;
  if (variant != SmoteVariant::Plain) {
    seeds.clear();
    for (auto i : minority) {
      const auto nn = dist.nearest(i, everyone, k);
      const auto m = detail::majority_neighbors(set, nn, minority_label);
      if (2 * m > nn.size() && m < nn.size()) seeds.push_back(i);
    }
    if (seeds.empty()) {
      seeds = minority;
      fallback = true;
    }
  }

  Rng rng(seed);
  std::vector<SmoteDraw> draws;
  draws.reserve(needed);
  for (std::size_t g = 0; g < needed; ++g) {
    const std::size_t p = seeds[rng.index(seeds.size())];
    if (variant == SmoteVariant::Borderline2) {
      const auto nn = dist.nearest(p, everyone, k);
      const std::size_t q = nn[rng.index(nn.size())];
      const double u = set[q].label == minority_label ? rng.uniform() : 0.5 * rng.uniform();
      draws.push_back({p, q, u});
    } else {
      const auto nn = dist.nearest(p, minority, k_min);
      const std::size_t q = nn[rng.index(nn.size())];
      draws.push_back({p, q, rng.uniform()});
    }
  }
  return detail::materialize(set, std::move(draws), minority_label, fallback);
}

/// Synthetic counts per minority point, proportional to the share of
/// majority points among its k nearest neighbors, rounded by largest
/// remainder (ties to the lower index). Returns an empty vector when every
/// weight is zero.
inline std::vector<std::size_t> adasyn_allocation(const std::vector<double>& ratios, std::size_t total) {
  double sum = 0.0;
  for (double r : ratios) sum += r;
  if (!(sum > 0.0)) return {};
  std::vector<std::size_t> alloc(ratios.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t given = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double share = ratios[i] / sum * static_cast<double>(total);
    alloc[i] = static_cast<std::size_t>(std::floor(share));
    given += alloc[i];
    rema.emplace_back(share - std::floor(share), i);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t t = 0; given < total; ++t, ++given) ++alloc[rema[t % rema.size()].second];
  return alloc;
}

inline OversampleResult adasyn(const LabeledSet& set, const std::string& minority_label, std::size_t target,
                               std::size_t k = 5, std::uint64_t seed = 0, bool smote_fallback = false) {
  const auto minority = detail::members(set, minority_label);
  detail::check_oversampling(set, minority, target, k);
  const std::size_t needed = target - minority.size();
  if (needed == 0) return {set, {}, false};

  const Distances dist(set);
  const auto everyone = all_indices(set.size());
  std::vector<double> ratios;
  for (auto i : minority) {
    const auto nn = dist.nearest(i, everyone, k);
    ratios.push_back(static_cast<double>(detail::majority_neighbors(set, nn, minority_label)) /
                     static_cast<double>(nn.size()));
  }
  const auto alloc = adasyn_allocation(ratios, needed);
  if (alloc.empty()) {
    if (!smote_fallback) throw DegenerateDensityError("no minority point has a majority neighbor");
    auto r = smote(set, minority_label, target, SmoteVariant::Plain, k, seed);
    r.fallback = true;
    return r;
  }

  Rng rng(seed);
  const std::size_t k_min = std::min(k, minority.size() - 1);
  std::vector<SmoteDraw> draws;
  for (std::size_t m = 0; m < minority.size(); ++m) {
    if (alloc[m] == 0) continue;
    const auto nn = dist.nearest(minority[m], minority, k_min);
    for (std::size_t g = 0; g < alloc[m]; ++g) draws.push_back({minority[m], nn[rng.index(nn.size())], rng.uniform()});
  }
  return detail::materialize(set, std::move(draws), minority_label, false);
}

}  // namespace ptx
