#pragma once

#include <array>
#include <vector>

#include "ptx/descriptors/feature_vector.hpp"
#include "ptx/descriptors/filtering.hpp"

namespace ptx {

struct LdnParams {
  double sigma = 0.5;  // pre-smoothing; 0 disables it
};

inline constexpr std::size_t kLdnBins = 56;

/// The eight Kirsch compass masks, M0 pointing east and each next mask
/// rotated 45 degrees counter-clockwise. Row-major 3x3.
inline const std::array<std::array<double, 9>, 8>& kirsch_masks() {
  static const std::array<std::array<double, 9>, 8> masks = [] {
    // Ring positions clockwise from top-left.
    constexpr std::array<int, 8> ring = {0, 1, 2, 5, 8, 7, 6, 3};
    // East mask: the three right-hand ring cells (top-right, right,
    // bottom-right) carry 5.
    std::array<double, 8> east = {-3, -3, 5, 5, 5, -3, -3, -3};
    std::array<std::array<double, 9>, 8> out{};
    for (int m = 0; m < 8; ++m) {
      std::array<double, 9> k{};
      for (int i = 0; i < 8; ++i) {
        // counter-clockwise rotation by m steps on the clockwise ring
        const int src = (i + m) % 8;
        k[static_cast<std::size_t>(ring[static_cast<std::size_t>(i)])] = east[static_cast<std::size_t>(src)];
      }
      out[static_cast<std::size_t>(m)] = k;
    }
    return out;
  }();
  return masks;
}

/// Code in [0, 56): 7 * argmax + position of argmin among the other seven
/// indices. Responses within kCompareResolution of each other (relative to
/// the largest magnitude) tie, and ties resolve toward the lowest index.
inline int ldn_code(const std::array<double, 8>& responses) {
  double scale = 1;
  for (double r : responses) scale = std::max(scale, std::abs(r));
  const double tol = kCompareResolution * scale;
  int hi = 0;
  for (int i = 1; i < 8; ++i)
    if (responses[static_cast<std::size_t>(i)] > responses[static_cast<std::size_t>(hi)] + tol) hi = i;
  int lo = -1;
  for (int i = 0; i < 8; ++i) {
    if (i == hi) continue;
    if (lo < 0 || responses[static_cast<std::size_t>(i)] < responses[static_cast<std::size_t>(lo)] - tol) lo = i;
  }
  return 7 * hi + (lo < hi ? lo : lo - 1);
}

inline std::vector<int> ldn_codes(const GrayImage& img, const LdnParams& params = {}) {
  Plane base = relative_plane(img);
  if (params.sigma > 0) {
    const auto g = gaussian_kernel(params.sigma);
    base = correlate_separable(base, g, g);
  }
  std::vector<Plane> responses;
  for (const auto& mask : kirsch_masks())
    responses.push_back(correlate(base, std::vector<double>(mask.begin(), mask.end()), 1));
  std::vector<int> codes;
  codes.reserve(img.size());
  for (std::size_t p = 0; p < img.size(); ++p) {
    std::array<double, 8> r{};
    for (std::size_t m = 0; m < 8; ++m) r[m] = responses[m].data[p];
    codes.push_back(ldn_code(r));
  }
  return codes;
}

inline FeatureVector ldn(const GrayImage& img, const LdnParams& params = {}) {
  std::vector<std::size_t> hist(kLdnBins, 0);
  for (int c : ldn_codes(img, params)) ++hist[static_cast<std::size_t>(c)];
  return histogram_feature(DescriptorId::LDN, hist);
}

}  // namespace ptx
