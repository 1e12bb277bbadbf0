#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <vector>

#include "ptx/descriptors/feature_vector.hpp"
#include "ptx/imaging.hpp"

namespace ptx {

struct LbpParams {
  NeighborhoodSpec neighborhood{8, Circle{2.0}, 0.0};
};

/// Number of 0/1 transitions in the circular 8-bit pattern.
constexpr int circular_transitions(std::uint8_t code) {
  const std::uint8_t rotated = static_cast<std::uint8_t>((code >> 1) | (code << 7));
  return std::popcount(static_cast<unsigned>(code ^ rotated));
}

/// Maps each 8-bit code to its bin: uniform codes (<= 2 transitions) get
/// bins 0..57 in ascending code order, everything else shares bin 58.
inline const std::array<std::uint8_t, 256>& uniform_lbp_table() {
  static const std::array<std::uint8_t, 256> table = [] {
    std::array<std::uint8_t, 256> t{};
    std::uint8_t next = 0;
    for (int c = 0; c < 256; ++c)
      t[static_cast<std::size_t>(c)] = circular_transitions(static_cast<std::uint8_t>(c)) <= 2 ? next++ : 58;
    return t;
  }();
  return table;
}

inline constexpr std::size_t kUniformLbpBins = 59;

/// Per-pixel LBP codes (bit i set iff neighbor i >= center).
inline std::vector<std::uint8_t> lbp_codes(const GrayImage& img, const LbpParams& params = {}) {
  if (params.neighborhood.neighbor_count != 8)
    throw ParameterError("LBP histogram is defined for 8 neighbors");
  const auto offsets = neighbor_offsets(params.neighborhood);
  std::vector<std::uint8_t> codes;
  codes.reserve(img.size());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double center = img.at(x, y);
      std::uint8_t code = 0;
      for (std::size_t i = 0; i < offsets.size(); ++i)
        if (settle(sample_bilinear_relative(img, x + offsets[i].dx, y + offsets[i].dy, center)) >= 0.0)
          code |= static_cast<std::uint8_t>(1u << i);
      codes.push_back(code);
    }
  return codes;
}

inline FeatureVector lbp(const GrayImage& img, const LbpParams& params = {}) {
  const auto& table = uniform_lbp_table();
  std::vector<std::size_t> hist(kUniformLbpBins, 0);
  for (auto c : lbp_codes(img, params)) ++hist[table[c]];
  return histogram_feature(DescriptorId::LBP, hist);
}

}  // namespace ptx
