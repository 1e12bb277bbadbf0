#pragma once

#include <cstdint>
#include <vector>

#include "ptx/descriptors/feature_vector.hpp"
#include "ptx/imaging.hpp"

namespace ptx {

/// Elongated quinary pattern parameters. The histogram of every listed
/// neighborhood is accumulated into the same 256 bins.
struct EqpParams {
  double tau1 = 2.0;
  double tau2 = 5.0;
  std::vector<NeighborhoodSpec> neighborhoods{
      NeighborhoodSpec{8, Ellipse{3.0, 1.0}, 0.0},
      NeighborhoodSpec{8, Ellipse{1.0, 3.0}, 0.0},
  };

  void validate() const {
    if (!(tau1 >= 0.0 && tau2 > tau1)) throw ParameterError("EQP requires tau2 > tau1 >= 0");
    if (neighborhoods.empty()) throw ParameterError("EQP needs at least one neighborhood");
    for (const auto& n : neighborhoods)
      if (n.neighbor_count != 8) throw ParameterError("EQP histogram is defined for 8 neighbors");
  }
};

/// Five-level code of a neighbor-minus-center difference.
inline int quinary_level(double diff, double tau1, double tau2) {
  if (diff >= tau2) return 2;
  if (diff >= tau1) return 1;
  if (diff >= -tau1) return 0;
  if (diff >= -tau2) return -1;
  return -2;
}

struct EqpCodes {
  std::vector<std::uint8_t> positive;  // bit i: level >= 1
  std::vector<std::uint8_t> negative;  // bit i: level <= -1
};

inline EqpCodes eqp_codes(const GrayImage& img, const NeighborhoodSpec& spec, double tau1, double tau2) {
  const auto offsets = neighbor_offsets(spec);
  EqpCodes out;
  out.positive.reserve(img.size());
  out.negative.reserve(img.size());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double center = img.at(x, y);
      std::uint8_t pos = 0, neg = 0;
      for (std::size_t i = 0; i < offsets.size(); ++i) {
        const int level =
            quinary_level(settle(sample_bilinear_relative(img, x + offsets[i].dx, y + offsets[i].dy, center)), tau1, tau2);
        if (level >= 1) pos |= static_cast<std::uint8_t>(1u << i);
        if (level <= -1) neg |= static_cast<std::uint8_t>(1u << i);
      }
      out.positive.push_back(pos);
      out.negative.push_back(neg);
    }
  return out;
}

inline FeatureVector eqp(const GrayImage& img, const EqpParams& params = {}) {
  params.validate();
  std::vector<std::size_t> hist(256, 0);
  for (const auto& spec : params.neighborhoods) {
    const auto codes = eqp_codes(img, spec, params.tau1, params.tau2);
    for (auto c : codes.positive) ++hist[c];
    for (auto c : codes.negative) ++hist[c];
  }
  return histogram_feature(DescriptorId::EQP, hist);
}

}  // namespace ptx
