#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "ptx/descriptors/feature_vector.hpp"
#include "ptx/descriptors/filtering.hpp"

namespace ptx {

struct ObifParams {
  std::vector<double> scales{2.0, 4.0};
  double epsilon = 0.001;
  int orientation_levels = 4;

  void validate() const {
    if (scales.size() != 2) throw ParameterError("oBIF columns need exactly two scales");
    for (double s : scales)
      if (!(s > 0)) throw ParameterError("oBIF scale must be positive");
    if (!(epsilon > 0)) throw ParameterError("oBIF epsilon must be positive");
    if (orientation_levels < 1) throw ParameterError("oBIF orientation levels must be positive");
  }

  /// States per scale: flat, 2n slope directions, rotational, and n
  /// orientations for each of dark line, light line and saddle.
  int states_per_scale() const { return 5 * orientation_levels + 2; }
  std::size_t dim() const {
    const auto s = static_cast<std::size_t>(states_per_scale());
    return s * s;
  }
};

enum class BifClass { Flat, Slope, DarkRotational, LightRotational, DarkLine, LightLine, Saddle };

/// Scale-normalized Gaussian-derivative responses at one pixel.
struct JetResponse {
  double s00, s10, s01, s20, s11, s02;
};

struct BifLabel {
  BifClass cls;
  double orientation;  // radians; meaningful for oriented classes
};

/// Argmax over the seven symmetry scores. Ties resolve to the class listed
/// first (flat, slope, dark rot., light rot., dark line, light line, saddle).
inline BifLabel classify_bif(const JetResponse& j, double epsilon) {
  // lambda: Laplacian (twice the mean curvature); gamma: shear magnitude.
  const double lambda = j.s20 + j.s02;
  const double gamma = std::sqrt((j.s20 - j.s02) * (j.s20 - j.s02) + 4.0 * j.s11 * j.s11);
  const double grad = std::sqrt(j.s10 * j.s10 + j.s01 * j.s01);
  const std::array<double, 7> scores = {
      epsilon * j.s00,
      2.0 * grad,
      lambda,
      -lambda,
      std::numbers::sqrt2 / 2.0 * (gamma + lambda),
      std::numbers::sqrt2 / 2.0 * (gamma - lambda),
      gamma,
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  const auto cls = static_cast<BifClass>(best);
  double orientation = 0.0;
  if (cls == BifClass::Slope)
    orientation = std::atan2(j.s01, j.s10);
  else if (cls == BifClass::DarkLine || cls == BifClass::LightLine || cls == BifClass::Saddle)
    orientation = 0.5 * std::atan2(2.0 * j.s11, j.s20 - j.s02);
  return {cls, orientation};
}

/// Maps a class and orientation to a state in [0, 5n+2).
inline int bif_state(const BifLabel& label, int n) {
  auto quantize = [](double angle, double period, int bins) {
    double t = std::fmod(angle, period);
    if (t < 0) t += period;
    int b = static_cast<int>(std::floor(t / (period / bins) + 0.5));
    return b % bins;
  };
  switch (label.cls) {
    case BifClass::Flat: return 0;
    case BifClass::Slope: return 1 + quantize(label.orientation, 2.0 * std::numbers::pi, 2 * n);
    case BifClass::DarkRotational:
    case BifClass::LightRotational: return 1 + 2 * n;
    case BifClass::DarkLine: return 2 + 2 * n + quantize(label.orientation, std::numbers::pi, n);
    case BifClass::LightLine: return 2 + 3 * n + quantize(label.orientation, std::numbers::pi, n);
    case BifClass::Saddle: return 2 + 4 * n + quantize(label.orientation, std::numbers::pi, n);
  }
  return 0;
}

/// Jet responses at one scale for every pixel; intensities are taken on a
/// [0, 1] scale. Derivatives come from the minimum-relative image, the
/// zeroth order from the absolute one.
inline std::vector<JetResponse> bif_jets(const GrayImage& img, double sigma) {
  const auto g = gaussian_kernel(sigma);
  const auto d1 = gaussian_derivative_kernel(sigma);
  const auto d2 = gaussian_second_derivative_kernel(sigma);
  constexpr double unit = 1.0 / 255.0;
  const Plane rel = relative_plane(img, unit);
  const double offset = img.min_intensity() * unit;

  const Plane l = correlate_separable(rel, g, g);
  const Plane lx = correlate_separable(rel, d1, g);
  const Plane ly = correlate_separable(rel, g, d1);
  const Plane lxx = correlate_separable(rel, d2, g);
  const Plane lxy = correlate_separable(rel, d1, d1);
  const Plane lyy = correlate_separable(rel, g, d2);

  std::vector<JetResponse> out(img.size());
  const double s2 = sigma * sigma;
  for (std::size_t p = 0; p < out.size(); ++p)
    out[p] = {settle(l.data[p] + offset), settle(sigma * lx.data[p]), settle(sigma * ly.data[p]),
              settle(s2 * lxx.data[p]),   settle(s2 * lxy.data[p]),   settle(s2 * lyy.data[p])};
  return out;
}

inline std::vector<int> bif_states(const GrayImage& img, double sigma, const ObifParams& params) {
  std::vector<int> states;
  states.reserve(img.size());
  for (const auto& j : bif_jets(img, sigma))
    states.push_back(bif_state(classify_bif(j, params.epsilon), params.orientation_levels));
  return states;
}

/// Two-scale oBIF column histogram, (5n+2)^2 bins.
inline FeatureVector obifs(const GrayImage& img, const ObifParams& params = {}) {
  params.validate();
  const auto fine = bif_states(img, params.scales[0], params);
  const auto coarse = bif_states(img, params.scales[1], params);
  const auto per_scale = static_cast<std::size_t>(params.states_per_scale());
  std::vector<std::size_t> hist(params.dim(), 0);
  for (std::size_t p = 0; p < fine.size(); ++p)
    ++hist[static_cast<std::size_t>(fine[p]) * per_scale + static_cast<std::size_t>(coarse[p])];
  return histogram_feature(DescriptorId::OBIF, hist);
}

}  // namespace ptx
