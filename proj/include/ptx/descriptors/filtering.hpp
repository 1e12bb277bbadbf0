#pragma once

#include <cmath>
#include <vector>

#include "ptx/imaging.hpp"

namespace ptx {

/// Real-valued plane used for intermediate filter responses.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  double& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double operator()(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  double clamped(int x, int y) const {
    return (*this)(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1));
  }
};

/// Intensities minus the image minimum. Filters whose taps sum to zero then
/// see exactly the same input after any integer gray-level shift.
inline Plane relative_plane(const GrayImage& img, double scale = 1.0) {
  Plane p(img.width(), img.height());
  const double ref = img.min_intensity();
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) p.data[i] = (px[i] - ref) * scale;
  return p;
}

/// 2-D correlation with a square (2r+1)^2 kernel, replicate-edge border.
/// kernel is row-major, kernel[(dy + r) * (2r+1) + (dx + r)].
inline Plane correlate(const Plane& in, const std::vector<double>& kernel, int r) {
  const int side = 2 * r + 1;
  Plane out(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double acc = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          acc += in.clamped(x + dx, y + dy) * kernel[static_cast<std::size_t>(dy + r) * side + (dx + r)];
      out(x, y) = acc;
    }
  return out;
}

/// Separable correlation: `row` taps along x, then `col` taps along y.
inline Plane correlate_separable(const Plane& in, const std::vector<double>& row,
                                 const std::vector<double>& col) {
  const int rx = static_cast<int>(row.size() / 2);
  const int ry = static_cast<int>(col.size() / 2);
  Plane tmp(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double acc = 0;
      for (int k = -rx; k <= rx; ++k) acc += in.clamped(x + k, y) * row[static_cast<std::size_t>(k + rx)];
      tmp(x, y) = acc;
    }
  Plane out(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double acc = 0;
      for (int k = -ry; k <= ry; ++k) acc += tmp.clamped(x, y + k) * col[static_cast<std::size_t>(k + ry)];
      out(x, y) = acc;
    }
  return out;
}

/// Sampled Gaussian normalized to unit sum, radius ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  return k;
}

/// First-derivative tap set: antisymmetric with sum_k k*D(k) = 1, so a unit
/// ramp responds with exactly its slope.
inline std::vector<double> gaussian_derivative_kernel(double sigma) {
  auto g = gaussian_kernel(sigma);
  const int r = static_cast<int>(g.size() / 2);
  std::vector<double> d(g.size());
  double moment = 0;
  for (int i = -r; i <= r; ++i) moment += static_cast<double>(i) * i * g[static_cast<std::size_t>(i + r)];
  for (int i = -r; i <= r; ++i) d[static_cast<std::size_t>(i + r)] = i * g[static_cast<std::size_t>(i + r)] / moment;
  return d;
}

/// Second-derivative taps: zero sum, zero first moment, sum_k k^2/2*D(k) = 1.
inline std::vector<double> gaussian_second_derivative_kernel(double sigma) {
  auto g = gaussian_kernel(sigma);
  const int r = static_cast<int>(g.size() / 2);
  double m2 = 0, m4 = 0;
  for (int i = -r; i <= r; ++i) {
    const double w = g[static_cast<std::size_t>(i + r)];
    m2 += static_cast<double>(i) * i * w;
    m4 += static_cast<double>(i) * i * i * i * w;
  }
  // D(k) = c * (k^2 - m2) g(k); sum is zero because sum g = 1.
  const double c = 2.0 / (m4 - m2 * m2);
  std::vector<double> d(g.size());
  for (int i = -r; i <= r; ++i)
    d[static_cast<std::size_t>(i + r)] = c * (static_cast<double>(i) * i - m2) * g[static_cast<std::size_t>(i + r)];
  return d;
}

}  // namespace ptx
