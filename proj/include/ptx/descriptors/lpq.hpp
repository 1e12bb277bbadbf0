#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include "ptx/descriptors/feature_vector.hpp"
#include "ptx/descriptors/filtering.hpp"

namespace ptx {

struct LpqParams {
  int win_size = 7;

  void validate() const {
    if (win_size < 3 || win_size % 2 == 0) throw ParameterError("LPQ window must be odd and >= 3");
  }
};

/// Frequency points in cycles per pixel: (a,0), (0,a), (a,a), (a,-a), a = 1/win.
inline std::array<std::array<double, 2>, 4> lpq_frequencies(int win_size) {
  const double a = 1.0 / win_size;
  return {{{a, 0.0}, {0.0, a}, {a, a}, {a, -a}}};
}

namespace detail {

using Cplx = std::complex<double>;

struct ComplexPlane {
  int width, height;
  std::vector<Cplx> data;
  ComplexPlane(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h) {}
  Cplx& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const Cplx& clamped(int x, int y) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return data[static_cast<std::size_t>(y) * width + x];
  }
};

// taps[k + r] = exp(-j 2 pi u k)
inline std::vector<Cplx> stft_taps(double u, int r) {
  std::vector<Cplx> taps;
  for (int k = -r; k <= r; ++k) {
    const double phase = -2.0 * std::numbers::pi * u * k;
    taps.emplace_back(std::cos(phase), std::sin(phase));
  }
  return taps;
}

inline ComplexPlane row_pass(const Plane& in, const std::vector<Cplx>& taps) {
  const int r = static_cast<int>(taps.size() / 2);
  ComplexPlane out(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      Cplx acc{};
      for (int k = -r; k <= r; ++k) acc += in.clamped(x + k, y) * taps[static_cast<std::size_t>(k + r)];
      out(x, y) = acc;
    }
  return out;
}

inline ComplexPlane col_pass(const ComplexPlane& in, const std::vector<Cplx>& taps) {
  const int r = static_cast<int>(taps.size() / 2);
  ComplexPlane out(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      Cplx acc{};
      for (int k = -r; k <= r; ++k) acc += in.clamped(x, y + k) * taps[static_cast<std::size_t>(k + r)];
      out(x, y) = acc;
    }
  return out;
}

}  // namespace detail

/// Per-pixel 8-bit phase codes. Bit 2k holds Re(F_k) >= 0 and bit 2k+1
/// holds Im(F_k) >= 0 for the k-th frequency of lpq_frequencies().
inline std::vector<std::uint8_t> lpq_codes(const GrayImage& img, const LpqParams& params = {}) {
  params.validate();
  using detail::Cplx;
  const int r = params.win_size / 2;
  const Plane base = relative_plane(img);
  const auto freqs = lpq_frequencies(params.win_size);

  std::vector<detail::ComplexPlane> coeffs;
  for (const auto& f : freqs) {
    const auto rows = detail::row_pass(base, detail::stft_taps(f[0], r));
    coeffs.push_back(detail::col_pass(rows, detail::stft_taps(f[1], r)));
  }
  std::vector<std::uint8_t> codes(img.size(), 0);
  for (std::size_t p = 0; p < img.size(); ++p) {
    std::uint8_t code = 0;
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      const Cplx c = coeffs[k].data[p];
      if (settle(c.real()) >= 0.0) code |= static_cast<std::uint8_t>(1u << (2 * k));
      if (settle(c.imag()) >= 0.0) code |= static_cast<std::uint8_t>(1u << (2 * k + 1));
    }
    codes[p] = code;
  }
  return codes;
}

inline FeatureVector lpq(const GrayImage& img, const LpqParams& params = {}) {
  std::vector<std::size_t> hist(256, 0);
  for (auto c : lpq_codes(img, params)) ++hist[c];
  return histogram_feature(DescriptorId::LPQ, hist);
}

}  // namespace ptx
