#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "ptx/descriptors/feature_vector.hpp"
#include "ptx/descriptors/filtering.hpp"
#include "ptx/rng.hpp"

namespace ptx {

/// A bank of square filters; filter j drives bit j of the BSIF code.
struct BsifFilterBank {
  int filter_size = 0;
  std::vector<std::vector<double>> filters;  // each filter_size^2, row-major

  int bit_count() const noexcept { return static_cast<int>(filters.size()); }

  void validate() const {
    if (filters.empty()) throw ParameterError("BSIF filter bank is empty");
    if (filter_size < 1 || filter_size % 2 == 0) throw ParameterError("BSIF filter size must be odd");
    if (filters.size() > 16) throw ParameterError("BSIF supports at most 16 bits");
    for (const auto& f : filters)
      if (f.size() != static_cast<std::size_t>(filter_size) * filter_size)
        throw ParameterError("BSIF kernel has wrong size");
  }

  bool operator==(const BsifFilterBank&) const = default;
};

/// Deterministic stand-in for a learned bank: Gaussian random kernels
/// projected to zero mean and orthonormalized (Gram-Schmidt), so they are
/// linearly independent and blind to constant images.
inline BsifFilterBank generate_bsif_bank(int filter_size, int bit_count, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(filter_size) * filter_size;
  if (filter_size < 3 || filter_size % 2 == 0) throw ParameterError("BSIF filter size must be odd and >= 3");
  if (bit_count < 1 || static_cast<std::size_t>(bit_count) >= n)
    throw ParameterError("BSIF bit count must be in [1, size^2)");
  Rng rng(seed);
  BsifFilterBank bank{filter_size, {}};
  while (bank.filters.size() < static_cast<std::size_t>(bit_count)) {
    std::vector<double> k(n);
    for (double& v : k) v = rng.normal();
    double mean = 0;
    for (double v : k) mean += v;
    mean /= static_cast<double>(n);
    for (double& v : k) v -= mean;
    for (const auto& prev : bank.filters) {
      double dot = 0;
      for (std::size_t i = 0; i < n; ++i) dot += k[i] * prev[i];
      for (std::size_t i = 0; i < n; ++i) k[i] -= dot * prev[i];
    }
    double norm = 0;
    for (double v : k) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (double& v : k) v /= norm;
    bank.filters.push_back(std::move(k));
  }
  return bank;
}

/// Reads the kernel-bank text format: `size bits` then bits blocks of
/// size*size reals.
inline BsifFilterBank read_bsif_bank(std::istream& in) {
  BsifFilterBank bank;
  int bits = 0;
  if (!(in >> bank.filter_size >> bits)) throw FormatError("kernel bank: missing `size bits` header");
  if (bank.filter_size < 1 || bits < 1) throw FormatError("kernel bank: bad header");
  const std::size_t n = static_cast<std::size_t>(bank.filter_size) * bank.filter_size;
  for (int b = 0; b < bits; ++b) {
    std::vector<double> k(n);
    for (double& v : k)
      if (!(in >> v)) throw FormatError("kernel bank: truncated kernel " + std::to_string(b));
    bank.filters.push_back(std::move(k));
  }
  std::string extra;
  if (in >> extra) throw FormatError("kernel bank: trailing data");
  bank.validate();
  return bank;
}

inline BsifFilterBank load_bsif_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open kernel bank " + path.string());
  return read_bsif_bank(in);
}

inline void write_bsif_bank(std::ostream& out, const BsifFilterBank& bank) {
  out << bank.filter_size << ' ' << bank.bit_count() << '\n' << std::setprecision(17);
  for (const auto& k : bank.filters) {
    for (int y = 0; y < bank.filter_size; ++y) {
      for (int x = 0; x < bank.filter_size; ++x)
        out << (x ? " " : "") << k[static_cast<std::size_t>(y) * bank.filter_size + x];
      out << '\n';
    }
  }
}

inline std::vector<std::uint32_t> bsif_codes(const GrayImage& img, const BsifFilterBank& bank) {
  bank.validate();
  const Plane base = relative_plane(img);
  const int r = bank.filter_size / 2;
  std::vector<std::uint32_t> codes(img.size(), 0);
  for (std::size_t j = 0; j < bank.filters.size(); ++j) {
    const Plane resp = correlate(base, bank.filters[j], r);
    for (std::size_t p = 0; p < codes.size(); ++p)
      if (settle(resp.data[p]) > 0.0) codes[p] |= 1u << j;
  }
  return codes;
}

inline FeatureVector bsif(const GrayImage& img, const BsifFilterBank& bank) {
  std::vector<std::size_t> hist(std::size_t{1} << bank.filters.size(), 0);
  for (auto c : bsif_codes(img, bank)) ++hist[c];
  return histogram_feature(DescriptorId::BSIF, hist);
}

}  // namespace ptx
