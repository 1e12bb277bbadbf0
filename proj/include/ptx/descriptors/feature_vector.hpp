#pragma once

#include <array>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ptx/error.hpp"

namespace ptx {

enum class DescriptorId { LBP, EQP, LDN, LETRIST, BSIF, LPQ, OBIF, INCEPTIONV3, EXTERNAL };

inline constexpr std::array<DescriptorId, 8> kPaperDescriptors = {
    DescriptorId::LBP,  DescriptorId::EQP, DescriptorId::LDN,  DescriptorId::LETRIST,
    DescriptorId::BSIF, DescriptorId::LPQ, DescriptorId::OBIF, DescriptorId::INCEPTIONV3};

inline std::string_view descriptor_name(DescriptorId id) {
  switch (id) {
    case DescriptorId::LBP: return "LBP";
    case DescriptorId::EQP: return "EQP";
    case DescriptorId::LDN: return "LDN";
    case DescriptorId::LETRIST: return "LETRIST";
    case DescriptorId::BSIF: return "BSIF";
    case DescriptorId::LPQ: return "LPQ";
    case DescriptorId::OBIF: return "OBIF";
    case DescriptorId::INCEPTIONV3: return "INCEPTIONV3";
    case DescriptorId::EXTERNAL: return "EXTERNAL";
  }
  return "?";
}

inline std::optional<DescriptorId> parse_descriptor_id(std::string_view name) {
  for (auto id : kPaperDescriptors)
    if (descriptor_name(id) == name) return id;
  if (name == "EXTERNAL") return DescriptorId::EXTERNAL;
  return std::nullopt;
}

/// Output dimension of each descriptor in its reference configuration.
/// EXTERNAL has no fixed dimension.
inline std::optional<std::size_t> declared_dim(DescriptorId id) {
  switch (id) {
    case DescriptorId::LBP: return 59;
    case DescriptorId::EQP: return 256;
    case DescriptorId::LDN: return 56;
    case DescriptorId::LETRIST: return 413;
    case DescriptorId::BSIF: return 256;
    case DescriptorId::LPQ: return 256;
    case DescriptorId::OBIF: return 484;
    case DescriptorId::INCEPTIONV3: return 2048;
    case DescriptorId::EXTERNAL: return std::nullopt;
  }
  return std::nullopt;
}

struct FeatureVector {
  DescriptorId descriptor = DescriptorId::EXTERNAL;
  std::string external_name;  // only for EXTERNAL
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }

  std::string name() const {
    return descriptor == DescriptorId::EXTERNAL ? external_name : std::string(descriptor_name(descriptor));
  }

  bool operator==(const FeatureVector&) const = default;
};

/// Divides a histogram of counts by its total. An empty histogram stays zero.
inline std::vector<double> l1_normalize(std::vector<double> counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (total > 0)
    for (double& c : counts) c /= total;
  return counts;
}

inline FeatureVector histogram_feature(DescriptorId id, const std::vector<std::size_t>& counts) {
  std::vector<double> v(counts.begin(), counts.end());
  return FeatureVector{id, {}, l1_normalize(std::move(v))};
}

}  // namespace ptx
