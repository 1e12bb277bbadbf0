#pragma once

#include <filesystem>
#include <sstream>
#include <string>

#include "ptx/descriptors/bsif.hpp"
#include "ptx/descriptors/eqp.hpp"
#include "ptx/descriptors/external.hpp"
#include "ptx/descriptors/feature_vector.hpp"
#include "ptx/descriptors/ldn.hpp"
#include "ptx/descriptors/lbp.hpp"
#include "ptx/descriptors/lpq.hpp"
#include "ptx/descriptors/obif.hpp"
#include "ptx/imaging.hpp"
#include "ptx/io/feature_cache_format.hpp"
#include "ptx/rng.hpp"

namespace ptx {

inline constexpr int kDefaultBsifSize = 11;
inline constexpr int kDefaultBsifBits = 8;
inline constexpr std::uint64_t kDefaultBsifSeed = 1;

/// One descriptor together with its parameters. Only the block matching
/// `id` is consulted.
struct DescriptorConfig {
  DescriptorId id = DescriptorId::LBP;
  std::string external_name;

  LbpParams lbp;
  EqpParams eqp;
  LdnParams ldn;
  LpqParams lpq;
  BsifFilterBank bsif_bank;
  ObifParams obif;

  std::filesystem::path external_path;
  std::size_t external_dim = 0;

  static DescriptorConfig defaults(DescriptorId id) {
    DescriptorConfig c;
    c.id = id;
    if (id == DescriptorId::BSIF) c.bsif_bank = generate_bsif_bank(kDefaultBsifSize, kDefaultBsifBits, kDefaultBsifSeed);
    if (auto d = declared_dim(id)) c.external_dim = *d;
    return c;
  }

  bool is_external() const {
    return id == DescriptorId::LETRIST || id == DescriptorId::INCEPTIONV3 || id == DescriptorId::EXTERNAL;
  }

  std::string name() const { return id == DescriptorId::EXTERNAL ? external_name : std::string(descriptor_name(id)); }

  std::size_t dim() const {
    switch (id) {
      case DescriptorId::LBP: return kUniformLbpBins;
      case DescriptorId::EQP: return 256;
      case DescriptorId::LDN: return kLdnBins;
      case DescriptorId::LPQ: return 256;
      case DescriptorId::BSIF: return std::size_t{1} << bsif_bank.filters.size();
      case DescriptorId::OBIF: return obif.dim();
      default: return external_dim;
    }
  }

  /// Stable text rendering of every parameter that affects the output.
  std::string canonical() const {
    std::ostringstream s;
    s << name() << ';';
    auto hood = [&](const NeighborhoodSpec& n) {
      s << "P=" << n.neighbor_count << ",off=" << format_real(n.angular_offset);
      if (auto* c = std::get_if<Circle>(&n.topology))
        s << ",r=" << format_real(c->radius);
      else {
        const auto& e = std::get<Ellipse>(n.topology);
        s << ",a=" << format_real(e.semi_x) << ",b=" << format_real(e.semi_y);
      }
      s << '|';
    };
    switch (id) {
      case DescriptorId::LBP: hood(lbp.neighborhood); break;
      case DescriptorId::EQP:
        s << "t1=" << format_real(eqp.tau1) << ",t2=" << format_real(eqp.tau2) << '|';
        for (const auto& n : eqp.neighborhoods) hood(n);
        break;
      case DescriptorId::LDN: s << "sigma=" << format_real(ldn.sigma); break;
      case DescriptorId::LPQ: s << "win=" << lpq.win_size; break;
      case DescriptorId::BSIF: {
        std::ostringstream bank;
        write_bsif_bank(bank, bsif_bank);
        s << "bank=" << hex_digest(bank.str());
        break;
      }
      case DescriptorId::OBIF:
        s << "scales=";
        for (double v : obif.scales) s << format_real(v) << ',';
        s << "eps=" << format_real(obif.epsilon) << ",n=" << obif.orientation_levels;
        break;
      default: s << "external=" << external_path.string() << ",dim=" << external_dim; break;
    }
    return s.str();
  }

  std::string digest() const { return hex_digest(canonical()); }
};

/// Computes one image-based descriptor. External descriptors are not
/// computable from pixels and raise ParameterError.
inline FeatureVector compute_descriptor(const DescriptorConfig& cfg, const GrayImage& img) {
  switch (cfg.id) {
    case DescriptorId::LBP: return lbp(img, cfg.lbp);
    case DescriptorId::EQP: return eqp(img, cfg.eqp);
    case DescriptorId::LDN: return ldn(img, cfg.ldn);
    case DescriptorId::LPQ: return lpq(img, cfg.lpq);
    case DescriptorId::BSIF: return bsif(img, cfg.bsif_bank);
    case DescriptorId::OBIF: return obifs(img, cfg.obif);
    default: throw ParameterError(cfg.name() + " is ingested from precomputed files, not computed");
  }
}

}  // namespace ptx
