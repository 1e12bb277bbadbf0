#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "ptx/error.hpp"

namespace ptx {

inline constexpr char kModelMagic[5] = {'P', 'T', 'X', 'M', '1'};

/// Little-endian primitive writer for model containers.
class BinaryWriter {
public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void vec(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void strings(const std::vector<std::string>& v) {
    u64(v.size());
    for (const auto& s : v) str(s);
  }
  void magic() { out_.write(kModelMagic, sizeof kModelMagic); }

private:
  std::ostream& out_;
};

class BinaryReader {
public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  std::uint8_t u8() {
    const int c = in_.get();
    if (c == std::char_traits<char>::eof()) throw FormatError("truncated model container");
    return static_cast<std::uint8_t>(c);
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::size_t count(std::size_t limit = std::size_t{1} << 32) {
    const auto n = u64();
    if (n > limit) throw FormatError("implausible length in model container");
    return static_cast<std::size_t>(n);
  }
  std::string str() {
    std::string s(count(), '\0');
    in_.read(s.data(), static_cast<std::streamsize>(s.size()));
    if (!in_) throw FormatError("truncated model container");
    return s;
  }
  std::vector<double> vec() {
    std::vector<double> v(count());
    for (double& x : v) x = f64();
    return v;
  }
  std::vector<std::string> strings() {
    std::vector<std::string> v(count());
    for (auto& s : v) s = str();
    return v;
  }
  void magic() {
    char buf[sizeof kModelMagic];
    in_.read(buf, sizeof buf);
    if (!in_ || std::memcmp(buf, kModelMagic, sizeof buf) != 0) throw FormatError("not a PTXM1 model container");
  }

private:
  std::istream& in_;
};

}  // namespace ptx
