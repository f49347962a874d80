#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "anae/error.hpp"
#include "anae/graph.hpp"

namespace anae {

// Binary layout (all integers little-endian):
//   "ANAE"  u32 version
//   repeated until EOF: u32 name_len, name bytes, u64 rows, u64 cols,
//                       rows*cols f64 values in row-major order
inline constexpr std::array<char, 4> kCheckpointMagic{'A', 'N', 'A', 'E'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedMatrix {
  std::string name;
  Matrix value;
};

namespace detail {

template <typename T>
void write_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
bool read_le(std::istream& in, T& v) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  std::memcpy(&v, bytes.data(), sizeof(T));
  return true;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const std::vector<NamedMatrix>& params) {
  out.write(kCheckpointMagic.data(), 4);
  detail::write_le<std::uint32_t>(out, kCheckpointVersion);
  for (const auto& p : params) {
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.rows()));
    detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.cols()));
    for (Index k = 0; k < p.value.size(); ++k) detail::write_le<double>(out, p.value.data()[k]);
  }
  if (!out) throw IoError("failed writing checkpoint");
}

inline std::vector<NamedMatrix> read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kCheckpointMagic) throw ParseError("not an ANAE checkpoint");
  std::uint32_t version = 0;
  if (!detail::read_le(in, version)) throw ParseError("truncated checkpoint header");
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));
  std::vector<NamedMatrix> out;
  std::uint32_t name_len = 0;
  while (detail::read_le(in, name_len)) {
    NamedMatrix p;
    p.name.resize(name_len);
    std::uint64_t rows = 0, cols = 0;
    if (!in.read(p.name.data(), name_len) || !detail::read_le(in, rows) || !detail::read_le(in, cols))
      throw ParseError("truncated checkpoint record");
    p.value.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index k = 0; k < p.value.size(); ++k)
      if (!detail::read_le(in, p.value.data()[k])) throw ParseError("truncated values for '" + p.name + "'");
    out.push_back(std::move(p));
  }
  return out;
}

inline void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedMatrix>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, params);
}

inline std::vector<NamedMatrix> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace anae
