#pragma once

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "mangen/nn/spec.hpp"

namespace mangen::nn {

namespace checkpoint {

constexpr std::array<char, 8> kMagic{'M', 'G', 'N', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

namespace detail {

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get_le(const unsigned char* p) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace detail

inline std::uint32_t crc32_of(const unsigned char* data, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

/// Writes `bytes` to `path` through a temporary file and a rename, so a
/// crash never leaves a half-written file under the final name.
inline void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::IoError, "cannot open " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    require(static_cast<bool>(out), ErrorKind::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorKind::IoError, "rename to " + path.string() + " failed: " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Layout: magic[8] | u32 version | u64 spec hash | u64 count | f64[count] | u32 crc32 of everything before.
inline std::string encode(std::uint64_t spec_hash, const Vector& params) {
  std::vector<unsigned char> buf(kMagic.begin(), kMagic.end());
  detail::put_le(buf, kVersion);
  detail::put_le(buf, spec_hash);
  detail::put_le(buf, static_cast<std::uint64_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i) detail::put_le(buf, params[i]);
  detail::put_le(buf, crc32_of(buf.data(), buf.size()));
  return {buf.begin(), buf.end()};
}

struct Decoded {
  std::uint64_t spec_hash = 0;
  Vector params;
};

inline Decoded decode(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  constexpr std::size_t header = kMagic.size() + 4 + 8 + 8;
  require(bytes.size() >= header + 4, ErrorKind::CorruptCheckpoint, "checkpoint truncated");
  require(std::memcmp(p, kMagic.data(), kMagic.size()) == 0, ErrorKind::CorruptCheckpoint, "bad checkpoint magic");
  const auto stored_crc = detail::get_le<std::uint32_t>(p + bytes.size() - 4);
  require(crc32_of(p, bytes.size() - 4) == stored_crc, ErrorKind::CorruptCheckpoint, "checkpoint checksum mismatch");
  const auto version = detail::get_le<std::uint32_t>(p + kMagic.size());
  require(version == kVersion, ErrorKind::CorruptCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  Decoded d;
  d.spec_hash = detail::get_le<std::uint64_t>(p + kMagic.size() + 4);
  const auto count = detail::get_le<std::uint64_t>(p + kMagic.size() + 12);
  require(bytes.size() == header + 8 * count + 4, ErrorKind::CorruptCheckpoint, "checkpoint length mismatch");
  d.params.resize(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) d.params[static_cast<Eigen::Index>(i)] = detail::get_le<double>(p + header + 8 * i);
  return d;
}

}  // namespace checkpoint

inline void save(const NetworkWeights& w, const std::filesystem::path& path) {
  checkpoint::write_atomic(path, checkpoint::encode(w.spec_hash(), w.params));
}

/// Loads a checkpoint written for `spec`; a different spec hash is rejected.
inline NetworkWeights load(const std::filesystem::path& path, const NetworkSpec& spec) {
  const auto d = checkpoint::decode(checkpoint::read_file(path));
  require(d.spec_hash == spec.hash(), ErrorKind::SpecMismatch, "checkpoint " + path.string() + " was written for another spec");
  NetworkWeights w;
  w.spec = spec;
  w.layout = Layout::build(spec);
  require(static_cast<std::size_t>(d.params.size()) == w.layout.size, ErrorKind::SpecMismatch, "parameter count differs from spec");
  w.params = d.params;
  return w;
}

}  // namespace mangen::nn
