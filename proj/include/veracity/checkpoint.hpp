#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "veracity/autograd.hpp"
#include "veracity/error.hpp"

namespace veracity {

// Binary parameter blob:
//   "VERACKPT" | u32 version | u32 count | count x { u32 name_len | name |
//   i64 rows | i64 cols | rows*cols f64 column-major }
// Native byte order; checkpoints are not meant to move between architectures.
inline constexpr char kCheckpointMagic[8] = {'V', 'E', 'R', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw LoadError("checkpoint truncated");
  return v;
}

}  // namespace detail

inline void save_parameters(const std::vector<ag::Parameter*>& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod(out, kCheckpointVersion);
  detail::write_pod(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    detail::write_pod(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    detail::write_pod(out, static_cast<std::int64_t>(p->value.rows()));
    detail::write_pod(out, static_cast<std::int64_t>(p->value.cols()));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p->value.size())));
  }
  if (!out) throw Error("write failed for " + path.string());
}

// Every parameter in `params` must be present in the file with the same shape.
inline void load_parameters(const std::vector<ag::Parameter*>& params, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw LoadError(path.string() + " is not a parameter checkpoint");
  }
  if (detail::read_pod<std::uint32_t>(in) != kCheckpointVersion) throw LoadError("unsupported checkpoint version");
  const auto count = detail::read_pod<std::uint32_t>(in);
  std::unordered_map<std::string, ag::Matrix> stored;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::read_pod<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rows = detail::read_pod<std::int64_t>(in);
    const auto cols = detail::read_pod<std::int64_t>(in);
    if (rows < 0 || cols < 0) throw LoadError("negative parameter shape in checkpoint");
    ag::Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    if (!in) throw LoadError("checkpoint truncated");
    stored.emplace(std::move(name), std::move(m));
  }
  for (auto* p : params) {
    auto it = stored.find(p->name);
    if (it == stored.end()) throw LoadError("checkpoint lacks parameter " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw LoadError("shape mismatch for parameter " + p->name);
    }
    p->value = it->second;
    p->zero_grad();
  }
}

// FNV-1a over the raw parameter bytes; used to tell independently
// initialised models apart.
inline std::uint64_t parameter_checksum(const std::vector<ag::Parameter*>& params) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    for (std::size_t i = 0; i < sizeof(double) * static_cast<std::size_t>(p->value.size()); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace veracity
