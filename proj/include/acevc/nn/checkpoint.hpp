#pragma once

// ACEVC1 tensor container.
//
// Layout (little-endian):
//   "ACEVC1"                          magic, 6 bytes
//   u32 format_version
//   u64 config_hash
//   u32 entry_count
//   entry_count x { u16 name_len, name, u8 dtype, u8 ndim, u64 dims[ndim],
//                   u64 offset, u64 nbytes }
//   raw array bytes (offsets relative to the start of this section)
//   u32 crc32 of every preceding byte

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "acevc/nn/adam.hpp"
#include "acevc/nn/tape.hpp"

namespace acevc::nn {

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr char kContainerMagic[6] = {'A', 'C', 'E', 'V', 'C', '1'};

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1, kI64 = 2, kU8 = 3 };

struct TensorEntry {
  std::string name;
  DType dtype = DType::kF32;
  std::vector<std::uint64_t> shape;
  std::vector<std::uint8_t> bytes;
};

template <typename Scalar>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::kF32; }
template <>
constexpr DType dtype_of<double>() { return DType::kF64; }

/// 64-bit FNV-1a over the model kind and its canonical config text.
std::uint64_t fingerprint(std::string_view kind, std::string_view config_text);

class Container {
 public:
  std::uint32_t version = kContainerVersion;
  std::uint64_t config_hash = 0;

  void write(const std::string& path) const;
  static Container read(const std::string& path);

  std::vector<std::uint8_t> serialize() const;
  static Container deserialize(const std::vector<std::uint8_t>& data);

  bool contains(std::string_view name) const { return find(name) != nullptr; }
  const std::vector<TensorEntry>& entries() const { return entries_; }

  template <typename Scalar>
  void put_matrix(const std::string& name, const Matrix<Scalar>& m) {
    TensorEntry e{name, dtype_of<Scalar>(), {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, {}};
    e.bytes.resize(static_cast<std::size_t>(m.size()) * sizeof(Scalar));
    if (m.size()) std::memcpy(e.bytes.data(), m.data(), e.bytes.size());
    put(std::move(e));
  }

  /// Reads a rank-2 entry stored as f32 or f64, converting to Scalar.
  template <typename Scalar>
  Matrix<Scalar> get_matrix(std::string_view name) const {
    const TensorEntry& e = require(name);
    if (e.shape.size() != 2) throw Error("entry '" + std::string(name) + "' is not a matrix", ErrorCode::kFormat);
    const auto rows = static_cast<Eigen::Index>(e.shape[0]);
    const auto cols = static_cast<Eigen::Index>(e.shape[1]);
    if (e.dtype == DType::kF32) return decode<float>(e, rows, cols).template cast<Scalar>();
    if (e.dtype == DType::kF64) return decode<double>(e, rows, cols).template cast<Scalar>();
    throw Error("entry '" + std::string(name) + "' has a non-real dtype", ErrorCode::kFormat);
  }

  void put_text(const std::string& name, std::string_view text);
  std::string get_text(std::string_view name) const;
  void put_int(const std::string& name, std::int64_t value);
  std::int64_t get_int(std::string_view name) const;

  void put(TensorEntry entry);
  const TensorEntry* find(std::string_view name) const;
  const TensorEntry& require(std::string_view name) const;

 private:
  template <typename T>
  static Matrix<T> decode(const TensorEntry& e, Eigen::Index rows, Eigen::Index cols) {
    if (e.bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(T))
      throw Error("entry '" + e.name + "' byte size does not match its shape", ErrorCode::kFormat);
    Matrix<T> m(rows, cols);
    if (m.size()) std::memcpy(m.data(), e.bytes.data(), e.bytes.size());
    return m;
  }

  std::vector<TensorEntry> entries_;
};

/// Stores parameters (and optionally Adam state) under "param/", "group/"
/// and "adam/" prefixes.
template <typename Scalar>
void store_parameters(Container& c, const ParameterSet<Scalar>& params, const Adam<Scalar>* adam) {
  for (int i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    c.put_matrix("param/" + p.name, p.value);
    c.put_text("group/" + p.name, p.group);
    if (adam) {
      c.put_matrix("adam/m/" + p.name, adam->first_moments()[static_cast<std::size_t>(i)]);
      c.put_matrix("adam/v/" + p.name, adam->second_moments()[static_cast<std::size_t>(i)]);
    }
  }
  if (adam) c.put_int("adam/step", adam->steps());
}

/// Restores values into an already constructed ParameterSet; names, groups
/// and shapes must match exactly.
template <typename Scalar>
void load_parameters(const Container& c, ParameterSet<Scalar>& params, Adam<Scalar>* adam) {
  for (int i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    Matrix<Scalar> v = c.get_matrix<Scalar>("param/" + p.name);
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols())
      throw Error("shape mismatch for parameter '" + p.name + "'", ErrorCode::kFormat);
    if (c.get_text("group/" + p.name) != p.group)
      throw Error("group mismatch for parameter '" + p.name + "'", ErrorCode::kFormat);
    p.value = std::move(v);
    if (adam && c.contains("adam/m/" + p.name)) {
      adam->first_moments()[static_cast<std::size_t>(i)] = c.get_matrix<Scalar>("adam/m/" + p.name);
      adam->second_moments()[static_cast<std::size_t>(i)] = c.get_matrix<Scalar>("adam/v/" + p.name);
    }
  }
  if (adam && c.contains("adam/step")) adam->set_steps(static_cast<long>(c.get_int("adam/step")));
}

}  // namespace acevc::nn
