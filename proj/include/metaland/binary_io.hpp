#pragma once

// Little-endian primitive encoding shared by the tile and checkpoint formats.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "metaland/errors.hpp"

namespace metaland::io {

class Writer {
 public:
  void bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buffer_.insert(buffer_.end(), p, p + size);
  }
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    bytes(raw, sizeof(T));
  }
  const std::vector<std::uint8_t>& buffer() const { return buffer_; }
  /// Writes the buffer; throws MissingInput if the file cannot be created.
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::uint8_t> buffer_;
};

class Reader {
 public:
  /// Loads the whole file; throws MissingInput if it cannot be opened.
  explicit Reader(const std::filesystem::path& path);

  std::uint64_t offset() const { return offset_; }
  bool at_end() const { return offset_ == data_.size(); }
  std::uint64_t remaining() const { return data_.size() - offset_; }
  const std::string& path() const { return path_; }

  void bytes(void* out, std::size_t size, const char* what) {
    if (data_.size() - offset_ < size) {
      throw FormatError(path_, offset_, std::string("truncated file while reading ") + what);
    }
    std::memcpy(out, data_.data() + offset_, size);
    offset_ += size;
  }
  template <typename T>
  T get(const char* what) {
    std::uint8_t raw[sizeof(T)];
    bytes(raw, sizeof(T), what);
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }
  /// Checks a magic byte string at the current offset.
  void expect_magic(const std::string& magic);

 private:
  std::string path_;
  std::vector<std::uint8_t> data_;
  std::uint64_t offset_ = 0;
};

}  // namespace metaland::io
