#pragma once

// Little-endian byte packing shared by the EMB1/PRB1/LBL1/ALN1 codecs.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cbdsel/error.hpp"

namespace cbdsel::detail {

class ByteWriter {
 public:
  void magic(std::string_view tag) { bytes_.insert(bytes_.end(), tag.begin(), tag.end()); }

  void u32(std::uint32_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
  void reserve(std::size_t n) { bytes_.reserve(n); }

 private:
  template <typename U>
  void put_le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  std::uint64_t offset() const noexcept { return pos_; }
  std::uint64_t remaining() const noexcept { return bytes_.size() - pos_; }

  void expect_magic(std::string_view tag) {
    need(tag.size(), "header");
    if (std::memcmp(bytes_.data() + pos_, tag.data(), tag.size()) != 0) {
      std::string got(reinterpret_cast<const char*>(bytes_.data() + pos_), tag.size());
      throw FormatError(source_ + ": wrong magic '" + got + "', expected '" + std::string(tag) + "'", pos_);
    }
    pos_ += tag.size();
  }

  std::uint32_t u32(const char* what) { return get_le<std::uint32_t>(what); }
  float f32(const char* what) { return std::bit_cast<float>(get_le<std::uint32_t>(what)); }
  double f64(const char* what) { return std::bit_cast<double>(get_le<std::uint64_t>(what)); }

  void need(std::uint64_t n, const char* what) const {
    if (remaining() < n)
      throw FormatError(source_ + ": truncated " + what + ", need " + std::to_string(n) + " bytes, have " +
                            std::to_string(remaining()),
                        pos_);
  }

  void expect_end() const {
    if (remaining() != 0)
      throw FormatError(source_ + ": " + std::to_string(remaining()) + " trailing bytes", pos_);
  }

  const std::string& source() const noexcept { return source_; }

 private:
  template <typename U>
  U get_le(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string source_;
  std::uint64_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace cbdsel::detail
