#pragma once

// Little-endian primitives shared by the NSEB, NSPJ and NSHD formats.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>

namespace nsnet::io {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n);
  void magic(std::string_view tag) { bytes(tag.data(), tag.size()); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);

  std::size_t count() const noexcept { return count_; }

 private:
  std::ostream& out_;
  std::size_t count_ = 0;
};

/// Every short read raises ParseError(truncated) naming `what`.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(void* data, std::size_t n, const char* what);
  std::array<char, 4> magic();
  std::uint8_t u8(const char* what);
  std::uint16_t u16(const char* what);
  std::uint32_t u32(const char* what);
  std::uint64_t u64(const char* what);
  float f32(const char* what);
  double f64(const char* what);
  std::string str(std::size_t n, const char* what);

  std::size_t consumed() const noexcept { return consumed_; }

 private:
  std::istream& in_;
  std::size_t consumed_ = 0;
};

/// Writes through a sibling temporary file and renames it over `path` only
/// after `fill` returns and the stream flushed cleanly.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& fill);

}  // namespace nsnet::io
