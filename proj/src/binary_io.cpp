#include "nsnet/binary_io.hpp"

#include <bit>
#include <fstream>
#include <istream>
#include <ostream>
#include <system_error>

#include "nsnet/error.hpp"

namespace nsnet {

const char* to_string(ParseErrc code) {
  switch (code) {
    case ParseErrc::bad_magic: return "bad magic";
    case ParseErrc::unknown_version: return "unknown version";
    case ParseErrc::truncated: return "truncated stream";
    case ParseErrc::duplicate_id: return "duplicate id";
    case ParseErrc::non_finite: return "non-finite value";
    case ParseErrc::invalid_field: return "invalid field";
  }
  return "parse error";
}

}  // namespace nsnet

namespace nsnet::io {

namespace {

template <typename U>
void put_le(Writer& w, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  w.bytes(buf, sizeof(U));
}

template <typename U>
U get_le(Reader& r, const char* what) {
  unsigned char buf[sizeof(U)];
  r.bytes(buf, sizeof(U), what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void Writer::bytes(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw IoError("write failed after " + std::to_string(count_) + " bytes");
  count_ += n;
}

void Writer::u16(std::uint16_t v) { put_le(*this, v); }
void Writer::u32(std::uint32_t v) { put_le(*this, v); }
void Writer::u64(std::uint64_t v) { put_le(*this, v); }
void Writer::f32(float v) { put_le(*this, std::bit_cast<std::uint32_t>(v)); }
void Writer::f64(double v) { put_le(*this, std::bit_cast<std::uint64_t>(v)); }

void Reader::bytes(void* data, std::size_t n, const char* what) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  const auto got = static_cast<std::size_t>(in_.gcount());
  consumed_ += got;
  if (got != n) {
    throw ParseError(ParseErrc::truncated, std::string("stream ended while reading ") + what +
                                               " at byte " + std::to_string(consumed_));
  }
}

std::array<char, 4> Reader::magic() {
  std::array<char, 4> tag{};
  bytes(tag.data(), tag.size(), "magic");
  return tag;
}

std::uint8_t Reader::u8(const char* what) { return get_le<std::uint8_t>(*this, what); }
std::uint16_t Reader::u16(const char* what) { return get_le<std::uint16_t>(*this, what); }
std::uint32_t Reader::u32(const char* what) { return get_le<std::uint32_t>(*this, what); }
std::uint64_t Reader::u64(const char* what) { return get_le<std::uint64_t>(*this, what); }
float Reader::f32(const char* what) { return std::bit_cast<float>(get_le<std::uint32_t>(*this, what)); }
double Reader::f64(const char* what) { return std::bit_cast<double>(get_le<std::uint64_t>(*this, what)); }

std::string Reader::str(std::size_t n, const char* what) {
  std::string s(n, '\0');
  if (n > 0) bytes(s.data(), n, what);
  return s;
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& fill) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    try {
      fill(out);
      out.flush();
      if (!out) throw IoError("write failed: " + tmp.string());
    } catch (...) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw;
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place: " + path.string());
  }
}

}  // namespace nsnet::io
