#ifndef AEFOCL_BINARY_IO_HPP_
#define AEFOCL_BINARY_IO_HPP_

// Little-endian scalar I/O shared by the feature-file and checkpoint formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "aefocl/error.hpp"

namespace aefocl::io {

template <typename T>
  requires std::is_arithmetic_v<T>
void write_le(std::ostream& os, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  os.write(bytes.data(), sizeof(T));
}

// Tracks the byte offset so format errors can say where they happened.
class LeReader {
 public:
  explicit LeReader(std::istream& is, std::uint64_t offset = 0) : is_(is), offset_(offset) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T read(const char* what) {
    std::array<char, sizeof(T)> bytes;
    is_.read(bytes.data(), sizeof(T));
    if (is_.gcount() != static_cast<std::streamsize>(sizeof(T))) {
      throw FormatError(std::string("truncated input while reading ") + what, offset_);
    }
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    offset_ += sizeof(T);
    return value;
  }

  std::array<char, 4> read_tag(const char* what) {
    std::array<char, 4> tag{};
    is_.read(tag.data(), 4);
    if (is_.gcount() != 4) throw FormatError(std::string("truncated input while reading ") + what, offset_);
    offset_ += 4;
    return tag;
  }

  std::uint64_t offset() const noexcept { return offset_; }
  std::istream& stream() noexcept { return is_; }

 private:
  std::istream& is_;
  std::uint64_t offset_;
};

inline void write_tag(std::ostream& os, const char (&tag)[5]) { os.write(tag, 4); }

}  // namespace aefocl::io

#endif  // AEFOCL_BINARY_IO_HPP_
