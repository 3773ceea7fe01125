#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace collabnav::binio {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

inline void put_bytes(std::ostream& os, const void* data, std::size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

/// False on short read.
template <typename T>
bool get(std::istream& is, T& value) {
  return static_cast<bool>(is.read(reinterpret_cast<char*>(&value), sizeof(T)));
}

inline bool get_bytes(std::istream& is, void* data, std::size_t n) {
  return static_cast<bool>(is.read(static_cast<char*>(data), static_cast<std::streamsize>(n)));
}

}  // namespace collabnav::binio
