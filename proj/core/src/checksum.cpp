#include "visrec/checksum.hpp"

#include <array>
#include <fstream>
#include <vector>

#include "visrec/errors.hpp"

namespace visrec {

namespace {

std::array<uint64_t, 256> make_table() {
  // reflected form of the ECMA-182 polynomial
  constexpr uint64_t poly = 0xc96c5795d7870f42ULL;
  std::array<uint64_t, 256> table{};
  for (uint64_t i = 0; i < 256; ++i) {
    uint64_t crc = i;
    for (int bit = 0; bit < 8; ++bit) {
      crc = (crc & 1) ? (crc >> 1) ^ poly : crc >> 1;
    }
    table[i] = crc;
  }
  return table;
}

const std::array<uint64_t, 256>& table() {
  static const std::array<uint64_t, 256> t = make_table();
  return t;
}

}  // namespace

uint64_t crc64(const void* data, size_t len, uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t crc = ~seed;
  for (size_t i = 0; i < len; ++i) {
    crc = table()[(crc ^ p[i]) & 0xff] ^ (crc >> 8);
  }
  return ~crc;
}

uint64_t crc64_str(const std::string& s) { return crc64(s.data(), s.size()); }

uint64_t file_crc64(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for checksum: " + path);
  std::vector<char> buf(1 << 16);
  uint64_t state = ~uint64_t{0};
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      state = table()[(state ^ static_cast<unsigned char>(buf[i])) & 0xff] ^
              (state >> 8);
    }
  }
  return ~state;
}

}  // namespace visrec
