#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace visrec {

// CRC-64/XZ (reflected ECMA-182 polynomial, init and xorout all-ones).
uint64_t crc64(const void* data, size_t len, uint64_t seed = 0);

uint64_t crc64_str(const std::string& s);

// CRC-64 of an entire file; used as artifact fingerprint.
uint64_t file_crc64(const std::string& path);

}  // namespace visrec
