#include "visrec/binio.hpp"

#include <cstring>
#include <fstream>

#include "visrec/checksum.hpp"
#include "visrec/errors.hpp"

namespace visrec {

void ByteReader::expect_magic(const char tag[5], const std::string& what) {
  char got[4];
  raw(got, 4);
  if (std::memcmp(got, tag, 4) != 0) {
    throw DataError(what + ": bad magic, expected '" + std::string(tag, 4) +
                    "'");
  }
}

void ByteReader::raw(void* out, size_t n) {
  if (pos_ + n > len_) throw DataError("truncated data");
  std::memcpy(out, p_ + pos_, n);
  pos_ += n;
}

std::string ByteReader::str() {
  uint32_t n = u32();
  if (pos_ + n > len_) throw DataError("truncated string");
  std::string s(p_ + pos_, n);
  pos_ += n;
  return s;
}

void ByteReader::seek(size_t pos) {
  if (pos > len_) throw DataError("seek past end of data");
  pos_ = pos;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_with_crc(const std::string& path, const ByteWriter& w) {
  uint64_t crc = crc64(w.bytes().data(), w.bytes().size());
  std::string out = w.bytes();
  char tail[8];
  std::memcpy(tail, &crc, 8);
  out.append(tail, 8);
  write_file(path, out);
}

std::string read_file_check_crc(const std::string& path,
                                const std::string& what) {
  std::string bytes = read_file(path);
  if (bytes.size() < 8) throw DataError(what + ": file too short: " + path);
  uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  bytes.resize(bytes.size() - 8);
  uint64_t actual = crc64(bytes.data(), bytes.size());
  if (stored != actual) {
    throw DataError(what + ": checksum mismatch, file is corrupt: " + path);
  }
  return bytes;
}

}  // namespace visrec
