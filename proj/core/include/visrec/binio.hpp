#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace visrec {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need swaps");

// Accumulates a little-endian byte stream in memory. Files are assembled
// here in full so the trailing CRC can cover everything before it.
class ByteWriter {
 public:
  void u8(uint8_t v) { raw(&v, 1); }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void f32(float v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void magic(const char tag[5]) { raw(tag, 4); }
  void raw(const void* p, size_t n) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void f32_array(const float* p, size_t n) { raw(p, n * sizeof(float)); }
  void f64_array(const double* p, size_t n) { raw(p, n * sizeof(double)); }
  // u32 length prefix + UTF-8 bytes
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(s.data(), s.size());
  }

  size_t size() const { return buf_.size(); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

// Reads the same stream back; throws DataError on truncation.
class ByteReader {
 public:
  ByteReader(const void* data, size_t len)
      : p_(static_cast<const char*>(data)), len_(len) {}
  explicit ByteReader(const std::string& s) : ByteReader(s.data(), s.size()) {}

  uint8_t u8() { return get<uint8_t>(); }
  uint32_t u32() { return get<uint32_t>(); }
  uint64_t u64() { return get<uint64_t>(); }
  float f32() { return get<float>(); }
  double f64() { return get<double>(); }
  void expect_magic(const char tag[5], const std::string& what);
  void raw(void* out, size_t n);
  void f32_array(float* out, size_t n) { raw(out, n * sizeof(float)); }
  void f64_array(double* out, size_t n) { raw(out, n * sizeof(double)); }
  std::string str();

  size_t pos() const { return pos_; }
  size_t remaining() const { return len_ - pos_; }
  void seek(size_t pos);

 private:
  template <class T>
  T get() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }
  const char* p_;
  size_t len_;
  size_t pos_ = 0;
};

// Whole-file helpers used by every binary artifact.
void write_file(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

// Appends a CRC-64 of the writer contents and writes the file.
void write_file_with_crc(const std::string& path, const ByteWriter& w);
// Reads a file, verifies and strips the trailing CRC-64.
std::string read_file_check_crc(const std::string& path,
                                const std::string& what);

}  // namespace visrec
