#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "soap/error.hpp"

namespace soap::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written as little-endian by memcpy");

/// Writes via a temp file in the same directory and renames over `path`.
void write_file_atomic(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);
bool exists(const std::string& path);

class ByteWriter {
 public:
  template <class T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_bytes(std::string_view b) { out_.append(b); }
  void put_floats(const float* p, std::size_t n) {
    out_.append(reinterpret_cast<const char*>(p), n * sizeof(float));
  }
  const std::string& bytes() const { return out_; }

 private:
  std::string out_;
};

/// Bounds-checked reader; truncation raises kFormatError with the offset.
class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string source) : in_(bytes), source_(std::move(source)) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void get_floats(float* p, std::size_t n) {
    need(n * sizeof(float));
    std::memcpy(p, in_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }
  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == in_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::kFormatError, source_ + ": " + what + " at offset " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n)
      fail("truncated (need " + std::to_string(n) + " bytes, have " + std::to_string(in_.size() - pos_) + ")");
  }

  std::string_view in_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace soap::io
