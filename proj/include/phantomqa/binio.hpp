#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "phantomqa/errors.hpp"

namespace phantomqa::binio {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need byte swaps");

// Append-only little-endian buffer builder.
class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { raw(&v, 2); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void i16(std::int16_t v) { raw(&v, 2); }
  void f32(float v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void bytes(const void* p, std::size_t n) { raw(p, n); }
  void text(const std::string& s) { raw(s.data(), s.size()); }

  const std::vector<std::uint8_t>& data() const { return buf_; }
  std::size_t size() const { return buf_.size(); }

 private:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<std::uint8_t> buf_;
};

// Bounds-checked little-endian cursor over a byte buffer. Overruns surface
// as FormatError citing the byte counts so a truncated file names itself.
class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size, std::string origin)
      : data_(data), size_(size), origin_(std::move(origin)) {}
  explicit Reader(const std::vector<std::uint8_t>& buf, std::string origin = "buffer")
      : Reader(buf.data(), buf.size(), std::move(origin)) {}

  std::uint8_t u8() { return take<std::uint8_t>(); }
  std::uint16_t u16() { return take<std::uint16_t>(); }
  std::uint32_t u32() { return take<std::uint32_t>(); }
  std::uint64_t u64() { return take<std::uint64_t>(); }
  std::int16_t i16() { return take<std::int16_t>(); }
  float f32() { return take<float>(); }
  double f64() { return take<double>(); }

  void bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
  }

  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }

  void seek(std::size_t pos) {
    if (pos > size_) {
      throw FormatError(origin_ + ": seek to byte " + std::to_string(pos) + " in " +
                        std::to_string(size_) + " bytes");
    }
    pos_ = pos;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }
  bool at_end() const { return pos_ == size_; }

  void expect_end() const {
    if (!at_end()) {
      throw FormatError(origin_ + ": " + std::to_string(remaining()) +
                        " trailing bytes after the last record");
    }
  }

 private:
  template <typename T>
  T take() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void need(std::size_t n) const {
    if (size_ - pos_ < n) {
      throw FormatError(origin_ + ": truncated, expected " + std::to_string(n) +
                        " more bytes at offset " + std::to_string(pos_) + ", file holds " +
                        std::to_string(size_ - pos_));
    }
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string origin_;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + path.string());
  return buf;
}

// Write through a sibling temp file and rename, so readers never observe a
// half-written file.
inline void write_file_atomic(const std::filesystem::path& path, const void* data,
                              std::size_t size) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw IoError("write failed on " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " +
                        ec.message());
}

inline void write_file_atomic(const std::filesystem::path& path,
                              const std::vector<std::uint8_t>& buf) {
  write_file_atomic(path, buf.data(), buf.size());
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, text.data(), text.size());
}

}  // namespace phantomqa::binio
