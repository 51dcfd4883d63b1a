#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "udts/errors.hpp"

namespace udts {

// Binary file helpers. All integers are fixed-width little-endian regardless
// of host endianness; doubles are stored as their IEEE-754 bit pattern, so
// round trips are bit-exact.

class BinaryWriter {
public:
  explicit BinaryWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open for writing: " + path);
  }

  void write_bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write failed: " + path_);
    offset_ += n;
  }

  void write_u8(std::uint8_t v) { write_bytes(&v, 1); }

  void write_u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffU);
    write_bytes(b, 4);
  }

  void write_u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffU);
    write_bytes(b, 8);
  }

  void write_f64(double v) { write_u64(std::bit_cast<std::uint64_t>(v)); }

  void write_magic(const char magic[8]) { write_bytes(magic, 8); }

  void write_f64_seq(const std::vector<double>& seq) {
    for (double v : seq) write_f64(v);
  }

  void write_u32_seq(const std::vector<std::uint32_t>& seq) {
    for (std::uint32_t v : seq) write_u32(v);
  }

  std::uint64_t offset() const { return offset_; }

  void close() {
    out_.close();
    if (!out_) throw IoError("close failed: " + path_);
  }

private:
  std::string path_;
  std::ofstream out_;
  std::uint64_t offset_ = 0;
};

class BinaryReader {
public:
  explicit BinaryReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open for reading: " + path);
  }

  void read_bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw FormatError(path_ + ": truncated at byte " + std::to_string(offset_));
    }
    offset_ += n;
  }

  std::uint8_t read_u8() {
    std::uint8_t v = 0;
    read_bytes(&v, 1);
    return v;
  }

  std::uint32_t read_u32() {
    unsigned char b[4];
    read_bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }

  std::uint64_t read_u64() {
    unsigned char b[8];
    read_bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  double read_f64() { return std::bit_cast<double>(read_u64()); }

  void expect_magic(const char magic[8], const char* what) {
    const std::uint64_t at = offset_;
    char got[8];
    read_bytes(got, 8);
    if (std::memcmp(got, magic, 8) != 0) {
      throw FormatError(path_ + ": bad " + std::string(what) + " magic at byte " +
                        std::to_string(at));
    }
  }

  std::vector<double> read_f64_seq(std::size_t n) {
    std::vector<double> seq(n);
    for (auto& v : seq) v = read_f64();
    return seq;
  }

  std::vector<std::uint32_t> read_u32_seq(std::size_t n) {
    std::vector<std::uint32_t> seq(n);
    for (auto& v : seq) v = read_u32();
    return seq;
  }

  std::uint64_t offset() const { return offset_; }

  const std::string& path() const { return path_; }

private:
  std::string path_;
  std::ifstream in_;
  std::uint64_t offset_ = 0;
};

}  // namespace udts
