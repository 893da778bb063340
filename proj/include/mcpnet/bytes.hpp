#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mcpnet/common.hpp"

namespace mcpnet {

// Little-endian byte stream assembler. Checkpoints and point-set sidecars are
// written as: payload bytes, then a CRC32 of everything before it.
class ByteWriter {
 public:
  void put_bytes(const void* p, std::size_t n);
  void put_magic(const char magic[4]) { put_bytes(magic, 4); }
  void put_u32(std::uint32_t v);
  void put_f32(float v);

  // Appends the CRC32 of all bytes written so far.
  void put_crc32();

  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  void write_file(const std::filesystem::path& path) const;

 private:
  std::vector<std::uint8_t> buf_;
};

// Reader with the matching conventions. Overruns throw ChecksumMismatch:
// a file that ends mid-stream is treated as corrupt, not as an I/O failure.
class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : buf_(std::move(bytes)) {}

  static ByteReader from_file(const std::filesystem::path& path);

  void expect_magic(const char magic[4]);
  std::uint32_t get_u32();
  float get_f32();

  // Verifies that the final 4 bytes are the CRC32 of everything before them.
  // Must be called before consuming the payload (it does not move the cursor).
  void verify_crc32() const;

  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  const std::uint8_t* take(std::size_t n);

  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

}  // namespace mcpnet
