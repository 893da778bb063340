#include "mcpnet/bytes.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace mcpnet {

namespace {

std::uint32_t crc_of(const std::uint8_t* p, std::size_t n) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(p), static_cast<uInt>(n)));
}

}  // namespace

void ByteWriter::put_bytes(const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  buf_.insert(buf_.end(), b, b + n);
}

void ByteWriter::put_u32(std::uint32_t v) {
  std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                       static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
  put_bytes(b, 4);
}

void ByteWriter::put_f32(float v) {
  static_assert(sizeof(float) == 4);
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(bits);
}

void ByteWriter::put_crc32() { put_u32(crc_of(buf_.data(), buf_.size())); }

void ByteWriter::write_file(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

ByteReader ByteReader::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open: " + path.string());
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw IoError("read failed: " + path.string());
  return ByteReader(std::move(bytes));
}

const std::uint8_t* ByteReader::take(std::size_t n) {
  if (pos_ + n > buf_.size()) throw ChecksumMismatch("stream ends mid-record (truncated file?)");
  const std::uint8_t* p = buf_.data() + pos_;
  pos_ += n;
  return p;
}

void ByteReader::expect_magic(const char magic[4]) {
  if (buf_.size() < 4 || std::memcmp(buf_.data() + pos_, magic, 4) != 0)
    throw BadMagic(std::string("expected magic '") + std::string(magic, 4) + "'");
  pos_ += 4;
}

std::uint32_t ByteReader::get_u32() {
  const std::uint8_t* b = take(4);
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

float ByteReader::get_f32() {
  const std::uint32_t bits = get_u32();
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void ByteReader::verify_crc32() const {
  if (buf_.size() < 4) throw ChecksumMismatch("file too short to hold a checksum");
  const std::size_t body = buf_.size() - 4;
  const std::uint8_t* t = buf_.data() + body;
  const std::uint32_t stored = static_cast<std::uint32_t>(t[0]) |
                               static_cast<std::uint32_t>(t[1]) << 8 |
                               static_cast<std::uint32_t>(t[2]) << 16 |
                               static_cast<std::uint32_t>(t[3]) << 24;
  if (stored != crc_of(buf_.data(), body)) throw ChecksumMismatch("CRC32 mismatch");
}

}  // namespace mcpnet
