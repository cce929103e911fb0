#include "wtalc/binary_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "wtalc/errors.hpp"

namespace wtalc::io {
namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& buf, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(raw), std::end(raw));
  buf.insert(buf.end(), std::begin(raw), std::end(raw));
}

template <typename T>
T get_le(std::span<const std::uint8_t> raw) {
  std::uint8_t tmp[sizeof(T)];
  std::memcpy(tmp, raw.data(), sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(tmp), std::end(tmp));
  T value;
  std::memcpy(&value, tmp, sizeof(T));
  return value;
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to '" + path.string() + "'");
}

void ByteWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void ByteWriter::u64(std::uint64_t v) { put_le(buf_, v); }
void ByteWriter::f32(float v) { put_le(buf_, v); }
void ByteWriter::f64(double v) { put_le(buf_, v); }
void ByteWriter::bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
void ByteWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
  if (remaining() < n) {
    throw FormatError(what_ + ": truncated (needed " + std::to_string(n) + " bytes at offset " +
                      std::to_string(pos_) + ", " + std::to_string(remaining()) + " left)");
  }
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t ByteReader::u32() { return get_le<std::uint32_t>(take(4)); }
std::uint64_t ByteReader::u64() { return get_le<std::uint64_t>(take(8)); }
float ByteReader::f32() { return get_le<float>(take(4)); }
double ByteReader::f64() { return get_le<double>(take(8)); }
std::string ByteReader::str() {
  const std::uint32_t n = u32();
  auto raw = take(n);
  return {raw.begin(), raw.end()};
}

}  // namespace wtalc::io
