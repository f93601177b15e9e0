#include "emap/tensor/f32t.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace emap {

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32_le(std::vector<std::uint8_t>& out, float v) { put_u32_le(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32_le(const std::uint8_t* p) { return std::bit_cast<float>(get_u32_le(p)); }

std::vector<std::uint8_t> encode_f32t(const Tensor& t) {
  if (t.rank() > 255) throw ShapeError("f32t supports rank <= 255");
  std::vector<std::uint8_t> out{'F', '3', '2', 'T', 1, static_cast<std::uint8_t>(t.rank())};
  out.reserve(6 + 4 * t.rank() + 4 * t.size());
  for (const auto d : t.shape()) put_u32_le(out, static_cast<std::uint32_t>(d));
  for (const float v : t.data()) put_f32_le(out, v);
  return out;
}

Tensor decode_f32t(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), "F32T", 4) != 0)
    throw IoError(source + ": not an f32t file (bad magic)");
  if (bytes[4] != 1) throw IoError(source + ": unsupported f32t version " + std::to_string(bytes[4]));
  const std::size_t rank = bytes[5];
  if (bytes.size() < 6 + 4 * rank) throw IoError(source + ": truncated f32t header");
  Shape shape(rank);
  for (std::size_t i = 0; i < rank; ++i) shape[i] = get_u32_le(bytes.data() + 6 + 4 * i);
  const std::size_t count = numel(shape);
  const std::size_t offset = 6 + 4 * rank;
  if (bytes.size() != offset + 4 * count)
    throw IoError(source + ": payload holds " + std::to_string((bytes.size() - offset) / 4) + " values, header says " +
                  std::to_string(count));
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = get_f32_le(bytes.data() + offset + 4 * i);
  return Tensor(std::move(shape), std::move(data));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string() + ": write failed");
}

void write_f32t(const std::filesystem::path& path, const Tensor& t) { write_file_bytes(path, encode_f32t(t)); }

Tensor read_f32t(const std::filesystem::path& path) { return decode_f32t(read_file_bytes(path), path.string()); }

}  // namespace emap
