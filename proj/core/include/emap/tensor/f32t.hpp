#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emap/tensor/tensor.hpp"

namespace emap {

// ".f32t" tensor files: "F32T", version byte 1, u8 rank, rank x u32 LE dims,
// then product(dims) IEEE-754 binary32 LE values in raster order.

std::vector<std::uint8_t> encode_f32t(const Tensor& t);
Tensor decode_f32t(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");

void write_f32t(const std::filesystem::path& path, const Tensor& t);
Tensor read_f32t(const std::filesystem::path& path);

// Little-endian helpers shared by the binary formats.
void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f32_le(std::vector<std::uint8_t>& out, float v);
std::uint32_t get_u32_le(const std::uint8_t* p);
float get_f32_le(const std::uint8_t* p);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace emap
