#include "emap/data/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>

#include "emap/tensor/f32t.hpp"

#ifdef EMAP_HAVE_PNG
#include <png.h>
#endif

namespace emap {
namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < b.size() && !std::isspace(b[pos]) && b[pos] != '#') tok.push_back(static_cast<char>(b[pos++]));
  return tok;
}

std::size_t parse_dim(const std::string& tok, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(tok, &used);
    if (used == tok.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw IoError(path.string() + ": malformed PGM header field '" + tok + "'");
}

Tensor read_pgm(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 2;
  const std::size_t w = parse_dim(pgm_token(bytes, pos), path);
  const std::size_t h = parse_dim(pgm_token(bytes, pos), path);
  const std::size_t maxval = parse_dim(pgm_token(bytes, pos), path);
  if (maxval > 65535) throw IoError(path.string() + ": PGM maxval " + std::to_string(maxval) + " out of range");
  ++pos;  // single whitespace byte before the raster
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  if (bytes.size() < pos + h * w * bpp) throw IoError(path.string() + ": PGM raster truncated");
  Tensor t({1, 1, h, w});
  for (std::size_t i = 0; i < h * w; ++i) {
    const unsigned v = bpp == 1 ? bytes[pos + i] : (unsigned{bytes[pos + 2 * i]} << 8) | bytes[pos + 2 * i + 1];
    t[i] = static_cast<float>(static_cast<double>(v) / static_cast<double>(maxval));
  }
  return t;
}

#ifdef EMAP_HAVE_PNG
Tensor read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError(path.string() + ": " + image.message);
  const bool gray8 = (image.format & PNG_FORMAT_FLAG_COLOR) == 0 && PNG_IMAGE_SAMPLE_COMPONENT_SIZE(image.format) == 1;
  if (!gray8) {
    png_image_free(&image);
    throw IoError(path.string() + ": only 8-bit grayscale PNG is supported");
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr))
    throw IoError(path.string() + ": " + image.message);
  Tensor t({1, 1, image.height, image.width});
  for (std::size_t i = 0; i < buf.size(); ++i) t[i] = static_cast<float>(buf[i] / 255.0);
  return t;
}
#endif

}  // namespace

bool png_supported() noexcept {
#ifdef EMAP_HAVE_PNG
  return true;
#else
  return false;
#endif
}

void write_pgm(const std::filesystem::path& path, const float* values, std::size_t h, std::size_t w,
               unsigned maxval) {
  if (maxval != 255 && maxval != 65535) throw ArgumentError("PGM maxval must be 255 or 65535");
  const std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + h * w * (maxval > 255 ? 2 : 1));
  for (std::size_t i = 0; i < h * w; ++i) {
    const double v = std::clamp(static_cast<double>(values[i]), 0.0, 1.0);
    const auto q = static_cast<unsigned>(std::lround(v * maxval));
    if (maxval > 255) out.push_back(static_cast<std::uint8_t>(q >> 8));
    out.push_back(static_cast<std::uint8_t>(q & 0xff));
  }
  write_file_bytes(path, out);
}

Tensor read_gray_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return read_pgm(path, bytes);
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G') {
#ifdef EMAP_HAVE_PNG
    return read_png(path);
#else
    throw IoError(path.string() + ": PNG input needs a build with libpng");
#endif
  }
  throw IoError(path.string() + ": not a binary PGM (P5) or PNG file");
}

}  // namespace emap
