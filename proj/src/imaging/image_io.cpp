#include "dehaze/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dehaze/errors.hpp"

namespace dhz::io {
namespace {

namespace fs = std::filesystem;

// Channel-interleaved float buffer, the common currency of all codecs below.
struct RawRaster {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;
};

enum class Format { kPng, kPnm, kPfm };

Format format_for(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return Format::kPng;
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return Format::kPnm;
  if (ext == ".pfm") return Format::kPfm;
  throw std::invalid_argument("unsupported image extension '" + ext + "' for " + path.string());
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

// --- PNG ------------------------------------------------------------------

RawRaster read_png(const fs::path& path) {
  FilePtr file = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng: cannot create info struct");
  }

  RawRaster raw;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.channels = channels;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * raw.height);
  rows.resize(raw.height);
  for (int y = 0; y < raw.height; ++y) rows[y] = buffer.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) throw IoError("unsupported PNG channel layout");
  raw.data.resize(static_cast<std::size_t>(raw.height) * raw.width * channels);
  const std::size_t n = raw.data.size();
  if (bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned v = (buffer[2 * i] << 8) | buffer[2 * i + 1];
      raw.data[i] = static_cast<float>(v) / 65535.f;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) raw.data[i] = static_cast<float>(buffer[i]) / 255.f;
  }
  return raw;
}

void write_png(const fs::path& path, const RawRaster& raw, int bit_depth) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng: cannot create info struct");
  }

  const int bytes = bit_depth / 8;
  const std::size_t rowbytes = static_cast<std::size_t>(raw.width) * raw.channels * bytes;
  std::vector<unsigned char> buffer(rowbytes * raw.height);
  const double scale = bit_depth == 16 ? 65535.0 : 255.0;
  for (std::size_t i = 0; i < raw.data.size(); ++i) {
    const double v = std::clamp(static_cast<double>(raw.data[i]), 0.0, 1.0);
    const auto q = static_cast<unsigned>(std::lround(v * scale));
    if (bytes == 2) {
      buffer[2 * i] = static_cast<unsigned char>(q >> 8);
      buffer[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
    } else {
      buffer[i] = static_cast<unsigned char>(q);
    }
  }
  std::vector<png_bytep> rows(raw.height);
  for (int y = 0; y < raw.height; ++y) rows[y] = buffer.data() + rowbytes * y;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, raw.width, raw.height, bit_depth,
               raw.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// --- PNM / PFM ------------------------------------------------------------

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

int parse_positive(const std::string& token, const fs::path& path) {
  try {
    const int v = std::stoi(token);
    if (v > 0) return v;
  } catch (const std::exception&) {
  }
  throw IoError("malformed header in " + path.string());
}

RawRaster read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P6" && magic != "P5") throw IoError("expected binary P5/P6 in " + path.string());
  RawRaster raw;
  raw.channels = magic == "P6" ? 3 : 1;
  raw.width = parse_positive(next_token(in), path);
  raw.height = parse_positive(next_token(in), path);
  const int maxval = parse_positive(next_token(in), path);
  if (maxval > 65535) throw IoError("PNM maxval out of range in " + path.string());
  const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height * raw.channels;
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> buffer(n * bytes);
  in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
  if (in.gcount() != static_cast<std::streamsize>(buffer.size())) {
    throw IoError("truncated PNM payload in " + path.string());
  }
  raw.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bytes == 2 ? ((buffer[2 * i] << 8) | buffer[2 * i + 1]) : buffer[i];
    raw.data[i] = static_cast<float>(v) / static_cast<float>(maxval);
  }
  return raw;
}

void write_pnm(const fs::path& path, const RawRaster& raw, int bit_depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string());
  const unsigned maxval = bit_depth == 16 ? 65535u : 255u;
  out << (raw.channels == 3 ? "P6" : "P5") << '\n'
      << raw.width << ' ' << raw.height << '\n'
      << maxval << '\n';
  std::vector<unsigned char> buffer;
  buffer.reserve(raw.data.size() * (bit_depth / 8));
  for (float f : raw.data) {
    const auto q = static_cast<unsigned>(
        std::lround(std::clamp(static_cast<double>(f), 0.0, 1.0) * maxval));
    if (bit_depth == 16) buffer.push_back(static_cast<unsigned char>(q >> 8));
    buffer.push_back(static_cast<unsigned char>(q & 0xff));
  }
  out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

float byteswap_float(float f) {
  auto bits = std::bit_cast<std::uint32_t>(f);
  bits = ((bits & 0xff) << 24) | ((bits & 0xff00) << 8) | ((bits >> 8) & 0xff00) | (bits >> 24);
  return std::bit_cast<float>(bits);
}

RawRaster read_pfm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = next_token(in);
  if (magic != "Pf" && magic != "PF") throw IoError("expected PFM header in " + path.string());
  RawRaster raw;
  raw.channels = magic == "PF" ? 3 : 1;
  raw.width = parse_positive(next_token(in), path);
  raw.height = parse_positive(next_token(in), path);
  // next_token already consumed the single whitespace byte after the scale.
  const std::string scale_token = next_token(in);
  double scale = 0.0;
  try {
    scale = std::stod(scale_token);
  } catch (const std::exception&) {
    throw IoError("malformed PFM scale in " + path.string());
  }
  if (scale == 0.0) throw IoError("PFM scale must be nonzero in " + path.string());
  const bool little = scale < 0.0;
  const std::size_t row = static_cast<std::size_t>(raw.width) * raw.channels;
  raw.data.resize(row * raw.height);
  std::vector<float> line(row);
  const bool host_little = std::endian::native == std::endian::little;
  for (int y = raw.height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(line.data()), static_cast<std::streamsize>(row * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(row * sizeof(float))) {
      throw IoError("truncated PFM payload in " + path.string());
    }
    for (std::size_t i = 0; i < row; ++i) {
      raw.data[y * row + i] = little == host_little ? line[i] : byteswap_float(line[i]);
    }
  }
  return raw;
}

void write_pfm(const fs::path& path, const RawRaster& raw) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string());
  out << (raw.channels == 3 ? "PF" : "Pf") << '\n'
      << raw.width << ' ' << raw.height << '\n'
      << "-1.0\n";
  const std::size_t row = static_cast<std::size_t>(raw.width) * raw.channels;
  std::vector<float> line(row);
  const bool host_little = std::endian::native == std::endian::little;
  for (int y = raw.height - 1; y >= 0; --y) {
    for (std::size_t i = 0; i < row; ++i) {
      const float v = raw.data[y * row + i];
      line[i] = host_little ? v : byteswap_float(v);
    }
    out.write(reinterpret_cast<const char*>(line.data()), static_cast<std::streamsize>(row * sizeof(float)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// --- dispatch -------------------------------------------------------------

RawRaster read_any(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  switch (format_for(path)) {
    case Format::kPng: return read_png(path);
    case Format::kPnm: return read_pnm(path);
    case Format::kPfm: return read_pfm(path);
  }
  throw IoError("unreachable");
}

void write_any(const fs::path& path, const RawRaster& raw, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("bit depth must be 8 or 16");
  switch (format_for(path)) {
    case Format::kPng: write_png(path, raw, bit_depth); return;
    case Format::kPnm: write_pnm(path, raw, bit_depth); return;
    case Format::kPfm: write_pfm(path, raw); return;
  }
}

template <typename R>
R to_raster(const RawRaster& raw, const fs::path& path, bool unit_range) {
  R out(raw.height, raw.width);
  auto dst = out.values();
  constexpr int C = R::kChannels;
  const std::size_t pixels = out.pixel_count();
  for (std::size_t p = 0; p < pixels; ++p) {
    if (raw.channels == C) {
      for (int c = 0; c < C; ++c) dst[p * C + c] = raw.data[p * raw.channels + c];
    } else if (raw.channels == 1) {
      for (int c = 0; c < C; ++c) dst[p * C + c] = raw.data[p];
    } else {
      double sum = 0.0;
      for (int c = 0; c < raw.channels; ++c) sum += raw.data[p * raw.channels + c];
      dst[p] = static_cast<float>(sum / raw.channels);
    }
  }
  if (unit_range && !values_within(out, 0.0, 1.0)) {
    throw IoError("values outside [0,1] in " + path.string());
  }
  return out;
}

template <typename R>
RawRaster from_raster(const R& r) {
  RawRaster raw;
  raw.height = r.height();
  raw.width = r.width();
  raw.channels = R::kChannels;
  raw.data.assign(r.values().begin(), r.values().end());
  return raw;
}

}  // namespace

Image load_image(const fs::path& path) { return to_raster<Image>(read_any(path), path, true); }

void save_image(const fs::path& path, const Image& image, int bit_depth) {
  write_any(path, from_raster(image), bit_depth);
}

ScalarMap load_scalar_map(const fs::path& path) {
  return to_raster<ScalarMap>(read_any(path), path, true);
}

void save_scalar_map(const fs::path& path, const ScalarMap& map, int bit_depth) {
  write_any(path, from_raster(map), bit_depth);
}

ColorMap load_color_map(const fs::path& path) {
  return to_raster<ColorMap>(read_any(path), path, true);
}

void save_color_map(const fs::path& path, const ColorMap& map, int bit_depth) {
  write_any(path, from_raster(map), bit_depth);
}

DepthMap load_depth(const fs::path& path) {
  if (format_for(path) != Format::kPfm) throw std::invalid_argument("depth must be stored as PFM");
  auto raw = read_any(path);
  if (raw.channels != 1) throw IoError("depth PFM must be single-channel: " + path.string());
  auto depth = to_raster<DepthMap>(raw, path, false);
  for (float d : depth.values()) {
    if (!std::isfinite(d) || d < 0.f) throw IoError("invalid depth value in " + path.string());
  }
  return depth;
}

void save_depth(const fs::path& path, const DepthMap& depth) {
  if (format_for(path) != Format::kPfm) throw std::invalid_argument("depth must be stored as PFM");
  write_pfm(path, from_raster(depth));
}

}  // namespace dhz::io
