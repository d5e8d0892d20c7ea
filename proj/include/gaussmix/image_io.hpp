#pragma once

// PGM (P2/P5) and PNG reading and writing. PNG goes through libpng's
// simplified API and is always read and written at 8 bits per sample.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "gaussmix/errors.hpp"
#include "gaussmix/mask.hpp"
#include "gaussmix/raster.hpp"

namespace gaussmix {

namespace detail {

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading " + path.string());
  return bytes;
}

class PnmTokenizer {
 public:
  explicit PnmTokenizer(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  std::uint32_t next_uint() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw FormatError("PGM: expected an unsigned integer");
    }
    std::uint64_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > 0xffffffffULL) throw FormatError("PGM: integer overflow");
    }
    return static_cast<std::uint32_t>(value);
  }

  std::size_t position() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 2;
};

inline int bit_depth_for_maxval(std::uint32_t maxval) {
  for (int b = 1; b <= 16; ++b) {
    if (maxval == (1u << b) - 1u) return b;
  }
  throw FormatError("PGM: maxval " + std::to_string(maxval) + " is not 2^b - 1 for b in [1, 16]");
}

inline PixelImage decode_pgm(const std::vector<unsigned char>& bytes) {
  const bool binary = bytes[1] == '5';
  PnmTokenizer tok(bytes);
  PixelImage image;
  image.width = tok.next_uint();
  image.height = tok.next_uint();
  const std::uint32_t maxval = tok.next_uint();
  if (image.width == 0 || image.height == 0) throw FormatError("PGM: zero dimension");
  image.bit_depth = bit_depth_for_maxval(maxval);
  image.channels = 1;
  const std::size_t count = image.width * image.height;
  image.samples.resize(count);

  if (binary) {
    tok.advance(1);  // single whitespace byte after maxval
    const std::size_t bytes_per = maxval > 255 ? 2 : 1;
    const std::size_t start = tok.position();
    if (start > bytes.size() || bytes.size() - start < count * bytes_per) {
      throw FormatError("PGM: truncated pixel data");
    }
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t at = start + i * bytes_per;
      image.samples[i] = bytes_per == 2
                             ? static_cast<std::uint16_t>((bytes[at] << 8) | bytes[at + 1])
                             : bytes[at];
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      image.samples[i] = static_cast<std::uint16_t>(tok.next_uint());
    }
  }
  for (auto s : image.samples) {
    if (s > maxval) throw FormatError("PGM: sample exceeds maxval");
  }
  return image;
}

inline PixelImage read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    throw FormatError("PNG: " + std::string(png.message));
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const bool alpha = (png.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  png.format = color ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB)
                     : (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY);
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    throw FormatError("PNG: " + std::string(png.message));
  }
  const std::size_t stored = PNG_IMAGE_PIXEL_CHANNELS(png.format);
  PixelImage image;
  image.width = png.width;
  image.height = png.height;
  image.bit_depth = 8;
  image.channels = color ? 3 : 1;
  image.samples.reserve(image.width * image.height * image.channels);
  for (std::size_t i = 0; i < static_cast<std::size_t>(png.width) * png.height; ++i) {
    for (int ch = 0; ch < image.channels; ++ch) image.samples.push_back(buffer[i * stored + ch]);
  }
  return image;
}

inline void write_pgm(const std::filesystem::path& path, const PixelImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << '\n' << image.max_value() << '\n';
  for (std::uint16_t s : image.samples) {
    if (image.bit_depth > 8) out.put(static_cast<char>(s >> 8));
    out.put(static_cast<char>(s & 0xff));
  }
  if (!out) throw IoError("error writing " + path.string());
}

inline void write_png(const std::filesystem::path& path, const PixelImage& image) {
  if (image.bit_depth != 8) throw FormatError("PNG output supports 8-bit samples only; use .pgm");
  std::vector<png_byte> buffer(image.samples.begin(), image.samples.end());
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("PNG: " + std::string(png.message));
  }
}

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext;
}

}  // namespace detail

/// Reads a PGM (P2/P5) or PNG file; the format is detected from the file contents.
inline PixelImage read_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_bytes(path);
  static constexpr unsigned char kPngMagic[] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin())) {
    return detail::read_png(path);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '5')) {
    return detail::decode_pgm(bytes);
  }
  throw FormatError(path.string() + ": not a PGM (P2/P5) or PNG file");
}

/// Writes by extension: .png or .pgm.
inline void write_image(const std::filesystem::path& path, const PixelImage& image) {
  if (image.samples.size() != image.width * image.height * image.channels) {
    throw ShapeError("write_image: pixel buffer does not match dimensions");
  }
  const std::string ext = detail::lower_extension(path);
  if (ext == ".png") return detail::write_png(path, image);
  if (ext == ".pgm") {
    if (image.channels != 1) throw FormatError("PGM output must be single channel");
    return detail::write_pgm(path, image);
  }
  throw FormatError(path.string() + ": unsupported output extension (use .png or .pgm)");
}

inline Surface load_surface(const std::filesystem::path& path) { return image_to_surface(read_image(path)); }

inline void save_surface(const std::filesystem::path& path, const Grid<double>& values, int bit_depth = 8) {
  write_image(path, surface_to_image(values, bit_depth));
}

/// Mask images: any non-zero sample marks an observed pixel.
inline Mask load_mask(const std::filesystem::path& path) {
  const PixelImage image = read_image(path);
  Mask mask(image.height, image.width, false);
  for (std::size_t i = 0; i < image.height * image.width; ++i) {
    bool on = false;
    for (int ch = 0; ch < image.channels; ++ch) on = on || image.samples[i * image.channels + ch] != 0;
    mask.set(i, on);
  }
  return mask;
}

inline void save_mask(const std::filesystem::path& path, const Mask& mask) {
  Grid<double> values(mask.height(), mask.width());
  for (std::size_t i = 0; i < mask.size(); ++i) values[i] = mask[i] ? 1.0 : 0.0;
  save_surface(path, values);
}

}  // namespace gaussmix
