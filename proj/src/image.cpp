#include "sscalib/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "sscalib/error.hpp"

namespace sscalib {

double Image::sample(double x, double y, int c, double outside) const {
  if (!(x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1)) return outside;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = (1.0 - fx) * at(x0, y0, c) + fx * at(x1, y0, c);
  const double bottom = (1.0 - fx) * at(x0, y1, c) + fx * at(x1, y1, c);
  return (1.0 - fy) * top + fy * bottom;
}

Image Image::to_gray() const {
  if (channels == 1) return *this;
  Image out(width, height, 1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double g = 0.299 * at(x, y, 0) + 0.587 * at(x, y, 1) + 0.114 * at(x, y, 2);
      out.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(g, 0.0, 255.0)));
    }
  }
  return out;
}

Image Image::to_rgb() const {
  if (channels == 3) return *this;
  Image out(width, height, 3);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = data[i];
  }
  return out;
}

namespace {

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Image read_pnm(const std::string& bytes, const std::filesystem::path& path) {
  std::size_t pos = 0;
  auto fail = [&](const std::string& what) -> Error {
    return Error(ErrorCode::kParseError, path.string() + ": " + what + " at byte " + std::to_string(pos));
  };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) throw fail("expected integer");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1 << 20) throw fail("header value too large");
    }
    return static_cast<int>(v);
  };

  if (bytes.size() < 2 || bytes[0] != 'P') throw fail("missing PNM magic");
  const char kind = bytes[1];
  pos = 2;
  const int channels = (kind == '2' || kind == '5') ? 1 : (kind == '3' || kind == '6') ? 3 : 0;
  if (channels == 0) throw fail(std::string("unsupported PNM type P") + kind);
  const int w = read_int();
  const int h = read_int();
  const int maxval = read_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw fail("unsupported PNM dimensions or depth");
  Image img(w, h, channels);
  if (kind == '5' || kind == '6') {
    ++pos;  // single whitespace after maxval
    if (bytes.size() - std::min(pos, bytes.size()) < img.data.size()) {
      pos = bytes.size();
      throw fail("truncated pixel data");
    }
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), img.data.size(), img.data.begin());
  } else {
    for (auto& v : img.data) v = static_cast<std::uint8_t>(read_int());
  }
  return img;
}

struct PngReadDeleter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadDeleter() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct MemoryReader {
  const std::string* bytes;
  std::size_t pos;
};

Image read_png(const std::string& bytes, const std::filesystem::path& path) {
  PngReadDeleter guard;
  guard.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!guard.png) throw Error(ErrorCode::kIoError, "libpng init failed");
  guard.info = png_create_info_struct(guard.png);
  if (!guard.info) throw Error(ErrorCode::kIoError, "libpng init failed");
  MemoryReader reader{&bytes, 0};
  Image img;
  if (setjmp(png_jmpbuf(guard.png))) {
    throw Error(ErrorCode::kParseError, path.string() + ": malformed PNG near byte " + std::to_string(reader.pos));
  }
  png_set_read_fn(guard.png, &reader, [](png_structp png, png_bytep out, png_size_t n) {
    auto* r = static_cast<MemoryReader*>(png_get_io_ptr(png));
    if (r->pos + n > r->bytes->size()) png_error(png, "truncated");
    std::copy_n(r->bytes->data() + r->pos, n, out);
    r->pos += n;
  });
  png_read_info(guard.png, guard.info);
  const png_byte color = png_get_color_type(guard.png, guard.info);
  const png_byte depth = png_get_bit_depth(guard.png, guard.info);
  if (depth == 16) png_set_strip_16(guard.png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(guard.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(guard.png);
  if (png_get_valid(guard.png, guard.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(guard.png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(guard.png, guard.info, PNG_INFO_tRNS)) {
    png_set_strip_alpha(guard.png);
  }
  png_read_update_info(guard.png, guard.info);
  const int channels = png_get_channels(guard.png, guard.info);
  img = Image(static_cast<int>(png_get_image_width(guard.png, guard.info)),
              static_cast<int>(png_get_image_height(guard.png, guard.info)), channels);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = &img.data[static_cast<std::size_t>(y) * img.width * channels];
  png_read_image(guard.png, rows.data());
  png_read_end(guard.png, nullptr);
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::kParseError, path.string() + ": unsupported PNG channel count");
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::kIoError, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIoError, "PNG encoding failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(&image.data[static_cast<std::size_t>(y) * image.width * image.channels]));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  if (bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0) {
    return read_png(bytes, path);
  }
  return read_pnm(bytes, path);
}

void write_image(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw Error(ErrorCode::kInvalidArgument, "only 1- or 3-channel images can be written");
  }
  if (path.extension() == ".png") {
    write_png(path, image);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << (image.channels == 3 ? "P6\n" : "P5\n") << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()), static_cast<std::streamsize>(image.data.size()));
}

}  // namespace sscalib
