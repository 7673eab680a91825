#include "usar/toy_features.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include <jpeglib.h>
#include <png.h>

#include "usar/error.hpp"

namespace usar {

namespace {

double luminance(const std::uint8_t* px) {
  return (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) / 255.0;
}

RgbImage decode_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::data, "cannot decode PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage out;
  out.width = image.width;
  out.height = image.height;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::data, "cannot decode PNG " + path.string() + ": " + message);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

RgbImage decode_jpeg(const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw Error(ErrorCode::io, "file not found: " + path.string());

  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  RgbImage out;
  // No C++ objects with destructors are created between setjmp and longjmp.
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::data, "cannot decode JPEG " + path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.width = cinfo.output_width;
  out.height = cinfo.output_height;
  out.pixels.resize(out.width * out.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

}  // namespace

RgbImage decode_image(const std::filesystem::path& image_path) {
  std::ifstream in(image_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "file not found: " + image_path.string());
  unsigned char magic[8] = {};
  in.read(reinterpret_cast<char*>(magic), sizeof magic);
  in.close();
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (std::memcmp(magic, png_sig, 8) == 0) return decode_png(image_path);
  if (magic[0] == 0xFF && magic[1] == 0xD8) return decode_jpeg(image_path);
  throw Error(ErrorCode::data, "not a PNG or JPEG file: " + image_path.string());
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::io, "cannot write PNG " + path.string() + ": " + png.message);
  }
}

std::vector<double> toy_features_from_rgb(std::size_t width, std::size_t height,
                                          std::span<const std::uint8_t> rgb) {
  if (width == 0 || height == 0) throw Error(ErrorCode::data, "image has no pixels");
  if (rgb.size() != width * height * 3) {
    throw Error(ErrorCode::invalid_argument, "pixel buffer does not match image size");
  }
  std::vector<double> f(kToyFeatureDim, 0.0);
  const double n = static_cast<double>(width * height);

  std::vector<double> lum(width * height);
  for (std::size_t p = 0; p < width * height; ++p) {
    const auto* px = rgb.data() + 3 * p;
    for (std::size_t c = 0; c < 3; ++c) f[8 * c + (px[c] >> 5)] += 1.0;
    lum[p] = luminance(px);
  }
  for (std::size_t b = 0; b < 24; ++b) f[b] /= n;

  double mean = 0.0;
  for (const double y : lum) mean += y;
  mean /= n;
  double var = 0.0;
  for (const double y : lum) var += (y - mean) * (y - mean);
  f[24] = mean;
  f[25] = var / n;

  // Gradients are forward differences; thirds split the pixel grid by the
  // position of the gradient's left (or upper) sample.
  auto third = [](std::size_t pos, std::size_t extent) { return std::min<std::size_t>(2, 3 * pos / extent); };
  double gx[3] = {}, gy[3] = {};
  double nx[3] = {}, ny[3] = {};
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c + 1 < width; ++c) {
      const double d = lum[r * width + c + 1] - lum[r * width + c];
      const auto t = third(c, width - 1);
      gx[t] += d * d;
      nx[t] += 1.0;
    }
  }
  for (std::size_t r = 0; r + 1 < height; ++r) {
    const auto t = third(r, height - 1);
    for (std::size_t c = 0; c < width; ++c) {
      const double d = lum[(r + 1) * width + c] - lum[r * width + c];
      gy[t] += d * d;
      ny[t] += 1.0;
    }
  }
  for (std::size_t t = 0; t < 3; ++t) {
    f[26 + t] = nx[t] > 0 ? gx[t] / nx[t] : 0.0;
    f[29 + t] = ny[t] > 0 ? gy[t] / ny[t] : 0.0;
  }
  return f;
}

std::vector<double> extract_toy_features(const std::filesystem::path& image_path) {
  const auto image = decode_image(image_path);
  return toy_features_from_rgb(image.width, image.height, image.pixels);
}

}  // namespace usar
