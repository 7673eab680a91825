#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace usar {

inline constexpr const char* kToyExtractorName = "toy-v1";
inline constexpr std::size_t kToyFeatureDim = 32;

/// Layout: [0,24) per-channel 8-bin color histograms (R, G, B) as fractions
/// of the pixel count; 24 mean luminance in [0,1]; 25 luminance variance;
/// [26,29) mean squared horizontal gradient over left, middle and right
/// column thirds; [29,32) mean squared vertical gradient over top, middle
/// and bottom row thirds.
std::vector<double> toy_features_from_rgb(std::size_t width, std::size_t height,
                                          std::span<const std::uint8_t> rgb);

/// Decodes a PNG or JPEG and computes toy_features_from_rgb.
std::vector<double> extract_toy_features(const std::filesystem::path& image_path);

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB
};

RgbImage decode_image(const std::filesystem::path& image_path);
void write_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace usar
