#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace chart_refinery {

enum class ImageFormat { kPng, kJpeg };

std::string_view to_string(ImageFormat format);
ImageFormat image_format_from_string(std::string_view text);
std::string_view mime_type(ImageFormat format);

inline constexpr std::size_t kDefaultImageSizeCap = 10u * 1024u * 1024u;

struct ChartImage {
  std::string id;
  std::vector<std::uint8_t> bytes;
  ImageFormat format = ImageFormat::kPng;
  int width_px = 0;
  int height_px = 0;
  std::string sha256;

  friend bool operator==(const ChartImage&, const ChartImage&) = default;
};

// Format from magic bytes, or nullopt when neither PNG nor JPEG.
std::optional<ImageFormat> sniff_format(std::span<const std::uint8_t> bytes);

struct PixelSize {
  int width = 0;
  int height = 0;
};

// Reads dimensions from the PNG IHDR chunk or the first JPEG SOFn marker.
std::optional<PixelSize> probe_dimensions(std::span<const std::uint8_t> bytes,
                                          ImageFormat format);

// Validates and wraps an uploaded payload. When `declared` is set it must
// agree with the magic bytes. Throws Error{kInvalidImage}.
ChartImage make_chart_image(std::string id, std::vector<std::uint8_t> bytes,
                            std::optional<ImageFormat> declared = std::nullopt,
                            std::size_t size_cap = kDefaultImageSizeCap);

// Re-checks every ChartImage invariant; returns a violation message or empty.
std::string check_image(const ChartImage& image);

}  // namespace chart_refinery
