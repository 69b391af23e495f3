#include "chart_refinery/session/image.hpp"

#include <array>
#include <algorithm>

#include "chart_refinery/error.hpp"
#include "chart_refinery/session/hashing.hpp"

namespace chart_refinery {
namespace {

constexpr std::array<std::uint8_t, 8> kPngMagic = {0x89, 'P', 'N', 'G',
                                                   '\r', '\n', 0x1a, '\n'};

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

std::uint16_t read_be16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

bool is_sof_marker(std::uint8_t m) {
  // SOF0..SOF15 minus DHT (C4), JPG (C8) and DAC (CC).
  return m >= 0xc0 && m <= 0xcf && m != 0xc4 && m != 0xc8 && m != 0xcc;
}

}  // namespace

std::string_view to_string(ImageFormat format) {
  return format == ImageFormat::kPng ? "PNG" : "JPEG";
}

ImageFormat image_format_from_string(std::string_view text) {
  if (text == "PNG") return ImageFormat::kPng;
  if (text == "JPEG") return ImageFormat::kJpeg;
  throw Error(ErrorCode::kInvalidInput,
              "unknown image format: " + std::string(text));
}

std::string_view mime_type(ImageFormat format) {
  return format == ImageFormat::kPng ? "image/png" : "image/jpeg";
}

std::optional<ImageFormat> sniff_format(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= kPngMagic.size() &&
      std::equal(kPngMagic.begin(), kPngMagic.end(), bytes.begin())) {
    return ImageFormat::kPng;
  }
  if (bytes.size() >= 3 && bytes[0] == 0xff && bytes[1] == 0xd8 &&
      bytes[2] == 0xff) {
    return ImageFormat::kJpeg;
  }
  return std::nullopt;
}

std::optional<PixelSize> probe_dimensions(std::span<const std::uint8_t> bytes,
                                          ImageFormat format) {
  if (format == ImageFormat::kPng) {
    // magic(8) + length(4) + "IHDR"(4) + width(4) + height(4)
    if (bytes.size() < 24) return std::nullopt;
    if (bytes[12] != 'I' || bytes[13] != 'H' || bytes[14] != 'D' ||
        bytes[15] != 'R') {
      return std::nullopt;
    }
    return PixelSize{static_cast<int>(read_be32(bytes, 16)),
                     static_cast<int>(read_be32(bytes, 20))};
  }
  std::size_t pos = 2;
  while (pos + 4 <= bytes.size()) {
    if (bytes[pos] != 0xff) return std::nullopt;
    std::uint8_t marker = bytes[pos + 1];
    if (marker == 0xff) {
      ++pos;
      continue;
    }
    if (marker == 0xd8 || marker == 0x01 || (marker >= 0xd0 && marker <= 0xd7)) {
      pos += 2;
      continue;
    }
    std::uint16_t len = read_be16(bytes, pos + 2);
    if (is_sof_marker(marker)) {
      if (pos + 9 > bytes.size()) return std::nullopt;
      return PixelSize{read_be16(bytes, pos + 7), read_be16(bytes, pos + 5)};
    }
    if (marker == 0xd9 || marker == 0xda || len < 2) return std::nullopt;
    pos += 2 + len;
  }
  return std::nullopt;
}

ChartImage make_chart_image(std::string id, std::vector<std::uint8_t> bytes,
                            std::optional<ImageFormat> declared,
                            std::size_t size_cap) {
  if (bytes.empty()) {
    throw Error(ErrorCode::kInvalidImage, "image payload is empty");
  }
  if (bytes.size() > size_cap) {
    throw Error(ErrorCode::kInvalidImage,
                "image payload exceeds size cap of " +
                    std::to_string(size_cap) + " bytes",
                {{"size_cap", size_cap}, {"size", bytes.size()}});
  }
  auto sniffed = sniff_format(bytes);
  if (!sniffed) {
    throw Error(ErrorCode::kInvalidImage,
                "payload is neither PNG nor JPEG (bad magic bytes)");
  }
  if (declared && *declared != *sniffed) {
    throw Error(ErrorCode::kInvalidImage,
                "declared format " + std::string(to_string(*declared)) +
                    " does not match payload magic " +
                    std::string(to_string(*sniffed)));
  }
  auto size = probe_dimensions(bytes, *sniffed);
  if (!size || size->width <= 0 || size->height <= 0) {
    throw Error(ErrorCode::kInvalidImage, "image has zero or unreadable dimensions");
  }
  ChartImage image;
  image.id = std::move(id);
  image.sha256 = sha256_hex(bytes);
  image.bytes = std::move(bytes);
  image.format = *sniffed;
  image.width_px = size->width;
  image.height_px = size->height;
  return image;
}

std::string check_image(const ChartImage& image) {
  if (image.bytes.empty()) return "image bytes empty";
  auto sniffed = sniff_format(image.bytes);
  if (!sniffed || *sniffed != image.format) return "format does not match magic bytes";
  if (image.width_px <= 0 || image.height_px <= 0) return "non-positive dimensions";
  if (sha256_hex(image.bytes) != image.sha256) return "sha256 mismatch";
  return {};
}

}  // namespace chart_refinery
