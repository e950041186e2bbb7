#pragma once

#include <cstdint>
#include <compare>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kcmp {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  auto operator<=>(const Rgb&) const = default;
};

inline constexpr Rgb kBlack{0, 0, 0};
inline constexpr Rgb kRed{255, 0, 0};

/// Interleaved 8-bit RGB raster, row-major.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = kBlack);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }

  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);

  const std::vector<std::uint8_t>& bytes() const noexcept { return data_; }
  std::vector<std::uint8_t>& bytes() noexcept { return data_; }

  bool operator==(const RgbImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  bool operator==(const BoundingBox&) const = default;
};

/// Binary mask with the same geometry as its source image.
class Bitmap {
 public:
  Bitmap() = default;
  Bitmap(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool test(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool on = true) { bits_[index(x, y)] = on ? 1 : 0; }

  std::size_t count() const;
  /// Tight bounding box of the set pixels; {0,0,0,0} when empty.
  BoundingBox bbox() const;

  bool operator==(const Bitmap&) const = default;

 private:
  std::size_t index(int x, int y) const;
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Run lengths over the row-major pixel sequence, alternating off/on and
/// starting with an "off" run (which may be 0).
std::vector<std::uint32_t> encode_rle(const Bitmap& mask);
Bitmap decode_rle(int width, int height, const std::vector<std::uint32_t>& counts);

std::string encode_png(const RgbImage& image);
RgbImage decode_png(std::string_view bytes);
std::string encode_jpeg(const RgbImage& image, int quality);
RgbImage decode_jpeg(std::string_view bytes);

/// Decodes PNG or JPEG, chosen by magic bytes.
RgbImage decode_image(std::string_view bytes);
RgbImage load_image(const std::filesystem::path& path);

/// Copy of the rectangle `box` (must lie within the image).
RgbImage crop(const RgbImage& image, const BoundingBox& box);

}  // namespace kcmp
