#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gaze {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend constexpr bool operator==(Rgb, Rgb) = default;
};

struct PixelPoint {
  int x = 0;
  int y = 0;
};

/// Axis-aligned pixel rectangle, half-open: [left, left + width) x [top, top + height).
struct PixelRect {
  int left = 0;
  int top = 0;
  int width = 0;
  int height = 0;

  int right() const { return left + width; }
  int bottom() const { return top + height; }
  bool empty() const { return width <= 0 || height <= 0; }
  /// Center in pixel-center coordinates (a 1x1 rect at (5,7) has center (5,7)).
  double center_x() const { return left + (width - 1) / 2.0; }
  double center_y() const { return top + (height - 1) / 2.0; }

  friend constexpr bool operator==(const PixelRect&, const PixelRect&) = default;
};

PixelRect intersect(const PixelRect& a, const PixelRect& b);

/// Owned 8-bit RGB raster, row-major, interleaved.
class Frame {
 public:
  Frame(int width, int height, Rgb fill = {});
  Frame(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  PixelRect bounds() const { return {0, 0, width_, height_}; }

  Rgb at(int x, int y) const {
    const auto i = index(x, y);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const auto i = index(x, y);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

// ---- PPM (binary P6, maxval 255) ----

std::string encode_ppm(const Frame& frame);
Frame decode_ppm(std::span<const std::uint8_t> bytes);
Frame decode_ppm(std::string_view bytes);
Frame load_ppm(const std::filesystem::path& path);
void save_ppm(const Frame& frame, const std::filesystem::path& path);

// ---- masks and components ----

class BitMask {
 public:
  BitMask(int width, int height) : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool get(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  std::size_t popcount() const;

  friend bool operator==(const BitMask&, const BitMask&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

/// True where any channel differs from `background` by more than `tolerance`.
BitMask foreground_mask(const Frame& frame, Rgb background, int tolerance);

struct Component {
  int label = 0;
  std::size_t area = 0;
  PixelRect bbox;
  double centroid_x = 0.0;
  double centroid_y = 0.0;
};

/// 8-connected labeling. Labels start at 1 and follow raster order of each
/// component's first pixel; the result is sorted by label.
std::vector<Component> connected_components(const BitMask& mask);

/// Per-pixel label image from the same pass (0 = background).
std::vector<int> label_image(const BitMask& mask);

// ---- drawing ----

void fill_rect(Frame& frame, const PixelRect& rect, Rgb color);

// ---- embedded 5x7 bitmap font ----

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;
inline constexpr int kGlyphAdvance = kGlyphWidth + 1;

/// Row bitmaps, bit 4 = leftmost column.
using GlyphBits = std::array<std::uint8_t, kGlyphHeight>;

std::optional<GlyphBits> glyph_bits(char c);
/// Every drawable character, in table order.
std::string_view font_charset();
bool is_drawable(std::string_view text);

/// Width in pixels of `text` rendered at `scale` (no trailing spacing column).
int text_width(std::string_view text, int scale);
inline int text_height(int scale) { return kGlyphHeight * scale; }

/// Renders glyph pixels only; everything else is left untouched. Glyph
/// pixels outside the frame are clipped.
void draw_text_into(Frame& frame, std::string_view text, PixelPoint origin, int scale, Rgb color);
Frame draw_text(const Frame& frame, std::string_view text, PixelPoint origin, int scale, Rgb color);

/// Decodes text drawn by draw_text with its origin at the region's top-left
/// corner. Trailing spaces are dropped.
std::string read_text(const Frame& frame, const PixelRect& region, int scale, Rgb text_color);

}  // namespace gaze
