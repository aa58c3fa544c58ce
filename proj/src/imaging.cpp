#include "gaze/imaging.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "gaze/error.hpp"

namespace gaze {

PixelRect intersect(const PixelRect& a, const PixelRect& b) {
  const int l = std::max(a.left, b.left);
  const int t = std::max(a.top, b.top);
  const int r = std::min(a.right(), b.right());
  const int btm = std::min(a.bottom(), b.bottom());
  if (r <= l || btm <= t) return {l, t, 0, 0};
  return {l, t, r - l, btm - t};
}

Frame::Frame(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidArgument, "frame dimensions must be positive");
  }
  pixels_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

Frame::Frame(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidArgument, "frame dimensions must be positive");
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
    throw Error(ErrorCode::InvalidArgument, "pixel buffer size does not match dimensions");
  }
}

// ---------------------------------------------------------------------------
// PPM

std::string encode_ppm(const Frame& frame) {
  std::string out = "P6\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) + "\n255\n";
  const auto px = frame.pixels();
  out.append(reinterpret_cast<const char*>(px.data()), px.size());
  return out;
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint(const char* what) {
    skip_space_and_comments();
    long v = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000'000) throw Error(ErrorCode::MalformedHeader, std::string(what) + " too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw Error(ErrorCode::MalformedHeader, std::string("missing ") + what);
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  std::size_t size() const { return bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Frame decode_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw Error(ErrorCode::MalformedHeader, "not a binary PPM (P6)");
  }
  HeaderReader reader(bytes);
  reader.advance(2);
  const long width = reader.read_uint("width");
  const long height = reader.read_uint("height");
  const long maxval = reader.read_uint("maxval");
  if (width < 1 || height < 1) throw Error(ErrorCode::MalformedHeader, "zero dimension");
  if (maxval != 255) throw Error(ErrorCode::UnsupportedMaxval, "maxval " + std::to_string(maxval));
  if (reader.pos() >= reader.size() || !std::isspace(bytes[reader.pos()])) {
    throw Error(ErrorCode::MalformedHeader, "missing whitespace after maxval");
  }
  reader.advance(1);
  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  if (bytes.size() - reader.pos() < need) {
    throw Error(ErrorCode::TruncatedPixelData, "expected " + std::to_string(need) + " pixel bytes, got " +
                                                    std::to_string(bytes.size() - reader.pos()));
  }
  const auto* begin = bytes.data() + reader.pos();
  return Frame(static_cast<int>(width), static_cast<int>(height), std::vector<std::uint8_t>(begin, begin + need));
}

Frame decode_ppm(std::string_view bytes) {
  return decode_ppm(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

Frame load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_ppm(std::span<const std::uint8_t>(bytes));
}

void save_ppm(const Frame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  const auto data = encode_ppm(frame);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// masks

std::size_t BitMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BitMask foreground_mask(const Frame& frame, Rgb background, int tolerance) {
  BitMask mask(frame.width(), frame.height());
  const auto px = frame.pixels();
  std::size_t i = 0;
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x, i += 3) {
      const bool fg = std::abs(px[i] - background.r) > tolerance || std::abs(px[i + 1] - background.g) > tolerance ||
                      std::abs(px[i + 2] - background.b) > tolerance;
      if (fg) mask.set(x, y, true);
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// two-pass union-find labeling

namespace {

struct DisjointSets {
  std::vector<int> parent;

  int make() {
    parent.push_back(static_cast<int>(parent.size()));
    return parent.back();
  }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent[b] = a;
    else parent[a] = b;
  }
};

}  // namespace

std::vector<int> label_image(const BitMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<int> provisional(static_cast<std::size_t>(w) * h, -1);
  DisjointSets sets;
  auto at = [&](int x, int y) -> int& { return provisional[static_cast<std::size_t>(y) * w + x]; };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.get(x, y)) continue;
      // Already-visited 8-neighbours: W, NW, N, NE.
      int label = -1;
      const int nbr[4][2] = {{x - 1, y}, {x - 1, y - 1}, {x, y - 1}, {x + 1, y - 1}};
      for (const auto& n : nbr) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= w) continue;
        const int l = at(n[0], n[1]);
        if (l < 0) continue;
        if (label < 0) label = l;
        else sets.unite(label, l);
      }
      at(x, y) = label < 0 ? sets.make() : label;
    }
  }

  std::vector<int> final_label(sets.parent.size(), 0);
  std::vector<int> out(provisional.size(), 0);
  int next = 1;
  for (std::size_t i = 0; i < provisional.size(); ++i) {
    if (provisional[i] < 0) continue;
    const int root = sets.find(provisional[i]);
    if (final_label[root] == 0) final_label[root] = next++;
    out[i] = final_label[root];
  }
  return out;
}

std::vector<Component> connected_components(const BitMask& mask) {
  const auto labels = label_image(mask);
  const int w = mask.width();
  struct Acc {
    std::size_t area = 0;
    int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
    double sum_x = 0.0, sum_y = 0.0;
  };
  std::vector<Acc> acc;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l == 0) continue;
    const int x = static_cast<int>(i % static_cast<std::size_t>(w));
    const int y = static_cast<int>(i / static_cast<std::size_t>(w));
    if (static_cast<std::size_t>(l) > acc.size()) {
      acc.resize(static_cast<std::size_t>(l));
      acc[l - 1] = {0, x, y, x, y, 0.0, 0.0};
    }
    auto& a = acc[l - 1];
    ++a.area;
    a.min_x = std::min(a.min_x, x);
    a.max_x = std::max(a.max_x, x);
    a.min_y = std::min(a.min_y, y);
    a.max_y = std::max(a.max_y, y);
    a.sum_x += x;
    a.sum_y += y;
  }
  std::vector<Component> out;
  out.reserve(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const auto& a = acc[i];
    const double n = static_cast<double>(a.area);
    out.push_back({static_cast<int>(i) + 1, a.area,
                   PixelRect{a.min_x, a.min_y, a.max_x - a.min_x + 1, a.max_y - a.min_y + 1}, a.sum_x / n,
                   a.sum_y / n});
  }
  return out;
}

// ---------------------------------------------------------------------------
// drawing and text

void fill_rect(Frame& frame, const PixelRect& rect, Rgb color) {
  const auto r = intersect(rect, frame.bounds());
  for (int y = r.top; y < r.bottom(); ++y)
    for (int x = r.left; x < r.right(); ++x) frame.set(x, y, color);
}

bool is_drawable(std::string_view text) {
  return std::all_of(text.begin(), text.end(), [](char c) { return glyph_bits(c).has_value(); });
}

int text_width(std::string_view text, int scale) {
  if (text.empty()) return 0;
  return static_cast<int>(text.size()) * kGlyphAdvance * scale - scale;
}

void draw_text_into(Frame& frame, std::string_view text, PixelPoint origin, int scale, Rgb color) {
  if (scale < 1) throw Error(ErrorCode::InvalidArgument, "text scale must be positive");
  std::vector<GlyphBits> glyphs;
  glyphs.reserve(text.size());
  for (char c : text) {
    const auto g = glyph_bits(c);
    if (!g) throw Error(ErrorCode::UnsupportedGlyph, std::string("no glyph for character code ") +
                                                         std::to_string(static_cast<unsigned char>(c)));
    glyphs.push_back(*g);
  }
  for (std::size_t i = 0; i < glyphs.size(); ++i) {
    const int gx = origin.x + static_cast<int>(i) * kGlyphAdvance * scale;
    for (int row = 0; row < kGlyphHeight; ++row) {
      for (int col = 0; col < kGlyphWidth; ++col) {
        if (!(glyphs[i][row] & (1u << (kGlyphWidth - 1 - col)))) continue;
        fill_rect(frame, {gx + col * scale, origin.y + row * scale, scale, scale}, color);
      }
    }
  }
}

Frame draw_text(const Frame& frame, std::string_view text, PixelPoint origin, int scale, Rgb color) {
  Frame out = frame;
  draw_text_into(out, text, origin, scale, color);
  return out;
}

std::string read_text(const Frame& frame, const PixelRect& region, int scale, Rgb text_color) {
  if (scale < 1) throw Error(ErrorCode::InvalidArgument, "text scale must be positive");
  if (region.left < 0 || region.top < 0 || region.width < 0 || region.height < 0 ||
      region.right() > frame.width() || region.bottom() > frame.height()) {
    throw Error(ErrorCode::RegionOutOfBounds, "text region exceeds frame");
  }
  std::string out;
  if (region.height < kGlyphHeight * scale) return out;
  const int half = scale / 2;
  for (int gx = region.left; gx + kGlyphWidth * scale <= region.right(); gx += kGlyphAdvance * scale) {
    GlyphBits bits{};
    for (int row = 0; row < kGlyphHeight; ++row) {
      for (int col = 0; col < kGlyphWidth; ++col) {
        if (frame.at(gx + col * scale + half, region.top + row * scale + half) == text_color) {
          bits[row] |= static_cast<std::uint8_t>(1u << (kGlyphWidth - 1 - col));
        }
      }
    }
    char decoded = 0;
    for (char c : font_charset()) {
      if (*glyph_bits(c) == bits) {
        decoded = c;
        break;
      }
    }
    if (decoded == 0) {
      throw Error(ErrorCode::UnrecognizedGlyph,
                  "glyph at x=" + std::to_string(gx) + " matches no font entry");
    }
    out.push_back(decoded);
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace gaze
