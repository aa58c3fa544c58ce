#include "gaze/layout.hpp"

#include <algorithm>
#include <cmath>

#include "gaze/error.hpp"
#include "gaze/kvfile.hpp"
#include "gaze/rng.hpp"

namespace gaze {

std::vector<GazePointCm> LayoutMap::centroids() const {
  std::vector<GazePointCm> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(c.centroid_cm);
  return out;
}

std::vector<PixelRect> LayoutMap::bboxes() const {
  std::vector<PixelRect> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(c.bbox_px);
  return out;
}

void LayoutMap::validate() const {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].index != static_cast<int>(i) + 1) {
      throw Error(ErrorCode::InvalidArgument, "cell indices must run 1..N in order");
    }
  }
  if (!(tau_cm >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be >= 0");
}

std::string_view to_string(LayoutStyle style) {
  return style == LayoutStyle::FullscreenGrid ? "FullscreenGrid" : "HorizontalStrip";
}

LayoutStyle parse_layout_style(std::string_view text) {
  if (text == "grid" || text == "FullscreenGrid") return LayoutStyle::FullscreenGrid;
  if (text == "strip" || text == "HorizontalStrip") return LayoutStyle::HorizontalStrip;
  throw Error(ErrorCode::InvalidArgument, "unknown layout style: " + std::string(text));
}

// ---------------------------------------------------------------------------
// name region

PixelRect name_region(const PixelRect& cell, const NameRegionSpec& spec) {
  const int h = std::max(1, static_cast<int>(std::lround(spec.height_frac * cell.height)));
  const int w = std::max(1, static_cast<int>(std::lround(spec.width_frac * cell.width)));
  const int left = cell.left + static_cast<int>(std::lround(spec.left_frac * cell.width));
  int top = cell.top + static_cast<int>(std::lround(spec.top_frac * cell.height));
  top = std::min(top, cell.bottom() - h);
  return {left, top, std::min(w, cell.right() - left), h};
}

int name_text_scale(const PixelRect& region) { return std::max(1, (region.height - 2) / kGlyphHeight); }

PixelPoint name_text_origin(const PixelRect& region, int scale) {
  const int pad_x = std::max(2, scale);
  return {region.left + pad_x, region.top + std::max(0, (region.height - text_height(scale)) / 2)};
}

// ---------------------------------------------------------------------------
// planning

std::vector<PixelRect> plan_cells(LayoutStyle style, int n, int screen_w, int screen_h) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "need at least one participant");
  std::vector<PixelRect> cells;
  cells.reserve(static_cast<std::size_t>(n));
  if (style == LayoutStyle::HorizontalStrip) {
    const int slot_w = screen_w / n;
    const int cw = slot_w - kCellGutterPx;
    const int ch = cw * 9 / 16;
    if (cw < kMinCellWidthPx) throw Error(ErrorCode::TooManyParticipants, "strip cells narrower than 32 px");
    if (ch + kCellGutterPx > screen_h) throw Error(ErrorCode::InvalidArgument, "screen too short for strip");
    for (int c = 0; c < n; ++c) cells.push_back({c * slot_w + kCellGutterPx / 2, kCellGutterPx / 2, cw, ch});
    return cells;
  }
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)) - 1e-12));
  const int rows = (n + cols - 1) / cols;
  const int slot_w = screen_w / cols;
  const int slot_h = screen_h / rows;
  const int cw = std::min(slot_w - kCellGutterPx, (slot_h - kCellGutterPx) * 16 / 9);
  const int ch = cw * 9 / 16;
  if (cw < kMinCellWidthPx) throw Error(ErrorCode::TooManyParticipants, "grid cells narrower than 32 px");
  for (int r = 0; r < rows; ++r) {
    const int in_row = std::min(cols, n - r * cols);
    const int offset = (cols - in_row) * slot_w / 2;
    for (int c = 0; c < in_row; ++c) {
      cells.push_back({offset + c * slot_w + (slot_w - cw) / 2, r * slot_h + (slot_h - ch) / 2, cw, ch});
    }
  }
  return cells;
}

namespace {

int usable_height(const LayoutSpec& spec) {
  return spec.calibration.screen_h_px - (spec.decorations ? kDecorationBandPx : 0);
}

void check_spec(const LayoutSpec& spec) {
  spec.calibration.validate();
  const int min_n = spec.style == LayoutStyle::HorizontalStrip ? 3 : 2;
  if (spec.n_participants < min_n) {
    throw Error(ErrorCode::InvalidArgument, std::string(to_string(spec.style)) + " needs at least " +
                                                std::to_string(min_n) + " participants");
  }
  if (!spec.names.empty() && spec.names.size() != static_cast<std::size_t>(spec.n_participants)) {
    throw Error(ErrorCode::LengthMismatch, "names length must equal n_participants");
  }
}

Rgb cell_color(std::uint64_t seed, int index) {
  // Mid-tone palette, kept well away from the dark background and white text.
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  return {static_cast<std::uint8_t>(70 + rng.index(120)), static_cast<std::uint8_t>(70 + rng.index(120)),
          static_cast<std::uint8_t>(70 + rng.index(120))};
}

void fill_ellipse(Frame& frame, double cx, double cy, double rx, double ry, Rgb color) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - rx)));
  const int x1 = std::min(frame.width() - 1, static_cast<int>(std::ceil(cx + rx)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
  const int y1 = std::min(frame.height() - 1, static_cast<int>(std::ceil(cy + ry)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double u = (x - cx) / rx;
      const double v = (y - cy) / ry;
      if (u * u + v * v <= 1.0) frame.set(x, y, color);
    }
  }
}

}  // namespace

std::vector<std::string> default_names(int n) {
  std::vector<std::string> names;
  for (int i = 1; i <= n; ++i) names.push_back("User" + std::to_string(i));
  return names;
}

LayoutMap plan_layout(const LayoutSpec& spec) {
  check_spec(spec);
  const auto rects =
      plan_cells(spec.style, spec.n_participants, spec.calibration.screen_w_px, usable_height(spec));
  const auto names = spec.names.empty() ? default_names(spec.n_participants) : spec.names;
  LayoutMap map;
  map.calibration = spec.calibration;
  for (std::size_t i = 0; i < rects.size(); ++i) {
    const auto& r = rects[i];
    map.cells.push_back({static_cast<int>(i) + 1, px_to_cm({r.center_x(), r.center_y()}, spec.calibration), r,
                         names[i]});
  }
  map.tau_cm = auto_tau(rects, spec.calibration);
  return map;
}

std::pair<Frame, LayoutMap> generate_screenshot(const LayoutSpec& spec) {
  auto map = plan_layout(spec);
  Frame frame(spec.calibration.screen_w_px, spec.calibration.screen_h_px, spec.background);
  for (const auto& cell : map.cells) {
    const auto& r = cell.bbox_px;
    fill_rect(frame, r, cell_color(spec.seed, cell.index));
    fill_ellipse(frame, r.left + r.width * 0.5, r.top + r.height * 0.42, r.width * 0.12, r.height * 0.26,
                 Rgb{196, 150, 120});
    const auto region = name_region(r, spec.name_region);
    fill_rect(frame, region, kNameStripColor);
    if (!is_drawable(cell.name)) {
      throw Error(ErrorCode::UnsupportedGlyph, "name not drawable with the embedded font: " + cell.name);
    }
    const int scale = name_text_scale(region);
    const auto origin = name_text_origin(region, scale);
    if (origin.x + text_width(cell.name, scale) > region.right() || origin.y + text_height(scale) > r.bottom() - 1) {
      throw Error(ErrorCode::InvalidArgument, "name does not fit its cell: " + cell.name);
    }
    draw_text_into(frame, cell.name, origin, scale, kNameTextColor);
  }
  if (spec.decorations) {
    const int band_top = spec.calibration.screen_h_px - kDecorationBandPx;
    const int w = spec.calibration.screen_w_px;
    fill_rect(frame, {w / 2 - 150, band_top + 7, 300, 50}, Rgb{90, 90, 96});
    fill_rect(frame, {16, band_top + 12, 40, 40}, Rgb{200, 60, 60});
  }
  return {std::move(frame), std::move(map)};
}

// ---------------------------------------------------------------------------
// parsing

bool is_video_cell_aspect(const PixelRect& bbox, double ar_tolerance) {
  if (bbox.height <= 0) return false;
  const double ratio = static_cast<double>(bbox.width) / bbox.height;
  return std::abs(ratio / (16.0 / 9.0) - 1.0) <= ar_tolerance;
}

namespace {

struct Candidate {
  PixelRect bbox;
  double cx;
  double cy;
};

// Row-major order: sweep by centroid y, start a new row when a cell's
// centroid sits more than half its height below the row's first cell.
void order_row_major(std::vector<Candidate>& cells) {
  std::sort(cells.begin(), cells.end(), [](const Candidate& a, const Candidate& b) {
    return a.cy != b.cy ? a.cy < b.cy : a.cx < b.cx;
  });
  std::vector<Candidate> ordered;
  std::size_t row_start = 0;
  while (row_start < cells.size()) {
    std::size_t row_end = row_start + 1;
    while (row_end < cells.size() && cells[row_end].cy - cells[row_start].cy <= 0.5 * cells[row_end].bbox.height) {
      ++row_end;
    }
    std::vector<Candidate> row(cells.begin() + static_cast<long>(row_start), cells.begin() + static_cast<long>(row_end));
    std::sort(row.begin(), row.end(), [](const Candidate& a, const Candidate& b) { return a.cx < b.cx; });
    ordered.insert(ordered.end(), row.begin(), row.end());
    row_start = row_end;
  }
  cells = std::move(ordered);
}

}  // namespace

LayoutMap parse_screenshot(const Frame& frame, const CalibrationProfile& cal, const ParseOptions& options) {
  cal.validate();
  if (frame.width() != cal.screen_w_px || frame.height() != cal.screen_h_px) {
    throw Error(ErrorCode::CalibrationMismatch,
                "screenshot is " + std::to_string(frame.width()) + "x" + std::to_string(frame.height()) +
                    ", calibration expects " + std::to_string(cal.screen_w_px) + "x" +
                    std::to_string(cal.screen_h_px));
  }
  const auto mask = foreground_mask(frame, options.background, options.tolerance);
  std::vector<Candidate> cells;
  for (const auto& comp : connected_components(mask)) {
    if (is_video_cell_aspect(comp.bbox, options.ar_tolerance)) cells.push_back({comp.bbox, comp.centroid_x, comp.centroid_y});
  }
  if (cells.empty()) throw Error(ErrorCode::NoCellsFound, "no 16:9 components in screenshot");
  order_row_major(cells);

  LayoutMap map;
  map.calibration = cal;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const int index = static_cast<int>(i) + 1;
    const auto region = name_region(cells[i].bbox, options.name_region);
    const int scale = name_text_scale(region);
    const auto origin = name_text_origin(region, scale);
    const PixelRect text_region{origin.x, origin.y, region.right() - origin.x, region.bottom() - origin.y};
    std::string name;
    try {
      name = read_text(frame, text_region, scale, options.text_color);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnrecognizedGlyph && e.code() != ErrorCode::RegionOutOfBounds) throw;
    }
    if (name.empty()) name = "cell-" + std::to_string(index);
    map.cells.push_back({index, px_to_cm({cells[i].cx, cells[i].cy}, cal), cells[i].bbox, std::move(name)});
  }
  map.tau_cm = auto_tau(map.bboxes(), cal);
  if (options.labels) map = attach_labels(std::move(map), *options.labels);
  return map;
}

LayoutMap attach_labels(LayoutMap map, const std::vector<std::string>& labels) {
  if (labels.size() != map.cells.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(labels.size()) + " labels for " +
                                               std::to_string(map.cells.size()) + " cells");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) map.cells[i].name = labels[i];
  return map;
}

// ---------------------------------------------------------------------------
// files

std::vector<std::string> parse_labels(std::string_view text) {
  std::vector<std::string> labels;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    labels.emplace_back(line);
    if (nl == std::string_view::npos) break;
    text = text.substr(nl + 1);
  }
  return labels;
}

std::vector<std::string> read_labels(const std::filesystem::path& path) {
  return parse_labels(read_text_file(path));
}

void write_labels(const std::filesystem::path& path, const std::vector<std::string>& labels) {
  std::string text;
  for (const auto& l : labels) text += l + "\n";
  write_text_file(path, text);
}

std::string format_layout_records(const LayoutMap& map) {
  std::string out = "# tau_cm = " + format_fixed(map.tau_cm) + "\n";
  for (const auto& c : map.cells) {
    out += std::to_string(c.index) + ", " + format_fixed(c.centroid_cm.x) + ", " + format_fixed(c.centroid_cm.y) +
           ", " + std::to_string(c.bbox_px.left) + ", " + std::to_string(c.bbox_px.top) + ", " +
           std::to_string(c.bbox_px.width) + ", " + std::to_string(c.bbox_px.height) + ", " + c.name + "\n";
  }
  return out;
}

LayoutMap parse_layout_records(std::string_view text, const CalibrationProfile& cal) {
  LayoutMap map;
  map.calibration = cal;
  std::optional<double> tau;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const auto raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = trim(line.substr(1));
      if (body.starts_with("tau_cm")) {
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw Error(ErrorCode::MalformedRow, "bad tau comment");
        tau = parse_double(body.substr(eq + 1));
      }
      continue;
    }
    // The name is everything after the seventh comma.
    std::vector<std::string> fields;
    std::string_view rest = line;
    for (int i = 0; i < 7; ++i) {
      const auto comma = rest.find(',');
      if (comma == std::string_view::npos) {
        throw Error(ErrorCode::MalformedRow, "layout record line " + std::to_string(line_no) + " has too few fields");
      }
      fields.emplace_back(trim(rest.substr(0, comma)));
      rest = rest.substr(comma + 1);
    }
    TargetCell cell;
    try {
      cell.index = static_cast<int>(parse_integer(fields[0]));
      cell.centroid_cm = {parse_double(fields[1]), parse_double(fields[2])};
      cell.bbox_px = {static_cast<int>(parse_integer(fields[3])), static_cast<int>(parse_integer(fields[4])),
                      static_cast<int>(parse_integer(fields[5])), static_cast<int>(parse_integer(fields[6]))};
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedRow, "layout record line " + std::to_string(line_no) + ": " + e.what());
    }
    cell.name = std::string(trim(rest));
    map.cells.push_back(std::move(cell));
  }
  if (map.cells.empty()) throw Error(ErrorCode::EmptyLayout, "layout file has no cells");
  map.tau_cm = tau ? *tau : auto_tau(map.bboxes(), cal);
  map.validate();
  return map;
}

LayoutMap load_layout_records(const std::filesystem::path& path, const CalibrationProfile& cal) {
  return parse_layout_records(read_text_file(path), cal);
}

}  // namespace gaze
