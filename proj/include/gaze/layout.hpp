#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gaze/geometry.hpp"
#include "gaze/imaging.hpp"

namespace gaze {

struct TargetCell {
  int index = 0;  // 1-based
  GazePointCm centroid_cm;
  PixelRect bbox_px;
  std::string name;
};

struct LayoutMap {
  std::vector<TargetCell> cells;
  double tau_cm = 0.0;
  CalibrationProfile calibration;

  std::vector<GazePointCm> centroids() const;
  std::vector<PixelRect> bboxes() const;
  /// Throws InvalidArgument unless indices run 1..N and tau >= 0.
  void validate() const;
};

enum class LayoutStyle { FullscreenGrid, HorizontalStrip };

std::string_view to_string(LayoutStyle style);
/// Accepts "grid"/"strip" or the full style names.
LayoutStyle parse_layout_style(std::string_view text);

/// Where a cell's name label lives, as fractions of the cell bbox.
struct NameRegionSpec {
  double left_frac = 0.0;
  double top_frac = 0.9;
  double width_frac = 0.6;
  double height_frac = 0.1;
};

PixelRect name_region(const PixelRect& cell, const NameRegionSpec& spec);
/// Largest glyph scale whose 7-row height fits the region with a 1 px margin.
int name_text_scale(const PixelRect& region);
PixelPoint name_text_origin(const PixelRect& region, int scale);

inline constexpr Rgb kDefaultBackground{18, 18, 18};
inline constexpr Rgb kNameStripColor{64, 64, 64};
inline constexpr Rgb kNameTextColor{255, 255, 255};
inline constexpr int kCellGutterPx = 4;
inline constexpr int kMinCellWidthPx = 32;
inline constexpr int kDecorationBandPx = 64;

struct LayoutSpec {
  int n_participants = 4;
  LayoutStyle style = LayoutStyle::FullscreenGrid;
  std::vector<std::string> names;
  Rgb background = kDefaultBackground;
  CalibrationProfile calibration;
  NameRegionSpec name_region;
  /// Reserve a bottom band holding a 300x50 toolbar and a square icon.
  bool decorations = false;
  /// Varies cell fill colors only; geometry is a function of the style and N.
  std::uint64_t seed = 0;
};

/// Cell rectangles in row-major order. Grid: ceil(sqrt N) columns with a
/// centered partial last row; strip: one full-width row pinned to the top.
/// Every cell keeps a 4 px gutter and is 16:9 up to integer rounding.
std::vector<PixelRect> plan_cells(LayoutStyle style, int n, int screen_w, int screen_h);

/// Ground-truth map for a spec without rendering it.
LayoutMap plan_layout(const LayoutSpec& spec);

std::pair<Frame, LayoutMap> generate_screenshot(const LayoutSpec& spec);

std::vector<std::string> default_names(int n);

struct ParseOptions {
  Rgb background = kDefaultBackground;
  int tolerance = 8;
  double ar_tolerance = 0.10;
  NameRegionSpec name_region;
  Rgb text_color = kNameTextColor;
  /// Externally supplied names (e.g. a label sidecar); replaces decoded names.
  std::optional<std::vector<std::string>> labels;
};

bool is_video_cell_aspect(const PixelRect& bbox, double ar_tolerance);

LayoutMap parse_screenshot(const Frame& frame, const CalibrationProfile& cal, const ParseOptions& options = {});

LayoutMap attach_labels(LayoutMap map, const std::vector<std::string>& labels);

std::vector<std::string> read_labels(const std::filesystem::path& path);
std::vector<std::string> parse_labels(std::string_view text);
void write_labels(const std::filesystem::path& path, const std::vector<std::string>& labels);

/// `index, cx_cm, cy_cm, left, top, w, h, name` per cell, preceded by a
/// `# tau_cm = ...` comment line.
std::string format_layout_records(const LayoutMap& map);
/// Inverse of format_layout_records. Without a tau comment, tau comes from auto_tau.
LayoutMap parse_layout_records(std::string_view text, const CalibrationProfile& cal);
LayoutMap load_layout_records(const std::filesystem::path& path, const CalibrationProfile& cal);

}  // namespace gaze
