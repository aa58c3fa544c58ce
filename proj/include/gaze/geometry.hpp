#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gaze/imaging.hpp"

namespace gaze {

/// Screen raster <-> screen-plane centimeters, camera at the origin.
/// x grows rightward, y grows downward (raster order).
struct CalibrationProfile {
  int screen_w_px = 1920;
  int screen_h_px = 1080;
  double screen_w_cm = 69.84;
  double screen_h_cm = 39.28;
  double camera_px_x = 960.0;
  double camera_px_y = 0.0;

  double cm_per_px_x() const { return screen_w_cm / screen_w_px; }
  double cm_per_px_y() const { return screen_h_cm / screen_h_px; }

  /// Throws MalformedConfig on non-positive or non-finite dimensions.
  void validate() const;

  friend bool operator==(const CalibrationProfile&, const CalibrationProfile&) = default;
};

CalibrationProfile parse_calibration(std::string_view text);
CalibrationProfile load_calibration(const std::filesystem::path& path);
std::string format_calibration(const CalibrationProfile& cal);

struct GazePointCm {
  double x = 0.0;
  double y = 0.0;

  friend constexpr bool operator==(GazePointCm, GazePointCm) = default;
};

struct PixelCoord {
  double x = 0.0;
  double y = 0.0;
};

GazePointCm px_to_cm(PixelCoord p, const CalibrationProfile& cal);
PixelCoord cm_to_px(GazePointCm g, const CalibrationProfile& cal);

struct AssignmentResult {
  enum class Kind { Target, Targetless };

  Kind kind = Kind::Targetless;
  /// 0-based position of the nearest centroid (the target when kind == Target).
  std::size_t index = 0;
  /// Distance to the nearest centroid; +inf when there are no centroids.
  double distance_cm = std::numeric_limits<double>::infinity();

  bool is_target() const { return kind == Kind::Target; }

  friend bool operator==(const AssignmentResult&, const AssignmentResult&) = default;
};

inline constexpr double kNoThreshold = std::numeric_limits<double>::infinity();

/// Nearest centroid by squared distance (lowest index wins ties); a target
/// only when that squared distance is within tau squared.
AssignmentResult assign_target(GazePointCm g, std::span<const GazePointCm> centroids, double tau_cm);

/// 1.25 x the half-diagonal (cm) of the largest cell.
double auto_tau(std::span<const PixelRect> cells, const CalibrationProfile& cal);

}  // namespace gaze
