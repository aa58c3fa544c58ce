#include "gaze/geometry.hpp"

#include <cmath>

#include "gaze/error.hpp"
#include "gaze/kvfile.hpp"

namespace gaze {

void CalibrationProfile::validate() const {
  const auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (screen_w_px <= 0 || screen_h_px <= 0 || !ok(screen_w_cm) || !ok(screen_h_cm)) {
    throw Error(ErrorCode::MalformedConfig, "calibration dimensions must be positive");
  }
  if (!std::isfinite(camera_px_x) || !std::isfinite(camera_px_y)) {
    throw Error(ErrorCode::MalformedConfig, "camera position must be finite");
  }
}

CalibrationProfile parse_calibration(std::string_view text) {
  const auto kv = parse_key_values(text);
  const auto as_int = [&](const char* key) {
    const double v = kv_number(kv, key);
    if (v != std::floor(v)) throw Error(ErrorCode::MalformedConfig, std::string(key) + " must be an integer");
    return static_cast<int>(v);
  };
  CalibrationProfile cal;
  cal.screen_w_px = as_int("screen_w_px");
  cal.screen_h_px = as_int("screen_h_px");
  cal.screen_w_cm = kv_number(kv, "screen_w_cm");
  cal.screen_h_cm = kv_number(kv, "screen_h_cm");
  cal.camera_px_x = kv_number(kv, "camera_px_x");
  cal.camera_px_y = kv_number(kv, "camera_px_y");
  cal.validate();
  return cal;
}

CalibrationProfile load_calibration(const std::filesystem::path& path) {
  return parse_calibration(read_text_file(path));
}

std::string format_calibration(const CalibrationProfile& cal) {
  KeyValues kv;
  kv["screen_w_px"] = std::to_string(cal.screen_w_px);
  kv["screen_h_px"] = std::to_string(cal.screen_h_px);
  kv["screen_w_cm"] = format_fixed(cal.screen_w_cm);
  kv["screen_h_cm"] = format_fixed(cal.screen_h_cm);
  kv["camera_px_x"] = format_fixed(cal.camera_px_x);
  kv["camera_px_y"] = format_fixed(cal.camera_px_y);
  return format_key_values(kv);
}

GazePointCm px_to_cm(PixelCoord p, const CalibrationProfile& cal) {
  return {(p.x - cal.camera_px_x) * cal.screen_w_cm / cal.screen_w_px,
          (p.y - cal.camera_px_y) * cal.screen_h_cm / cal.screen_h_px};
}

PixelCoord cm_to_px(GazePointCm g, const CalibrationProfile& cal) {
  return {g.x * cal.screen_w_px / cal.screen_w_cm + cal.camera_px_x,
          g.y * cal.screen_h_px / cal.screen_h_cm + cal.camera_px_y};
}

AssignmentResult assign_target(GazePointCm g, std::span<const GazePointCm> centroids, double tau_cm) {
  if (tau_cm < 0.0 || std::isnan(tau_cm)) throw Error(ErrorCode::InvalidArgument, "tau must be >= 0");
  AssignmentResult result;
  if (centroids.empty()) return result;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < centroids.size(); ++n) {
    const double dx = g.x - centroids[n].x;
    const double dy = g.y - centroids[n].y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best) {
      best = d2;
      result.index = n;
    }
  }
  result.distance_cm = std::sqrt(best);
  result.kind = best <= tau_cm * tau_cm ? AssignmentResult::Kind::Target : AssignmentResult::Kind::Targetless;
  return result;
}

double auto_tau(std::span<const PixelRect> cells, const CalibrationProfile& cal) {
  if (cells.empty()) throw Error(ErrorCode::EmptyLayout, "auto_tau needs at least one cell");
  double largest = 0.0;
  for (const auto& c : cells) {
    const double w = std::max(c.width, 0) * cal.cm_per_px_x();
    const double h = std::max(c.height, 0) * cal.cm_per_px_y();
    largest = std::max(largest, 0.5 * std::hypot(w, h));
  }
  return 1.25 * largest;
}

}  // namespace gaze
