#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "gaze/nn/gazenet.hpp"

namespace gaze::nn {

struct GradCheckOptions {
  std::uint64_t seed = 0;
  std::size_t batch = 2;
  double step = 1e-4;
  double tolerance = 1e-5;
  /// Denominator floor of the relative error.
  double floor = 1e-6;
  /// Scales the analytic gradient of one tensor by 1.1 (fault injection).
  std::optional<std::size_t> corrupt_param;
};

/// Tiny network that keeps every layer: 67 px input, about 1/48 width.
GazeNetConfig gradcheck_config();

struct ParamCheck {
  std::string name;
  std::size_t checked = 0;
  /// Coordinates whose +-step perturbation crosses a relu or max-pool switch.
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::array<ParamCheck, kParamCount> params;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Analytic gradients of the MSE loss against central differences over every
/// parameter, in double precision.
GradCheckReport grad_check(const GazeNetConfig& config, const GradCheckOptions& options = {});

/// `key = value` lines, one `<param>.max_rel_error` per tensor plus a verdict.
std::string format_report(const GradCheckReport& report);

}  // namespace gaze::nn
