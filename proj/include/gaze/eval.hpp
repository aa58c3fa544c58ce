#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gaze/dataset.hpp"
#include "gaze/geometry.hpp"
#include "gaze/layout.hpp"
#include "gaze/nn/gazenet.hpp"

namespace gaze {

struct RegressionReport {
  double mean_euclidean_cm = 0.0;
  double mean_abs_horizontal_cm = 0.0;
  double mean_abs_vertical_cm = 0.0;
  std::size_t n_samples = 0;
};

/// Throws LengthMismatch or Empty.
RegressionReport regression_report(std::span<const GazePointCm> predictions, std::span<const GazePointCm> truths);

std::string format_regression_report(const RegressionReport& report);

struct HitRate {
  std::size_t hits = 0;
  std::size_t trials = 0;
  double rate() const { return trials == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(trials); }
};

/// Nearest-cell agreement between predicted and true gaze (no threshold).
/// Throws EmptySplit with no samples and EmptyLayout with no cells.
HitRate hit_rate_from_points(std::span<const GazePointCm> predictions, std::span<const GazePointCm> truths,
                             std::span<const GazePointCm> centroids);

HitRate hit_rate_empirical(const nn::GazeNetParams<float>& params, const nn::GazeNetConfig& config,
                           const SampleStore& store, Split split, const LayoutMap& layout);

enum class TruthModel {
  ScreenUniform,  // true gaze uniform over the whole screen
  CellCentroids,  // true gaze on a uniformly chosen cell centroid
};

std::string_view to_string(TruthModel model);
TruthModel parse_truth_model(std::string_view text);

inline constexpr double kDefaultSigmaX = 0.85;
inline constexpr double kDefaultSigmaY = 1.83;

struct SimulationOptions {
  LayoutStyle style = LayoutStyle::FullscreenGrid;
  int n = 4;
  double sigma_x = kDefaultSigmaX;
  double sigma_y = kDefaultSigmaY;
  std::size_t trials = 1'000'000;
  std::uint64_t seed = 0;
  TruthModel truth = TruthModel::ScreenUniform;
  CalibrationProfile calibration;
};

/// Monte Carlo hit rate with axis-wise Gaussian prediction noise.
HitRate hit_rate_simulated(const SimulationOptions& options);

struct HitRateRow {
  LayoutStyle style = LayoutStyle::FullscreenGrid;
  int n = 0;
  HitRate result;
};

/// `style, n, hit_rate, trials` rows under a header line.
std::string format_hit_rate_table(const std::vector<HitRateRow>& rows);

struct CueStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t false_plays = 0;
  std::uint64_t correct_rejects = 0;
  /// nullopt = Undefined (zero denominator).
  std::optional<double> hit_rate;
  std::optional<double> miss_rate;
  std::optional<double> precision;
  std::optional<double> accuracy;

  std::uint64_t n() const { return hits + misses + false_plays + correct_rejects; }
};

CueStats cue_stats(std::uint64_t hits, std::uint64_t misses, std::uint64_t false_plays, std::uint64_t correct_rejects);

/// Undefined ratios are written as `undefined`.
std::string format_cue_stats(const CueStats& stats);

struct FpsReport {
  std::size_t trials = 0;
  double mean_s = 0.0;
  double fps = 0.0;
  double p50_s = 0.0;
  double p95_s = 0.0;
};

inline constexpr std::size_t kDefaultBenchTrials = 1000;
inline constexpr std::size_t kBenchWarmup = 10;

/// Times `step` on a steady clock after untimed warm-up iterations.
FpsReport fps_benchmark(const std::function<void()>& step, std::size_t trials = kDefaultBenchTrials,
                        std::size_t warmup = kBenchWarmup);

FpsReport fps_from_latencies(std::vector<double> latencies_s);

std::string format_fps_report(const FpsReport& report);

}  // namespace gaze
