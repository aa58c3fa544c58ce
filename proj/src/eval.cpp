#include "gaze/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gaze/error.hpp"
#include "gaze/kvfile.hpp"
#include "gaze/nn/train.hpp"
#include "gaze/rng.hpp"

namespace gaze {

RegressionReport regression_report(std::span<const GazePointCm> predictions, std::span<const GazePointCm> truths) {
  if (predictions.size() != truths.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                               std::to_string(truths.size()) + " truths");
  }
  if (predictions.empty()) throw Error(ErrorCode::Empty, "no samples to evaluate");
  double euclid = 0.0;
  double horizontal = 0.0;
  double vertical = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double dx = predictions[i].x - truths[i].x;
    const double dy = predictions[i].y - truths[i].y;
    euclid += std::hypot(dx, dy);
    horizontal += std::abs(dx);
    vertical += std::abs(dy);
  }
  const double n = static_cast<double>(predictions.size());
  return {euclid / n, horizontal / n, vertical / n, predictions.size()};
}

std::string format_regression_report(const RegressionReport& r) {
  std::ostringstream out;
  out << "mean_euclidean_cm = " << format_fixed(r.mean_euclidean_cm) << "\n";
  out << "mean_abs_horizontal_cm = " << format_fixed(r.mean_abs_horizontal_cm) << "\n";
  out << "mean_abs_vertical_cm = " << format_fixed(r.mean_abs_vertical_cm) << "\n";
  out << "n_samples = " << r.n_samples << "\n";
  return out.str();
}

HitRate hit_rate_from_points(std::span<const GazePointCm> predictions, std::span<const GazePointCm> truths,
                             std::span<const GazePointCm> centroids) {
  if (predictions.size() != truths.size()) throw Error(ErrorCode::LengthMismatch, "prediction/truth count differs");
  if (predictions.empty()) throw Error(ErrorCode::EmptySplit, "no samples");
  if (centroids.empty()) throw Error(ErrorCode::EmptyLayout, "layout has no cells");
  HitRate out;
  out.trials = predictions.size();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto t = assign_target(truths[i], centroids, kNoThreshold);
    const auto p = assign_target(predictions[i], centroids, kNoThreshold);
    if (t.index == p.index) ++out.hits;
  }
  return out;
}

HitRate hit_rate_empirical(const nn::GazeNetParams<float>& params, const nn::GazeNetConfig& config,
                           const SampleStore& store, Split split, const LayoutMap& layout) {
  const auto rows = store.indices(split);
  if (rows.empty()) throw Error(ErrorCode::EmptySplit, std::string(to_string(split)) + " split is empty");
  const auto predictions = nn::predict(params, config, store, rows);
  std::vector<GazePointCm> truths;
  truths.reserve(rows.size());
  for (auto i : rows) truths.push_back(store.record(i).gaze_cm);
  const auto centroids = layout.centroids();
  return hit_rate_from_points(predictions, truths, centroids);
}

std::string_view to_string(TruthModel model) {
  return model == TruthModel::ScreenUniform ? "screen" : "centroids";
}

TruthModel parse_truth_model(std::string_view text) {
  if (text == "screen") return TruthModel::ScreenUniform;
  if (text == "centroids") return TruthModel::CellCentroids;
  throw Error(ErrorCode::InvalidArgument, "unknown truth model `" + std::string(text) + "`");
}

namespace {

constexpr std::size_t kShardTrials = 1 << 16;

}  // namespace

HitRate hit_rate_simulated(const SimulationOptions& o) {
  if (o.trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");
  if (!(o.sigma_x >= 0.0) || !(o.sigma_y >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  LayoutSpec spec;
  spec.n_participants = o.n;
  spec.style = o.style;
  spec.calibration = o.calibration;
  spec.names = default_names(o.n);
  const auto centroids = plan_layout(spec).centroids();

  const auto& cal = o.calibration;
  const GazePointCm lo = px_to_cm({0.0, 0.0}, cal);
  const GazePointCm hi = px_to_cm({static_cast<double>(cal.screen_w_px), static_cast<double>(cal.screen_h_px)}, cal);

  HitRate out;
  out.trials = o.trials;
  // Fixed-size shards with their own streams; summed in shard order.
  for (std::size_t shard = 0, done = 0; done < o.trials; ++shard) {
    const std::size_t count = std::min(kShardTrials, o.trials - done);
    Rng rng(derive_seed(o.seed, shard));
    for (std::size_t t = 0; t < count; ++t) {
      GazePointCm truth;
      if (o.truth == TruthModel::CellCentroids) {
        truth = centroids[rng.index(centroids.size())];
      } else {
        truth = {rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y)};
      }
      const GazePointCm pred{truth.x + o.sigma_x * rng.normal(), truth.y + o.sigma_y * rng.normal()};
      if (assign_target(truth, centroids, kNoThreshold).index == assign_target(pred, centroids, kNoThreshold).index) {
        ++out.hits;
      }
    }
    done += count;
  }
  return out;
}

std::string format_hit_rate_table(const std::vector<HitRateRow>& rows) {
  std::ostringstream out;
  out << "style, n, hit_rate, trials\n";
  for (const auto& r : rows) {
    out << to_string(r.style) << ", " << r.n << ", " << format_fixed(r.result.rate()) << ", " << r.result.trials << "\n";
  }
  return out.str();
}

CueStats cue_stats(std::uint64_t h, std::uint64_t m, std::uint64_t fp, std::uint64_t cr) {
  CueStats s{h, m, fp, cr, {}, {}, {}, {}};
  const auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  s.hit_rate = ratio(h, h + m);
  s.miss_rate = ratio(m, h + m);
  s.precision = ratio(h, h + fp);
  s.accuracy = ratio(h + cr, s.n());
  return s;
}

std::string format_cue_stats(const CueStats& s) {
  const auto value = [](const std::optional<double>& v) { return v ? format_fixed(*v) : std::string("undefined"); };
  std::ostringstream out;
  out << "hits = " << s.hits << "\n";
  out << "misses = " << s.misses << "\n";
  out << "false_plays = " << s.false_plays << "\n";
  out << "correct_rejects = " << s.correct_rejects << "\n";
  out << "n = " << s.n() << "\n";
  out << "hit_rate = " << value(s.hit_rate) << "\n";
  out << "miss_rate = " << value(s.miss_rate) << "\n";
  out << "precision = " << value(s.precision) << "\n";
  out << "accuracy = " << value(s.accuracy) << "\n";
  return out.str();
}

FpsReport fps_from_latencies(std::vector<double> latencies) {
  FpsReport r;
  r.trials = latencies.size();
  if (latencies.empty()) return r;
  double sum = 0.0;
  for (double v : latencies) sum += v;
  r.mean_s = sum / static_cast<double>(latencies.size());
  r.fps = r.mean_s > 0.0 ? 1.0 / r.mean_s : 0.0;
  std::sort(latencies.begin(), latencies.end());
  const auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(latencies.size())));
    return latencies[std::max<std::size_t>(k, 1) - 1];
  };
  r.p50_s = rank(0.50);
  r.p95_s = rank(0.95);
  return r;
}

FpsReport fps_benchmark(const std::function<void()>& step, std::size_t trials, std::size_t warmup) {
  for (std::size_t i = 0; i < warmup; ++i) step();
  std::vector<double> latencies;
  latencies.reserve(trials);
  for (std::size_t i = 0; i < trials; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    step();
    const auto t1 = std::chrono::steady_clock::now();
    latencies.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  return fps_from_latencies(std::move(latencies));
}

std::string format_fps_report(const FpsReport& r) {
  std::ostringstream out;
  out << "trials = " << r.trials << "\n";
  out << "mean_latency_s = " << format_fixed(r.mean_s, 6) << "\n";
  out << "fps = " << format_fixed(r.fps, 4) << "\n";
  out << "p50_latency_s = " << format_fixed(r.p50_s, 6) << "\n";
  out << "p95_latency_s = " << format_fixed(r.p95_s, 6) << "\n";
  return out.str();
}

}  // namespace gaze
