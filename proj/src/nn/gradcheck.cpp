#include "gaze/nn/gradcheck.hpp"

#include <cmath>
#include <sstream>

#include "gaze/kvfile.hpp"
#include "gaze/rng.hpp"

namespace gaze::nn {

GazeNetConfig gradcheck_config() {
  GazeNetConfig c;
  c.width_multiplier = 1.0 / 48.0;
  c.input_size = 67;
  return c;
}

namespace {

bool same_pattern(const ForwardCache<double>& a, const ForwardCache<double>& b) {
  const auto same_mask = [](const Tensor<double>& x, const Tensor<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if ((x[i] > 0.0) != (y[i] > 0.0)) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < 5; ++i) {
    if (!same_mask(a.conv_act[i], b.conv_act[i])) return false;
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (a.pool_argmax[i] != b.pool_argmax[i]) return false;
  }
  return same_mask(a.fc1_act, b.fc1_act) && same_mask(a.fc2_act, b.fc2_act);
}

}  // namespace

GradCheckReport grad_check(const GazeNetConfig& config, const GradCheckOptions& o) {
  const auto shape = describe(config);
  const std::size_t s = static_cast<std::size_t>(config.input_size);
  auto params = init_params<double>(config, derive_seed(o.seed, 1));

  Rng rng(derive_seed(o.seed, 2));
  // Nonzero biases so every bias path is exercised away from zero.
  for (std::size_t i = 1; i < kParamCount; i += 2) {
    for (auto& v : params[i].values()) v = rng.uniform(-0.1, 0.1);
  }
  Tensor<double> faces({o.batch, 3, s, s});
  for (auto& v : faces.values()) v = rng.uniform();
  Tensor<double> bboxes({o.batch, static_cast<std::size_t>(config.bbox_feature_count)});
  for (auto& v : bboxes.values()) v = rng.uniform();
  Tensor<double> target({o.batch, shape.fc_out[2]});
  for (auto& v : target.values()) v = 10.0 * rng.normal();

  ForwardCache<double> base;
  const auto pred = forward_gazenet(params, config, faces, bboxes, &base);
  const auto grads = backward_gazenet(params, config, base, mse_loss(pred, target).grad);

  GradCheckReport report;
  report.tolerance = o.tolerance;
  ForwardCache<double> plus_cache;
  ForwardCache<double> minus_cache;
  for (std::size_t p = 0; p < kParamCount; ++p) {
    auto& check = report.params[p];
    check.name = std::string(param_name(p));
    const double corrupt = o.corrupt_param == p ? 1.1 : 1.0;
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double saved = params[p][i];
      params[p][i] = saved + o.step;
      const double lp = mse_loss(forward_gazenet(params, config, faces, bboxes, &plus_cache), target).loss;
      params[p][i] = saved - o.step;
      const double lm = mse_loss(forward_gazenet(params, config, faces, bboxes, &minus_cache), target).loss;
      params[p][i] = saved;
      if (!same_pattern(plus_cache, base) || !same_pattern(minus_cache, base)) {
        ++check.skipped;
        continue;
      }
      const double numeric = (lp - lm) / (2.0 * o.step);
      const double analytic = grads[p][i] * corrupt;
      const double abs_err = std::abs(analytic - numeric);
      const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), o.floor});
      check.max_rel_error = std::max(check.max_rel_error, rel);
      check.max_abs_error = std::max(check.max_abs_error, abs_err);
      ++check.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
  }
  report.passed = report.max_rel_error <= o.tolerance;
  for (const auto& c : report.params) report.passed = report.passed && c.checked > 0;
  return report;
}

std::string format_report(const GradCheckReport& r) {
  std::ostringstream out;
  for (const auto& c : r.params) {
    out << c.name << ".max_rel_error = " << format_fixed(c.max_rel_error, 12) << "\n";
    out << c.name << ".checked = " << c.checked << "\n";
    out << c.name << ".skipped = " << c.skipped << "\n";
  }
  out << "max_rel_error = " << format_fixed(r.max_rel_error, 12) << "\n";
  out << "tolerance = " << format_fixed(r.tolerance, 12) << "\n";
  out << "passed = " << (r.passed ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace gaze::nn
