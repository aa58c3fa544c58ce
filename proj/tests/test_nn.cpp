#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <functional>
#include <memory>

#include "gaze/dataset.hpp"
#include "gaze/error.hpp"
#include "gaze/nn/adam.hpp"
#include "gaze/nn/gazenet.hpp"
#include "gaze/nn/gradcheck.hpp"
#include "gaze/nn/layers.hpp"
#include "gaze/nn/serialize.hpp"
#include "gaze/nn/train.hpp"
#include "gaze/rng.hpp"
#include "support.hpp"

using namespace gaze;
using namespace gaze::nn;

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Central differences of f at every coordinate of x.
Tensor<double> numeric_grad(Tensor<double> x, const std::function<double(const Tensor<double>&)>& f, double h = 1e-6) {
  Tensor<double> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

void check_close(const Tensor<double>& a, const Tensor<double>& b, double tol = 1e-6) {
  REQUIRE(a.shape() == b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    INFO("index " << i);
    REQUIRE(std::abs(a[i] - b[i]) <= tol * std::max(1.0, std::abs(b[i])));
  }
}

SampleStore random_store(int n, int size, std::uint64_t seed, int val_every = 0) {
  Rng rng(seed);
  SampleStore store;
  for (int i = 0; i < n; ++i) {
    std::vector<std::uint8_t> px(static_cast<std::size_t>(size) * size * 3);
    for (auto& v : px) v = static_cast<std::uint8_t>(rng.index(256));
    SampleRecord r;
    r.sample_id = static_cast<std::uint64_t>(i);
    r.gaze_cm = {rng.uniform(-20, 20), rng.uniform(-30, 0)};
    r.split = (val_every > 0 && i % val_every == 0) ? Split::Val : Split::Train;
    store.add(r, Frame(size, size, std::move(px)),
              {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()), 0.35f, 0.55f});
  }
  return store;
}

}  // namespace

TEST_CASE("conv output size formula") {
  CHECK(conv_output_size(227, 11, 4, 0) == 55);
  CHECK(conv_output_size(27, 5, 1, 2) == 27);
  CHECK(conv_output_size(13, 3, 1, 1) == 13);
  CHECK(conv_output_size(55, 3, 2, 0) == 27);
  CHECK(conv_output_size(27, 3, 2, 0) == 13);
  CHECK(conv_output_size(13, 3, 2, 0) == 6);
  CHECK_THROWS_AS(conv_output_size(2, 3, 1, 0), Error);
}

TEST_CASE("conv forward on a known input") {
  Tensor<double> x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor<double> w({1, 1, 2, 2}, 1.0);
  Tensor<double> b({1}, 0.5);
  const auto y = conv2d_forward(x, w, b, {1, 0});
  CHECK(y == Tensor<double>({1, 1, 2, 2}, {12.5, 16.5, 24.5, 28.5}));
  // Zero padding with a centre tap reproduces the input.
  Tensor<double> id({1, 1, 3, 3}, 0.0);
  id[4] = 1.0;
  CHECK(conv2d_forward(x, id, Tensor<double>({1}), {1, 1}) == x);
  // Stride 2 with padding 1 samples the corners.
  const auto s = conv2d_forward(x, id, Tensor<double>({1}), {2, 1});
  CHECK(s == Tensor<double>({1, 1, 2, 2}, {1, 3, 7, 9}));
}

TEST_CASE("conv forward matches a direct loop") {
  Rng rng(11);
  const auto x = random_tensor({2, 3, 9, 8}, rng);
  const auto w = random_tensor({4, 3, 3, 3}, rng);
  const auto b = random_tensor({4}, rng);
  const Conv2dGeometry g{2, 1};
  const auto y = conv2d_forward(x, w, b, g);
  REQUIRE(y.shape() == Shape{2, 4, 5, 4});
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t oy = 0; oy < 5; ++oy)
        for (std::size_t ox = 0; ox < 4; ++ox) {
          double s = b[o];
          for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t ky = 0; ky < 3; ++ky)
              for (std::size_t kx = 0; kx < 3; ++kx) {
                const long iy = static_cast<long>(oy * 2 + ky) - 1;
                const long ix = static_cast<long>(ox * 2 + kx) - 1;
                if (iy < 0 || ix < 0 || iy >= 9 || ix >= 8) continue;
                s += x[((n * 3 + c) * 9 + iy) * 8 + ix] * w[((o * 3 + c) * 3 + ky) * 3 + kx];
              }
          REQUIRE(std::abs(y[((n * 4 + o) * 5 + oy) * 4 + ox] - s) <= 1e-12);
        }
}

TEST_CASE("relu and maxpool forward") {
  Tensor<double> x({4}, {-1, 0, 2, -0.5});
  CHECK(relu_forward(x) == Tensor<double>({4}, {0, 0, 2, 0}));
  CHECK(relu_backward(Tensor<double>({4}, 1.0), x) == Tensor<double>({4}, {0, 0, 1, 0}));

  Tensor<double> big({1, 2, 55, 55});
  CHECK(maxpool_forward(big, 3, 2).output.shape() == Shape{1, 2, 27, 27});
  Tensor<double> p({1, 1, 3, 3}, {1, 9, 2, 3, 4, 5, 9, 6, 7});
  const auto r = maxpool_forward(p, 3, 2);
  CHECK(r.output[0] == 9);
  CHECK(r.argmax[0] == 1);  // first maximum in scan order
}

TEST_CASE("dense backward matches finite differences") {
  Rng rng(5);
  const auto x = random_tensor({3, 7}, rng);
  const auto w = random_tensor({4, 7}, rng);
  const auto b = random_tensor({4}, rng);
  const auto r = random_tensor({3, 4}, rng);
  const auto g = dense_backward(x, w, r);
  check_close(g.input, numeric_grad(x, [&](const auto& v) { return dot(dense_forward(v, w, b), r); }));
  check_close(g.weight, numeric_grad(w, [&](const auto& v) { return dot(dense_forward(x, v, b), r); }));
  check_close(g.bias, numeric_grad(b, [&](const auto& v) { return dot(dense_forward(x, w, v), r); }));
}

TEST_CASE("conv backward matches finite differences") {
  Rng rng(6);
  for (const Conv2dGeometry geo : {Conv2dGeometry{1, 0}, Conv2dGeometry{2, 1}, Conv2dGeometry{1, 2}}) {
    const auto x = random_tensor({2, 2, 7, 6}, rng);
    const auto w = random_tensor({3, 2, 3, 3}, rng);
    const auto b = random_tensor({3}, rng);
    const auto r = random_tensor(conv2d_forward(x, w, b, geo).shape(), rng);
    const auto g = conv2d_backward(x, w, r, geo);
    check_close(g.input, numeric_grad(x, [&](const auto& v) { return dot(conv2d_forward(v, w, b, geo), r); }));
    check_close(g.weight, numeric_grad(w, [&](const auto& v) { return dot(conv2d_forward(x, v, b, geo), r); }));
    check_close(g.bias, numeric_grad(b, [&](const auto& v) { return dot(conv2d_forward(x, w, v, geo), r); }));
    CHECK(conv2d_backward(x, w, r, geo, false).input.size() == 0);
  }
}

TEST_CASE("maxpool backward matches finite differences") {
  Rng rng(7);
  // Distinct values keep every window away from ties.
  Tensor<double> x({2, 2, 7, 7});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  for (std::size_t i = x.size(); i > 1; --i) std::swap(x[i - 1], x[rng.index(i)]);
  const auto fwd = maxpool_forward(x, 3, 2);
  const auto r = random_tensor(fwd.output.shape(), rng);
  const auto g = maxpool_backward(r, fwd.argmax, x.shape());
  check_close(g, numeric_grad(x, [&](const auto& v) { return dot(maxpool_forward(v, 3, 2).output, r); }, 1e-3));
}

TEST_CASE("mse loss value and gradient") {
  Tensor<double> pred({2, 2}, {1, 2, 3, 4});
  Tensor<double> truth({2, 2}, {0, 0, 3, 6});
  const auto m = mse_loss(pred, truth);
  CHECK(m.loss == doctest::Approx(2.25));  // (1 + 4 + 0 + 4) / 4
  check_close(m.grad, numeric_grad(pred, [&](const auto& v) { return mse_loss(v, truth).loss; }));
  Tensor<double> one_pred({1, 2}, {1, 2});
  CHECK(mse_loss(one_pred, Tensor<double>({1, 2}, {0, 0})).loss == doctest::Approx(2.5));
  CHECK_THROWS_AS(mse_loss(pred, Tensor<double>({1, 2})), Error);
}

TEST_CASE("network shapes") {
  const auto full = describe(GazeNetConfig{});
  CHECK(full.conv_channels == std::array<std::size_t, 5>{96, 256, 384, 384, 256});
  CHECK(full.conv_out[0] == 55);
  CHECK(full.pool_out == std::array<std::size_t, 3>{27, 13, 6});
  CHECK(full.flatten == 9216);
  CHECK(full.fc1_in == 9220);
  CHECK(full.fc_out == std::array<std::size_t, 3>{4096, 4096, 2});

  const auto quarter = describe(GazeNetConfig{0.25});
  CHECK(quarter.flatten == 2304);
  CHECK(quarter.fc1_in == 2308);
  CHECK(quarter.fc_out[0] == 1024);

  CHECK_THROWS_AS(describe(GazeNetConfig{0.0}), Error);
  CHECK_THROWS_AS(describe(GazeNetConfig{1.5}), Error);
  GazeNetConfig tiny;
  tiny.input_size = 20;
  CHECK_THROWS_AS(describe(tiny), Error);
}

TEST_CASE("zero weights give the fc3 bias for every input") {
  const auto cfg = gradcheck_config();
  auto p = zero_params<double>(cfg);
  p[kFc3B][0] = 1.5;
  p[kFc3B][1] = -2.0;
  Rng rng(1);
  const auto s = static_cast<std::size_t>(cfg.input_size);
  const auto out = forward_gazenet(p, cfg, random_tensor({3, 3, s, s}, rng, 0, 1), random_tensor({3, 4}, rng, 0, 1));
  CHECK(out == Tensor<double>({3, 2}, {1.5, -2, 1.5, -2, 1.5, -2}));
}

TEST_CASE("bbox features reach the output") {
  const auto cfg = gradcheck_config();
  const auto p = init_params<double>(cfg, 3);
  Rng rng(2);
  const auto s = static_cast<std::size_t>(cfg.input_size);
  const auto faces = random_tensor({1, 3, s, s}, rng, 0, 1);
  auto boxes = Tensor<double>({1, 4}, {0.2, 0.3, 0.4, 0.5});
  const auto a = forward_gazenet(p, cfg, faces, boxes);
  boxes[2] = 0.9;
  const auto b = forward_gazenet(p, cfg, faces, boxes);
  CHECK(a != b);
  CHECK_THROWS_AS(forward_gazenet(p, cfg, faces, Tensor<double>({1, 3})), Error);
}

TEST_CASE("forward is equivariant to batch permutation") {
  const auto cfg = gradcheck_config();
  const auto p = init_params<double>(cfg, 8);
  Rng rng(9);
  const auto s = static_cast<std::size_t>(cfg.input_size);
  const std::size_t plane = 3 * s * s;
  const auto faces = random_tensor({4, 3, s, s}, rng, 0, 1);
  const auto boxes = random_tensor({4, 4}, rng, 0, 1);
  const std::array<std::size_t, 4> perm{2, 0, 3, 1};
  Tensor<double> pf(faces.shape()), pb(boxes.shape());
  for (std::size_t i = 0; i < 4; ++i) {
    std::copy_n(faces.data() + perm[i] * plane, plane, pf.data() + i * plane);
    std::copy_n(boxes.data() + perm[i] * 4, 4, pb.data() + i * 4);
  }
  const auto out = forward_gazenet(p, cfg, faces, boxes);
  const auto pout = forward_gazenet(p, cfg, pf, pb);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 2; ++k) CHECK(pout[i * 2 + k] == doctest::Approx(out[perm[i] * 2 + k]).epsilon(1e-12));
}

TEST_CASE("init is deterministic and float matches double") {
  const auto cfg = gradcheck_config();
  CHECK(init_params<float>(cfg, 4) == init_params<float>(cfg, 4));
  CHECK(init_params<float>(cfg, 4) != init_params<float>(cfg, 5));
  const auto pd = init_params<double>(cfg, 4);
  const auto pf = pd.cast<float>();
  Rng rng(3);
  const auto s = static_cast<std::size_t>(cfg.input_size);
  const auto faces = random_tensor({2, 3, s, s}, rng, 0, 1);
  const auto boxes = random_tensor({2, 4}, rng, 0, 1);
  const auto od = forward_gazenet(pd, cfg, faces, boxes);
  const auto of = forward_gazenet(pf, cfg, faces.cast<float>(), boxes.cast<float>());
  for (std::size_t i = 0; i < od.size(); ++i) CHECK(of[i] == doctest::Approx(od[i]).epsilon(1e-4));
}

TEST_CASE("adam single step") {
  Tensor<double> p({1}, 1.0), g({1}, 0.5), m({1}), v({1});
  adam_update(p, g, m, v, 1, AdamOptions{});
  // Bias correction makes the first step lr * g / |g|.
  CHECK(std::abs(p[0] - (1.0 - 1e-3 * 0.5 / (0.5 + 1e-8))) <= 1e-15);
  CHECK(std::abs(p[0] - 0.999) <= 1e-10);
  CHECK_THROWS_AS(adam_update(p, g, m, v, 0, AdamOptions{}), Error);

  // Second step against a hand-rolled oracle.
  Tensor<double> g2({1}, -0.2);
  adam_update(p, g2, m, v, 2, AdamOptions{});
  const double m2 = 0.9 * (0.1 * 0.5) + 0.1 * -0.2;
  const double v2 = 0.999 * (0.001 * 0.25) + 0.001 * 0.04;
  const double expect = (1.0 - 1e-3 * 0.5 / (0.5 + 1e-8)) - 1e-3 * (m2 / (1 - 0.81)) / (std::sqrt(v2 / (1 - 0.999 * 0.999)) + 1e-8);
  CHECK(std::abs(p[0] - expect) <= 1e-15);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  const auto cfg = gradcheck_config();
  auto p = init_params<float>(cfg, 1);
  const auto before = p;
  auto state = make_adam_state(p);
  for (int i = 0; i < 3; ++i) adam_step(p, zeros_like(p), state);
  CHECK(state.t == 3);
  CHECK(p == before);
}

TEST_CASE("parameter files round trip exactly") {
  test_support::TempDir dir;
  GazeNetConfig cfg = gradcheck_config();
  cfg.bbox_mode = BBoxFeatureMode::RawPixels;
  const auto p = init_params<float>(cfg, 12);
  save_params(dir / "m.gznt", p, cfg);
  const auto loaded = load_params(dir / "m.gznt");
  CHECK(loaded.config == cfg);
  CHECK(loaded.params == p);
  CHECK(load_params(dir / "m.gznt", cfg).params == p);
}

TEST_CASE("parameter file errors") {
  const auto cfg = gradcheck_config();
  const auto bytes = encode_params(init_params<float>(cfg, 1), cfg);
  REQUIRE(bytes.substr(0, 4) == "GZNT");

  auto code_of = [](std::string_view data, std::optional<GazeNetConfig> expected = std::nullopt) {
    try {
      decode_params(data, expected);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(code_of(bytes.substr(0, bytes.size() / 2)) == ErrorCode::TruncatedData);
  CHECK(code_of(bytes.substr(0, 3)) == ErrorCode::TruncatedData);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK(code_of(bad) == ErrorCode::BadMagic);
  auto ver = bytes;
  ver[4] = 9;
  CHECK(code_of(ver) == ErrorCode::VersionMismatch);
  auto other = cfg;
  other.width_multiplier = 0.5;
  CHECK(code_of(bytes, other) == ErrorCode::ShapeMismatch);
  // Header says one width, tensors hold another.
  auto wide = encode_params(init_params<float>(other, 1), other);
  const auto m = std::bit_cast<std::array<char, 8>>(cfg.width_multiplier);
  std::copy(m.begin(), m.end(), wide.begin() + 6);
  CHECK(code_of(wide) == ErrorCode::ShapeMismatch);
}

TEST_CASE("one epoch over 32 samples with batch 32 is one step") {
  const auto cfg = gradcheck_config();
  const auto store = random_store(32, cfg.input_size, 1);
  TrainOptions o;
  o.epochs = 1;
  o.batch_size = 32;
  const auto r = train(store, cfg, o);
  CHECK(r.steps == 1);
  REQUIRE(r.log.size() == 2);
  CHECK(r.log[0].epoch == 0);
  CHECK(std::isnan(r.log[0].val_loss));
  CHECK(r.selected_epoch == 1);
  o.batch_size = 10;
  CHECK(train(store, cfg, o).steps == 4);
}

TEST_CASE("training is deterministic for a seed") {
  const auto cfg = gradcheck_config();
  const auto store = random_store(40, cfg.input_size, 2, 5);
  TrainOptions o;
  o.epochs = 2;
  o.batch_size = 8;
  o.seed = 77;
  const auto a = train(store, cfg, o);
  // Shift later heap allocations so alignment-dependent sums would show.
  std::vector<std::unique_ptr<char[]>> pad;
  for (int i = 1; i < 40; ++i) pad.emplace_back(new char[static_cast<std::size_t>(i) * 4]);
  const auto b = train(store, cfg, o);
  CHECK(a.params == b.params);
  CHECK(a.log == b.log);
  CHECK(format_loss_log(a.log) == format_loss_log(b.log));
  o.seed = 78;
  CHECK(train(store, cfg, o).params != a.params);
}

TEST_CASE("full-batch training lowers the loss") {
  const auto cfg = gradcheck_config();
  const auto store = random_store(16, cfg.input_size, 3);
  TrainOptions o;
  o.epochs = 5;
  o.batch_size = 16;
  o.adam.lr = 1e-4;
  o.keep_best_val = false;
  const auto r = train(store, cfg, o);
  REQUIRE(r.log.size() == 6);
  // Full batches: entry k holds the loss before step k.
  CHECK(r.log[1].train_loss == doctest::Approx(r.log[0].train_loss).epsilon(1e-5));
  for (std::size_t k = 2; k < r.log.size(); ++k) CHECK(r.log[k].train_loss < r.log[k - 1].train_loss);
  CHECK(evaluate_loss(r.params, cfg, store, Split::Train) < r.log[5].train_loss);
}

TEST_CASE("training input errors") {
  const auto cfg = gradcheck_config();
  SampleStore empty;
  CHECK_THROWS_AS(train(empty, cfg, {}), Error);
  const auto wrong = random_store(4, 40, 1);
  try {
    train(wrong, cfg, {});
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("keeping the best validation epoch") {
  const auto cfg = gradcheck_config();
  const auto store = random_store(30, cfg.input_size, 4, 3);
  TrainOptions o;
  o.epochs = 4;
  o.batch_size = 5;
  o.adam.lr = 3e-3;
  const auto r = train(store, cfg, o);
  std::size_t best = 0;
  for (std::size_t k = 1; k < r.log.size(); ++k)
    if (r.log[k].val_loss < r.log[best].val_loss) best = k;
  CHECK(r.selected_epoch == static_cast<int>(best));
  CHECK(evaluate_loss(r.params, cfg, store, Split::Val) == doctest::Approx(r.log[best].val_loss).epsilon(1e-6));
}

TEST_CASE("gradient check passes and catches a corrupted gradient") {
  const auto cfg = gradcheck_config();
  const auto report = grad_check(cfg, {});
  CHECK(report.passed);
  CHECK(report.max_rel_error <= 1e-5);
  for (const auto& p : report.params) CHECK(p.checked > 0);
  const auto text = format_report(report);
  CHECK(text.find("passed = true") != std::string::npos);
  CHECK(text.find("conv1.weight.max_rel_error") != std::string::npos);

  GradCheckOptions bad;
  bad.corrupt_param = kConv3W;
  const auto broken = grad_check(cfg, bad);
  CHECK_FALSE(broken.passed);
  CHECK(broken.params[kConv3W].max_rel_error > 0.01);
  CHECK(broken.params[kFc1W].max_rel_error <= 1e-5);
}
