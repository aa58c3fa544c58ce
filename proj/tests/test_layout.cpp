#include <doctest.h>

#include <cmath>
#include <functional>

#include "gaze/error.hpp"
#include "gaze/layout.hpp"
#include "gaze/rng.hpp"
#include "support.hpp"

using namespace gaze;

namespace {

ErrorCode error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

LayoutSpec make_spec(LayoutStyle style, int n) {
  LayoutSpec spec;
  spec.style = style;
  spec.n_participants = n;
  spec.names = default_names(n);
  return spec;
}

std::vector<std::string> random_names(Rng& rng, int n) {
  static const std::string alpha = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) {
    std::string s;
    const std::size_t len = 3 + rng.index(8);
    for (std::size_t k = 0; k < len; ++k) s.push_back(alpha[rng.index(alpha.size())]);
    names.push_back(s);
  }
  return names;
}

}  // namespace

TEST_CASE("strip of 3 on a 1920 px screen") {
  const auto cells = plan_cells(LayoutStyle::HorizontalStrip, 3, 1920, 1080);
  REQUIRE(cells.size() == 3);
  for (const auto& c : cells) {
    CHECK(c.width == 636);
    CHECK(c.height == 357);
  }
  CHECK(cells[1].left - cells[0].left == 640);
}

TEST_CASE("grid of 4 sits on the quarter-screen centers") {
  const auto map = plan_layout(make_spec(LayoutStyle::FullscreenGrid, 4));
  REQUIRE(map.cells.size() == 4);
  const double xs[] = {480, 1440, 480, 1440};
  const double ys[] = {270, 270, 810, 810};
  for (int i = 0; i < 4; ++i) {
    const auto& r = map.cells[static_cast<std::size_t>(i)].bbox_px;
    CHECK(std::abs(r.center_x() - xs[i]) <= 1.0);
    CHECK(std::abs(r.center_y() - ys[i]) <= 1.0);
  }
}

TEST_CASE("grid of 5 has rows of 3 and 2 with the second row centered") {
  const auto cells = plan_cells(LayoutStyle::FullscreenGrid, 5, 1920, 1080);
  REQUIRE(cells.size() == 5);
  CHECK(cells[0].top == cells[2].top);
  CHECK(cells[3].top == cells[4].top);
  CHECK(cells[3].top > cells[0].top);
  const double row2_mid = (cells[3].center_x() + cells[4].center_x()) / 2.0;
  CHECK(std::abs(row2_mid - 959.5) <= 1.0);
  CHECK(std::abs(cells[1].center_x() - 959.5) <= 1.0);
}

TEST_CASE("planned cells are 16:9 within rounding and never overlap") {
  for (auto style : {LayoutStyle::FullscreenGrid, LayoutStyle::HorizontalStrip}) {
    for (int n = 2; n <= 12; ++n) {
      const auto cells = plan_cells(style, n, 1920, 1080);
      for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(is_video_cell_aspect(cells[i], 0.01));
        CHECK(intersect(cells[i], {0, 0, 1920, 1080}) == cells[i]);
        for (std::size_t j = i + 1; j < cells.size(); ++j) CHECK(intersect(cells[i], cells[j]).empty());
      }
    }
  }
}

TEST_CASE("too many participants") {
  CHECK(error_of([] { plan_cells(LayoutStyle::HorizontalStrip, 70, 1920, 1080); }) == ErrorCode::TooManyParticipants);
  CHECK(error_of([] { plan_layout(make_spec(LayoutStyle::HorizontalStrip, 2)); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("aspect predicate") {
  CHECK(is_video_cell_aspect({0, 0, 1600, 900}, 0.10));
  CHECK_FALSE(is_video_cell_aspect({0, 0, 300, 50}, 0.10));
  CHECK_FALSE(is_video_cell_aspect({0, 0, 40, 40}, 0.10));
  // 16:9 +- 10 percent: 1.6 and 1.955 are the edges.
  CHECK(is_video_cell_aspect({0, 0, 160, 100}, 0.10));
  CHECK_FALSE(is_video_cell_aspect({0, 0, 159, 100}, 0.10));
}

TEST_CASE("parse recovers a generated 2x2 grid") {
  auto spec = make_spec(LayoutStyle::FullscreenGrid, 4);
  spec.names = {"Alison", "Walter", "Bo", "Dee"};
  const auto [frame, truth] = generate_screenshot(spec);
  const auto parsed = parse_screenshot(frame, spec.calibration);
  REQUIRE(parsed.cells.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto t = cm_to_px(truth.cells[i].centroid_cm, spec.calibration);
    const auto p = cm_to_px(parsed.cells[i].centroid_cm, spec.calibration);
    CHECK(std::hypot(t.x - p.x, t.y - p.y) <= 1.0);
    CHECK(parsed.cells[i].name == truth.cells[i].name);
    CHECK(parsed.cells[i].index == static_cast<int>(i) + 1);
  }
  CHECK(parsed.tau_cm == doctest::Approx(truth.tau_cm));
}

TEST_CASE("parse skips toolbar and icon decorations") {
  for (auto style : {LayoutStyle::FullscreenGrid, LayoutStyle::HorizontalStrip}) {
    auto spec = make_spec(style, 5);
    spec.decorations = true;
    const auto [frame, truth] = generate_screenshot(spec);
    const auto mask = foreground_mask(frame, spec.background, 8);
    CHECK(connected_components(mask).size() == 7);
    const auto parsed = parse_screenshot(frame, spec.calibration);
    CHECK(parsed.cells.size() == 5);
  }
}

TEST_CASE("parse errors") {
  const CalibrationProfile cal;
  const Frame blank(cal.screen_w_px, cal.screen_h_px, kDefaultBackground);
  CHECK(error_of([&] { parse_screenshot(blank, cal); }) == ErrorCode::NoCellsFound);
  CHECK(error_of([&] { parse_screenshot(Frame(640, 480), cal); }) == ErrorCode::CalibrationMismatch);
}

TEST_CASE("cells are ordered row-major regardless of label order") {
  const CalibrationProfile cal;
  Frame f(cal.screen_w_px, cal.screen_h_px, kDefaultBackground);
  // Right cell starts higher, so it is labelled first.
  fill_rect(f, {1000, 100, 320, 180}, Rgb{100, 100, 100});
  fill_rect(f, {100, 130, 320, 180}, Rgb{100, 120, 100});
  fill_rect(f, {500, 600, 320, 180}, Rgb{100, 140, 100});
  const auto map = parse_screenshot(f, cal);
  REQUIRE(map.cells.size() == 3);
  CHECK(map.cells[0].bbox_px.left == 100);
  CHECK(map.cells[1].bbox_px.left == 1000);
  CHECK(map.cells[2].bbox_px.left == 500);
  CHECK(map.cells[0].name == "cell-1");
}

TEST_CASE("generated layouts round trip with random names") {
  Rng rng(11);
  for (auto style : {LayoutStyle::FullscreenGrid, LayoutStyle::HorizontalStrip}) {
    for (int n = style == LayoutStyle::HorizontalStrip ? 3 : 2; n <= 8; ++n) {
      for (int seed = 0; seed < 3; ++seed) {
        auto spec = make_spec(style, n);
        spec.names = random_names(rng, n);
        spec.seed = static_cast<std::uint64_t>(seed);
        const auto [frame, truth] = generate_screenshot(spec);
        const auto parsed = parse_screenshot(frame, spec.calibration);
        REQUIRE(parsed.cells.size() == truth.cells.size());
        for (std::size_t i = 0; i < truth.cells.size(); ++i) {
          REQUIRE(parsed.cells[i].name == truth.cells[i].name);
          REQUIRE(parsed.cells[i].bbox_px == truth.cells[i].bbox_px);
        }
      }
    }
  }
}

TEST_CASE("labels") {
  auto spec = make_spec(LayoutStyle::FullscreenGrid, 4);
  const auto map = plan_layout(spec);
  const auto same = attach_labels(map, {"User1", "User2", "User3", "User4"});
  CHECK(same.cells[2].name == map.cells[2].name);
  CHECK(error_of([&] { attach_labels(map, {"a", "b", "c"}); }) == ErrorCode::LengthMismatch);

  test_support::TempDir dir;
  const std::vector<std::string> labels{"Ann Lee", "Bob", "C-3", "Dora"};
  write_labels(dir / "labels.txt", labels);
  CHECK(read_labels(dir / "labels.txt") == labels);
  const auto [frame, truth] = generate_screenshot(spec);
  ParseOptions o;
  o.labels = read_labels(dir / "labels.txt");
  const auto parsed = parse_screenshot(frame, spec.calibration, o);
  for (std::size_t i = 0; i < 4; ++i) CHECK(parsed.cells[i].name == labels[i]);
}

TEST_CASE("layout records round trip") {
  auto spec = make_spec(LayoutStyle::HorizontalStrip, 5);
  spec.names = {"A, with comma", "B", "C", "D", "E"};
  const auto map = plan_layout(spec);
  const auto text = format_layout_records(map);
  const auto back = parse_layout_records(text, spec.calibration);
  REQUIRE(back.cells.size() == 5);
  CHECK(back.cells[0].name == "A, with comma");
  CHECK(back.cells[3].bbox_px == map.cells[3].bbox_px);
  CHECK(back.cells[3].centroid_cm.x == doctest::Approx(map.cells[3].centroid_cm.x).epsilon(1e-6));
  CHECK(back.tau_cm == doctest::Approx(map.tau_cm).epsilon(1e-6));
  CHECK(format_layout_records(back) == text);

  CHECK(error_of([&] { parse_layout_records("# nothing\n", spec.calibration); }) == ErrorCode::EmptyLayout);
  CHECK(error_of([&] { parse_layout_records("1, 2, 3\n", spec.calibration); }) == ErrorCode::MalformedRow);
}

TEST_CASE("name region geometry") {
  const PixelRect cell{100, 200, 632, 355};
  const auto region = name_region(cell, {});
  CHECK(region.left == 100);
  CHECK(region.bottom() <= cell.bottom());
  CHECK(region.width == 379);
  CHECK(region.height == 36);
  CHECK(name_text_scale(region) == 4);
}
