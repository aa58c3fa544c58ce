#include "gaze/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gaze/error.hpp"
#include "gaze/kvfile.hpp"
#include "gaze/rng.hpp"

namespace gaze {

LocationTable::LocationTable(const CalibrationProfile& cal) {
  cal.validate();
  pitch_x_ = cal.screen_w_cm / kLocationColumns;
  pitch_y_ = cal.screen_h_cm / kLocationRows;
  const double cam_x = cal.camera_px_x * cal.cm_per_px_x();
  const double cam_y = cal.camera_px_y * cal.cm_per_px_y();
  points_.reserve(kLocationCount);
  for (int row = 0; row < kLocationRows; ++row) {
    for (int col = 0; col < kLocationColumns; ++col) {
      points_.push_back({(col + 0.5) * pitch_x_ - cam_x, (row + 0.5) * pitch_y_ - cam_y});
    }
  }
}

GazePointCm LocationTable::at(int location_index) const {
  if (location_index < 1 || location_index > static_cast<int>(points_.size())) {
    throw Error(ErrorCode::InvalidArgument, "location index out of range: " + std::to_string(location_index));
  }
  return points_[static_cast<std::size_t>(location_index - 1)];
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  throw Error(ErrorCode::MalformedRow, "unknown split `" + std::string(text) + "`");
}

EyeGeometry eye_geometry(const HeadState& head) {
  EyeGeometry eyes;
  eyes.radius = 0.19 * head.width;
  eyes.pupil_radius = 0.35 * eyes.radius;
  const double ey = head.center_y - 0.12 * head.width;
  eyes.centers = {PixelCoord{head.center_x - 0.24 * head.width, ey}, PixelCoord{head.center_x + 0.24 * head.width, ey}};
  return eyes;
}

PixelCoord pupil_offset(GazePointCm gaze, const HeadState& head, const RenderOptions& o) {
  const double re = eye_geometry(head).radius;
  const double half_w = o.frame_w / 2.0;
  const double half_h = o.frame_h / 2.0;
  const double bias_x = o.bias_x_cm * (head.center_x - half_w) / half_w;
  const double bias_y = o.bias_y_cm * (head.center_y - half_h) / half_h;
  return {o.max_offset_x * re * (gaze.x - bias_x) / o.gaze_span_x_cm,
          o.max_offset_y * re * (gaze.y - bias_y) / o.gaze_span_y_cm};
}

namespace {

double ellipse_value(double x, double y, double cx, double cy, double a, double b) {
  const double dx = (x - cx) / a;
  const double dy = (y - cy) / b;
  return dx * dx + dy * dy;
}

void fill_disk(Frame& frame, PixelCoord c, double r, Rgb color) {
  const int x0 = std::max(0, static_cast<int>(std::floor(c.x - r)));
  const int x1 = std::min(frame.width() - 1, static_cast<int>(std::ceil(c.x + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(c.y - r)));
  const int y1 = std::min(frame.height() - 1, static_cast<int>(std::ceil(c.y + r)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - c.x;
      const double dy = y - c.y;
      if (dx * dx + dy * dy <= r * r) frame.set(x, y, color);
    }
  }
}

}  // namespace

RenderedSample render_sample(GazePointCm gaze, const HeadState& head, std::uint64_t noise_seed,
                             const RenderOptions& o) {
  const double a = head.width / 2.0;
  const double b = 0.62 * head.width;
  if (!(head.width > 4 * kHeadRingPx) || head.center_x - a < 0 || head.center_y - b < 0 ||
      head.center_x + a > o.frame_w - 1 || head.center_y + b > o.frame_h - 1) {
    throw Error(ErrorCode::HeadOutOfFrame, "head ellipse does not fit in the frame");
  }

  Frame frame(o.frame_w, o.frame_h);
  Rng rng(noise_seed);
  auto px = frame.pixels();
  for (std::size_t i = 0; i < px.size(); i += 3) {
    const auto g = static_cast<std::uint8_t>(40 + rng.index(80));
    px[i] = px[i + 1] = px[i + 2] = g;
  }

  const int x0 = static_cast<int>(std::floor(head.center_x - a));
  const int x1 = static_cast<int>(std::ceil(head.center_x + a));
  const int y0 = static_cast<int>(std::floor(head.center_y - b));
  const int y1 = static_cast<int>(std::ceil(head.center_y + b));
  const double ia = a - kHeadRingPx;
  const double ib = b - kHeadRingPx;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (ellipse_value(x, y, head.center_x, head.center_y, a, b) > 1.0) continue;
      const bool ring = ellipse_value(x, y, head.center_x, head.center_y, ia, ib) > 1.0;
      frame.set(x, y, ring ? kHeadKeyColor : kSkinColor);
    }
  }

  const auto eyes = eye_geometry(head);
  const auto off = pupil_offset(gaze, head, o);
  for (const auto& c : eyes.centers) {
    fill_disk(frame, c, eyes.radius, kEyeColor);
    fill_disk(frame, {c.x + off.x, c.y + off.y}, eyes.pupil_radius, kPupilColor);
  }

  const auto boxes = synthetic_detect(frame);
  if (boxes.empty()) throw Error(ErrorCode::HeadOutOfFrame, "head ring not visible");
  return {std::move(frame), boxes.front()};
}

Split split_for_key(std::uint64_t seed, std::uint64_t key) {
  const double u = static_cast<double>(derive_seed(seed ^ 0x73706c6974ULL, key) >> 11) * 0x1.0p-53;
  if (u < 0.80) return Split::Train;
  if (u < 0.95) return Split::Val;
  return Split::Test;
}

HeadState sample_head_state(std::uint64_t seed, int subject_id, std::uint64_t sample_id) {
  Rng subject(derive_seed(seed, 0x10000 + static_cast<std::uint64_t>(subject_id)));
  const double mean_x = subject.uniform(290.0, 350.0);
  const double mean_y = subject.uniform(225.0, 255.0);
  const double min_w = subject.uniform(200.0, 220.0);

  Rng frame(derive_seed(derive_seed(seed, 0x20000 + static_cast<std::uint64_t>(subject_id)), sample_id));
  HeadState head;
  head.width = frame.uniform(min_w, min_w + 40.0);
  head.center_x = mean_x + frame.uniform(-120.0, 120.0);
  head.center_y = mean_y + frame.uniform(-55.0, 55.0);
  return head;
}

std::vector<const SampleRecord*> DatasetManifest::split(Split which) const {
  std::vector<const SampleRecord*> out;
  for (const auto& r : records) {
    if (r.split == which) out.push_back(&r);
  }
  return out;
}

namespace {

std::string face_path(std::uint64_t sample_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "faces/%06llu.ppm", static_cast<unsigned long long>(sample_id));
  return buf;
}

void check_generate_options(const GenerateOptions& o) {
  if (o.n_subjects < 1 || o.frames_per_location < 1) {
    throw Error(ErrorCode::InvalidArgument, "n_subjects and frames_per_location must be positive");
  }
  o.calibration.validate();
}

}  // namespace

DatasetManifest plan_dataset(const GenerateOptions& o) {
  check_generate_options(o);
  const LocationTable table(o.calibration);
  DatasetManifest manifest;
  manifest.seed = o.seed;
  manifest.split_by_subject = o.split_by_subject;
  manifest.render = o.render;
  std::uint64_t id = 0;
  for (int s = 0; s < o.n_subjects; ++s) {
    for (int loc = 1; loc <= kLocationCount; ++loc) {
      for (int f = 0; f < o.frames_per_location; ++f, ++id) {
        SampleRecord r;
        r.sample_id = id;
        r.path = face_path(id);
        r.gaze_cm = table.at(loc);
        r.location_index = loc;
        r.subject_id = s;
        r.split = o.split_by_subject ? split_for_key(o.seed, static_cast<std::uint64_t>(s)) : split_for_key(o.seed, id);
        manifest.records.push_back(std::move(r));
      }
    }
  }
  return manifest;
}

DatasetManifest generate(const GenerateOptions& o, const std::filesystem::path& out_dir) {
  auto manifest = plan_dataset(o);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "faces", ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + (out_dir / "faces").string() + ": " + ec.message());
  for (auto& r : manifest.records) {
    const auto head = sample_head_state(o.seed, r.subject_id, r.sample_id);
    const auto sample = render_sample(r.gaze_cm, head, derive_seed(o.seed, r.sample_id), o.render);
    r.bbox = sample.bbox;
    const auto crop = crop_face(sample.frame, sample.bbox);
    save_ppm(crop.image, out_dir / r.path);
  }
  write_text_file(out_dir / "manifest.csv", format_manifest(manifest));
  return manifest;
}

std::string format_manifest(const DatasetManifest& m) {
  std::ostringstream out;
  out << "# seed = " << m.seed << "\n";
  out << "# split_by_subject = " << (m.split_by_subject ? 1 : 0) << "\n";
  out << "# frame_w = " << m.render.frame_w << "\n";
  out << "# frame_h = " << m.render.frame_h << "\n";
  out << "# max_offset_x = " << format_exact(m.render.max_offset_x) << "\n";
  out << "# max_offset_y = " << format_exact(m.render.max_offset_y) << "\n";
  out << "# gaze_span_x_cm = " << format_exact(m.render.gaze_span_x_cm) << "\n";
  out << "# gaze_span_y_cm = " << format_exact(m.render.gaze_span_y_cm) << "\n";
  out << "# bias_x_cm = " << format_exact(m.render.bias_x_cm) << "\n";
  out << "# bias_y_cm = " << format_exact(m.render.bias_y_cm) << "\n";
  out << "# sample_id, path, x_b, y_b, w, h, gaze_x_cm, gaze_y_cm, location_index, subject_id, split\n";
  for (const auto& r : m.records) {
    out << r.sample_id << ", " << r.path << ", " << format_exact(r.bbox.x_b) << ", " << format_exact(r.bbox.y_b) << ", "
        << format_exact(r.bbox.w) << ", " << format_exact(r.bbox.h) << ", " << format_exact(r.gaze_cm.x) << ", "
        << format_exact(r.gaze_cm.y) << ", " << r.location_index << ", " << r.subject_id << ", " << to_string(r.split)
        << "\n";
  }
  return out.str();
}

DatasetManifest parse_manifest(std::string_view text) {
  DatasetManifest m;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const auto body = trim(t.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = trim(body.substr(0, eq));
      const auto value = trim(body.substr(eq + 1));
      if (key == "seed") m.seed = static_cast<std::uint64_t>(std::stoull(std::string(value)));
      else if (key == "split_by_subject") m.split_by_subject = parse_integer(value) != 0;
      else if (key == "frame_w") m.render.frame_w = static_cast<int>(parse_integer(value));
      else if (key == "frame_h") m.render.frame_h = static_cast<int>(parse_integer(value));
      else if (key == "max_offset_x") m.render.max_offset_x = parse_double(value);
      else if (key == "max_offset_y") m.render.max_offset_y = parse_double(value);
      else if (key == "gaze_span_x_cm") m.render.gaze_span_x_cm = parse_double(value);
      else if (key == "gaze_span_y_cm") m.render.gaze_span_y_cm = parse_double(value);
      else if (key == "bias_x_cm") m.render.bias_x_cm = parse_double(value);
      else if (key == "bias_y_cm") m.render.bias_y_cm = parse_double(value);
      continue;
    }
    const auto f = split_fields(t);
    if (f.size() != 11) {
      throw Error(ErrorCode::MalformedRow, "manifest line " + std::to_string(line_no) + ": expected 11 fields");
    }
    try {
      SampleRecord r;
      r.sample_id = static_cast<std::uint64_t>(parse_integer(f[0]));
      r.path = f[1];
      r.bbox = {parse_double(f[2]), parse_double(f[3]), parse_double(f[4]), parse_double(f[5]), 1.0};
      r.gaze_cm = {parse_double(f[6]), parse_double(f[7])};
      r.location_index = static_cast<int>(parse_integer(f[8]));
      r.subject_id = static_cast<int>(parse_integer(f[9]));
      r.split = parse_split(f[10]);
      m.records.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedRow, "manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) { return parse_manifest(read_text_file(path)); }

void write_face_tensor(const Frame& crop, float* dst) {
  const std::size_t plane = static_cast<std::size_t>(crop.width()) * crop.height();
  const auto px = crop.pixels();
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) dst[c * plane + i] = px[i * 3 + c] / 255.0f;
  }
}

void SampleStore::add(const SampleRecord& record, const Frame& crop, const BBoxFeatures& features) {
  if (crop.width() != crop.height()) throw Error(ErrorCode::ShapeMismatch, "face crops must be square");
  if (records_.empty()) crop_size_ = crop.width();
  if (crop.width() != crop_size_) throw Error(ErrorCode::ShapeMismatch, "face crops differ in size");
  records_.push_back(record);
  features_.push_back(features);
  const std::size_t plane = static_cast<std::size_t>(crop_size_) * crop_size_;
  const auto px = crop.pixels();
  const std::size_t base = pixels_.size();
  pixels_.resize(base + plane * 3);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) pixels_[base + c * plane + i] = px[i * 3 + c];
  }
}

SampleStore SampleStore::load(const DatasetManifest& manifest, const std::filesystem::path& root,
                              BBoxFeatureMode mode, int frame_w, int frame_h) {
  SampleStore store;
  for (const auto& r : manifest.records) {
    store.add(r, load_ppm(root / r.path), bbox_features(r.bbox, frame_w, frame_h, mode));
  }
  return store;
}

std::vector<std::size_t> SampleStore::indices(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].split == which) out.push_back(i);
  }
  return out;
}

SampleStore::Batch SampleStore::assemble(const std::vector<std::size_t>& rows) const {
  const std::size_t s = static_cast<std::size_t>(crop_size_);
  const std::size_t n = rows.size();
  const std::size_t per = 3 * s * s;
  Batch batch{nn::Tensor<float>({n, 3, s, s}), nn::Tensor<float>({n, 4}), nn::Tensor<float>({n, 2})};
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t i = rows[b];
    const std::uint8_t* src = pixels_.data() + i * per;
    float* dst = batch.faces.data() + b * per;
    for (std::size_t k = 0; k < per; ++k) dst[k] = src[k] / 255.0f;
    for (std::size_t k = 0; k < 4; ++k) batch.bboxes[b * 4 + k] = features_[i][k];
    batch.gaze[b * 2] = static_cast<float>(records_[i].gaze_cm.x);
    batch.gaze[b * 2 + 1] = static_cast<float>(records_[i].gaze_cm.y);
  }
  return batch;
}

std::vector<std::vector<std::size_t>> batch_indices(const SampleStore& store, Split which, std::size_t batch_size,
                                                    std::optional<std::uint64_t> shuffle_seed, std::uint64_t epoch) {
  if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
  auto order = store.indices(which);
  if (order.empty()) throw Error(ErrorCode::EmptySplit, std::string(to_string(which)) + " split is empty");
  if (shuffle_seed) {
    Rng rng(derive_seed(*shuffle_seed, epoch));
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  return out;
}

}  // namespace gaze
