#include "gaze/runtime.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <map>

#include "gaze/dataset.hpp"
#include "gaze/error.hpp"
#include "gaze/kvfile.hpp"

namespace gaze {

Smoother::Smoother(std::size_t window) : window_(window) {
  if (window_ == 0) throw Error(ErrorCode::InvalidArgument, "smoothing window must be >= 1");
}

std::optional<std::size_t> Smoother::push(const AssignmentResult& raw) {
  history_.push_back(raw.is_target() ? std::optional<std::size_t>(raw.index) : std::nullopt);
  if (history_.size() > window_) history_.pop_front();

  // value -> (count, position of latest occurrence)
  std::map<std::optional<std::size_t>, std::pair<std::size_t, std::size_t>> tally;
  for (std::size_t i = 0; i < history_.size(); ++i) {
    auto& t = tally[history_[i]];
    ++t.first;
    t.second = i;
  }
  auto best = tally.begin();
  for (auto it = tally.begin(); it != tally.end(); ++it) {
    if (it->second.first > best->second.first ||
        (it->second.first == best->second.first && it->second.second > best->second.second)) {
      best = it;
    }
  }
  return best->first;
}

std::string drawable_label(std::string_view label) {
  std::string out;
  for (std::size_t i = 0; i < label.size();) {
    const auto c = static_cast<unsigned char>(label[i]);
    std::size_t len = 1;
    if (c >= 0xf0) len = 4;
    else if (c >= 0xe0) len = 3;
    else if (c >= 0xc0) len = 2;
    const char ch = label[i];
    out.push_back(len == 1 && glyph_bits(ch) ? ch : '-');
    i += len;
  }
  return out;
}

void draw_overlay(Frame& frame, std::string_view label, const OverlayStyle& style) {
  const auto text = drawable_label(label);
  if (text.empty()) return;
  const int w = text_width(text, style.scale);
  const int h = text_height(style.scale);
  const PixelPoint origin = style.origin.value_or(PixelPoint{(frame.width() - w) / 2, 8});
  const int pad = style.scale;
  fill_rect(frame, intersect({origin.x - pad, origin.y - pad, w + 2 * pad, h + 2 * pad}, frame.bounds()), style.backing);
  draw_text_into(frame, text, origin, style.scale, style.color);
}

LayoutMap resolve_layout(const LayoutSource& source, const CalibrationProfile& cal) {
  if (const auto* s = std::get_if<LayoutFromScreenshot>(&source)) {
    return parse_screenshot(load_ppm(s->path), cal, s->options);
  }
  if (const auto* r = std::get_if<LayoutFromRecords>(&source)) {
    return load_layout_records(r->path, cal);
  }
  auto spec = std::get<LayoutFromSpec>(source).spec;
  spec.calibration = cal;
  return plan_layout(spec);
}

GazePipeline::GazePipeline(PipelineConfig config, nn::GazeNetParams<float> params,
                           std::shared_ptr<const FaceDetector> detector)
    : config_(std::move(config)),
      params_(std::move(params)),
      detector_(std::move(detector)),
      centroids_(config_.layout.centroids()),
      tau_(config_.tau_override_cm.value_or(config_.layout.tau_cm)),
      smoother_(config_.smoothing_window) {
  nn::check_params(params_, config_.net);
  if (!detector_) throw Error(ErrorCode::InvalidArgument, "pipeline needs a face detector");
  if (!(tau_ >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be >= 0");
}

GazePointCm GazePipeline::regress(const FaceCrop& crop) const {
  const auto s = static_cast<std::size_t>(config_.net.input_size);
  nn::Tensor<float> faces({1, 3, s, s});
  write_face_tensor(crop.image, faces.data());
  nn::Tensor<float> bboxes({1, 4}, std::vector<float>(crop.bbox_features.begin(), crop.bbox_features.end()));
  const auto out = nn::forward_gazenet(params_, config_.net, faces, bboxes);
  return {out[0], out[1]};
}

FrameResult GazePipeline::process(const Frame& frame, std::string_view frame_id) {
  FrameResult result;
  result.frame_id = std::string(frame_id);
  const auto primary = select_primary(detector_->detect(frame, frame_id));
  if (primary) {
    try {
      const auto crop = crop_face(frame, *primary, config_.net.bbox_mode, config_.net.input_size);
      result.gaze_cm = regress(crop);
      result.face_found = true;
      result.assignment = assign_target(*result.gaze_cm, centroids_, tau_);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoIntersection) throw;
    }
  }
  result.displayed_index = smoother_.push(result.assignment);
  result.displayed_label = result.displayed_index ? config_.layout.cells[*result.displayed_index].name
                                                  : std::string(kNoTargetLabel);
  result.annotated = frame;
  draw_overlay(result.annotated, result.displayed_label, config_.overlay);
  return result;
}

// ---------------------------------------------------------------------------

namespace {

std::optional<std::uint64_t> frame_number(const std::filesystem::path& p) {
  const auto name = p.filename().string();
  constexpr std::string_view prefix = "frame_";
  constexpr std::string_view suffix = ".ppm";
  if (name.size() < prefix.size() + 6 + suffix.size() || name.compare(0, prefix.size(), prefix) != 0 ||
      name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
    return std::nullopt;
  }
  const auto digits = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
  if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) return std::nullopt;
  return std::stoull(digits);
}

}  // namespace

FrameSequenceWriter::FrameSequenceWriter(std::filesystem::path dir, bool append) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec || !std::filesystem::is_directory(dir_)) {
    throw Error(ErrorCode::NonWritable, "cannot create output directory " + dir_.string());
  }
  std::uint64_t highest = 0;
  std::vector<std::filesystem::path> existing;
  for (const auto& entry : std::filesystem::directory_iterator(dir_, ec)) {
    if (const auto n = frame_number(entry.path())) {
      highest = std::max(highest, *n);
      existing.push_back(entry.path());
    }
  }
  if (append) {
    next_ = highest + 1;
  } else {
    for (const auto& p : existing) std::filesystem::remove(p, ec);
  }
}

std::string FrameSequenceWriter::file_name(std::uint64_t index) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "frame_%06llu.ppm", static_cast<unsigned long long>(index));
  return buf;
}

std::filesystem::path FrameSequenceWriter::write(const Frame& frame) {
  const auto path = dir_ / file_name(next_);
  const auto bytes = encode_ppm(frame);
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error(ErrorCode::NonWritable, "cannot open " + path.string() + ": " + std::strerror(errno));
  const bool wrote = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size();
  int err = wrote ? 0 : errno;
  if (std::fclose(f) != 0 && err == 0) err = errno ? errno : EIO;
  if (!wrote || err != 0) {
    std::error_code ec;
    std::filesystem::remove(path, ec);
    if (err == ENOSPC || err == EDQUOT) throw Error(ErrorCode::DiskFull, "no space left writing " + path.string());
    throw Error(ErrorCode::NonWritable, "write failed for " + path.string() + ": " + std::strerror(err));
  }
  ++next_;
  return path;
}

// ---------------------------------------------------------------------------

void LatestFrameSlot::publish(const Frame& frame) { publish_encoded(encode_ppm(frame)); }

void LatestFrameSlot::publish_encoded(std::string ppm) {
  auto shared = std::make_shared<const std::string>(std::move(ppm));
  {
    std::lock_guard lock(mutex_);
    ppm_ = std::move(shared);
    ++sequence_;
  }
  cv_.notify_all();
}

LatestFrameSlot::Snapshot LatestFrameSlot::latest() const {
  std::lock_guard lock(mutex_);
  return {ppm_, sequence_};
}

LatestFrameSlot::Snapshot LatestFrameSlot::wait_newer(std::uint64_t after, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return sequence_ > after || closed_; });
  return {ppm_, sequence_};
}

void LatestFrameSlot::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool LatestFrameSlot::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::pair<std::string, int> parse_bind_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::InvalidArgument, "bind address must be host:port, got `" + std::string(address) + "`");
  }
  std::string host(address.substr(0, colon));
  if (host.empty()) host = "0.0.0.0";
  long long port = 0;
  try {
    port = parse_integer(address.substr(colon + 1));
  } catch (const Error&) {
    throw Error(ErrorCode::InvalidArgument, "bad port in `" + std::string(address) + "`");
  }
  if (port < 0 || port > 65535) throw Error(ErrorCode::InvalidArgument, "port out of range");
  return {host, static_cast<int>(port)};
}

}  // namespace gaze
