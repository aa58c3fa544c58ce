#include "gaze/facedet.hpp"

#include <algorithm>
#include <cmath>

#include "gaze/error.hpp"
#include "gaze/kvfile.hpp"

namespace gaze {

BBoxFeatures bbox_features(const FaceBox& box, int frame_w, int frame_h, BBoxFeatureMode mode) {
  if (mode == BBoxFeatureMode::RawPixels) {
    return {static_cast<float>(box.x_b), static_cast<float>(box.y_b), static_cast<float>(box.w),
            static_cast<float>(box.h)};
  }
  const double fw = frame_w;
  const double fh = frame_h;
  return {static_cast<float>(box.x_b / fw), static_cast<float>(box.y_b / fh), static_cast<float>(box.w / fw),
          static_cast<float>(box.h / fh)};
}

Frame resize_bilinear(const Frame& src, int out_w, int out_h) {
  Frame out(out_w, out_h);
  const double sx_scale = static_cast<double>(src.width()) / out_w;
  const double sy_scale = static_cast<double>(src.height()) / out_h;
  const auto in = src.pixels();
  auto dst = out.pixels();
  const std::size_t stride = static_cast<std::size_t>(src.width()) * 3;
  for (int v = 0; v < out_h; ++v) {
    const double sy = std::clamp((v + 0.5) * sy_scale - 0.5, 0.0, static_cast<double>(src.height() - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double fy = sy - y0;
    for (int u = 0; u < out_w; ++u) {
      const double sx = std::clamp((u + 0.5) * sx_scale - 0.5, 0.0, static_cast<double>(src.width() - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double fx = sx - x0;
      const std::size_t o = (static_cast<std::size_t>(v) * out_w + u) * 3;
      for (int c = 0; c < 3; ++c) {
        const double p00 = in[y0 * stride + x0 * 3 + c];
        const double p01 = in[y0 * stride + x1 * 3 + c];
        const double p10 = in[y1 * stride + x0 * 3 + c];
        const double p11 = in[y1 * stride + x1 * 3 + c];
        const double top = p00 + (p01 - p00) * fx;
        const double bottom = p10 + (p11 - p10) * fx;
        dst[o + c] = static_cast<std::uint8_t>(std::lround(top + (bottom - top) * fy));
      }
    }
  }
  return out;
}

FaceCrop crop_face(const Frame& frame, const FaceBox& box, BBoxFeatureMode mode, int size) {
  if (!(box.w > 0.0) || !(box.h > 0.0)) throw Error(ErrorCode::NoIntersection, "empty face box");
  const int x0 = std::max(0, static_cast<int>(std::floor(box.x_b)));
  const int y0 = std::max(0, static_cast<int>(std::floor(box.y_b)));
  const int x1 = std::min(frame.width(), static_cast<int>(std::ceil(box.x_b + box.w)));
  const int y1 = std::min(frame.height(), static_cast<int>(std::ceil(box.y_b + box.h)));
  if (x1 <= x0 || y1 <= y0) throw Error(ErrorCode::NoIntersection, "face box lies outside the frame");

  Frame region(x1 - x0, y1 - y0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) region.set(x - x0, y - y0, frame.at(x, y));

  FaceCrop crop{resize_bilinear(region, size, size), bbox_features(box, frame.width(), frame.height(), mode)};
  return crop;
}

std::optional<FaceBox> select_primary(const std::vector<FaceBox>& boxes) {
  if (boxes.empty()) return std::nullopt;
  const FaceBox* best = &boxes.front();
  for (const auto& b : boxes) {
    if (b.confidence > best->confidence) best = &b;
  }
  return *best;
}

void sort_by_confidence(std::vector<FaceBox>& boxes) {
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const FaceBox& a, const FaceBox& b) { return a.confidence > b.confidence; });
}

std::vector<FaceBox> synthetic_detect(const Frame& frame, Rgb head_key_color) {
  int min_x = frame.width(), min_y = frame.height(), max_x = -1, max_y = -1;
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      if (frame.at(x, y) != head_key_color) continue;
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
    }
  }
  if (max_x < 0) return {};
  return {FaceBox{static_cast<double>(min_x), static_cast<double>(min_y), static_cast<double>(max_x - min_x + 1),
                  static_cast<double>(max_y - min_y + 1), 1.0}};
}

std::vector<FaceBox> SyntheticDetector::detect(const Frame& frame, std::string_view) const {
  return synthetic_detect(frame, key_);
}

SidecarDetections SidecarDetections::parse(std::string_view text) {
  SidecarDetections out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_fields(line);
    if (fields.size() != 6 || fields[0].empty()) {
      throw Error(ErrorCode::MalformedRow, "detection sidecar line " + std::to_string(line_no) + ": expected 6 fields, got " +
                                               std::to_string(fields.size()));
    }
    FaceBox box;
    try {
      box = {parse_double(fields[1]), parse_double(fields[2]), parse_double(fields[3]), parse_double(fields[4]),
             parse_double(fields[5])};
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedRow, "detection sidecar line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!(box.w >= 1.0) || !(box.h >= 1.0) || box.confidence < 0.0 || box.confidence > 1.0) {
      throw Error(ErrorCode::MalformedRow, "detection sidecar line " + std::to_string(line_no) + ": bad box values");
    }
    out.rows_[fields[0]].push_back(box);
  }
  for (auto& [id, boxes] : out.rows_) sort_by_confidence(boxes);
  return out;
}

SidecarDetections SidecarDetections::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

SidecarLookup SidecarDetections::lookup(std::string_view frame_id) const {
  const auto it = rows_.find(frame_id);
  if (it == rows_.end()) return {{}, true};
  return {it->second, false};
}

SidecarLookup sidecar_detect(std::string_view frame_id, const SidecarDetections& sidecar) {
  return sidecar.lookup(frame_id);
}

std::vector<FaceBox> SidecarDetector::detect(const Frame&, std::string_view frame_id) const {
  return detections_.lookup(frame_id).boxes;
}

}  // namespace gaze
