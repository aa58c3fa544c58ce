#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gaze/imaging.hpp"

namespace gaze {

/// Face bounding box in source-frame pixels.
struct FaceBox {
  double x_b = 0.0;
  double y_b = 0.0;
  double w = 0.0;
  double h = 0.0;
  double confidence = 1.0;

  friend bool operator==(const FaceBox&, const FaceBox&) = default;
};

inline constexpr int kFaceCropSize = 227;
inline constexpr Rgb kHeadKeyColor{255, 0, 255};

enum class BBoxFeatureMode {
  Normalized,  // (x_b/W, y_b/H, w/W, h/H)
  RawPixels,   // (x_b, y_b, w, h)
};

using BBoxFeatures = std::array<float, 4>;

struct FaceCrop {
  Frame image;
  BBoxFeatures bbox_features{};
};

BBoxFeatures bbox_features(const FaceBox& box, int frame_w, int frame_h, BBoxFeatureMode mode);

/// Crops `box` clamped to the frame and resizes it to size x size with
/// bilinear filtering (half-pixel centers). Features use the unclamped box.
FaceCrop crop_face(const Frame& frame, const FaceBox& box, BBoxFeatureMode mode = BBoxFeatureMode::Normalized,
                   int size = kFaceCropSize);

Frame resize_bilinear(const Frame& src, int out_w, int out_h);

/// Highest confidence, first in list order on ties.
std::optional<FaceBox> select_primary(const std::vector<FaceBox>& boxes);

/// Stable sort by confidence, descending.
void sort_by_confidence(std::vector<FaceBox>& boxes);

class FaceDetector {
 public:
  virtual ~FaceDetector() = default;
  /// Boxes in source-frame pixels sorted by confidence, descending.
  virtual std::vector<FaceBox> detect(const Frame& frame, std::string_view frame_id) const = 0;
};

/// Tight box around pixels of the reserved head key color, confidence 1.
std::vector<FaceBox> synthetic_detect(const Frame& frame, Rgb head_key_color = kHeadKeyColor);

class SyntheticDetector final : public FaceDetector {
 public:
  explicit SyntheticDetector(Rgb key = kHeadKeyColor) : key_(key) {}
  std::vector<FaceBox> detect(const Frame& frame, std::string_view frame_id) const override;

 private:
  Rgb key_;
};

struct SidecarLookup {
  std::vector<FaceBox> boxes;
  bool missing_frame_id = false;
};

/// Offline detections: `frame_id, x_b, y_b, w, h, confidence` rows, `#` comments.
class SidecarDetections {
 public:
  static SidecarDetections parse(std::string_view text);
  static SidecarDetections load(const std::filesystem::path& path);

  SidecarLookup lookup(std::string_view frame_id) const;
  std::size_t frame_count() const { return rows_.size(); }

 private:
  std::map<std::string, std::vector<FaceBox>, std::less<>> rows_;
};

SidecarLookup sidecar_detect(std::string_view frame_id, const SidecarDetections& sidecar);

class SidecarDetector final : public FaceDetector {
 public:
  explicit SidecarDetector(SidecarDetections detections) : detections_(std::move(detections)) {}
  std::vector<FaceBox> detect(const Frame& frame, std::string_view frame_id) const override;

 private:
  SidecarDetections detections_;
};

}  // namespace gaze
