#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gaze/facedet.hpp"
#include "gaze/geometry.hpp"
#include "gaze/imaging.hpp"
#include "gaze/nn/tensor.hpp"

namespace gaze {

inline constexpr int kLocationColumns = 13;
inline constexpr int kLocationRows = 7;
inline constexpr int kLocationCount = kLocationColumns * kLocationRows;

/// 91 gaze targets on a 13 x 7 grid with half-step margins, in cm relative
/// to the camera. Index 1 is the top-left entry, row-major.
class LocationTable {
 public:
  explicit LocationTable(const CalibrationProfile& cal);

  GazePointCm at(int location_index) const;
  std::size_t size() const { return points_.size(); }
  const std::vector<GazePointCm>& points() const { return points_; }
  double column_pitch_cm() const { return pitch_x_; }
  double row_pitch_cm() const { return pitch_y_; }

 private:
  std::vector<GazePointCm> points_;
  double pitch_x_ = 0.0;
  double pitch_y_ = 0.0;
};

enum class Split { Train, Val, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct SampleRecord {
  std::uint64_t sample_id = 0;
  std::string path;  // relative to the manifest directory
  FaceBox bbox;
  GazePointCm gaze_cm;
  int location_index = 1;
  int subject_id = 0;
  Split split = Split::Train;
};

struct HeadState {
  double center_x = 320.0;
  double center_y = 240.0;
  double width = 230.0;  // ellipse width in px; height is 1.24 x width
};

struct RenderOptions {
  int frame_w = 640;
  int frame_h = 480;
  /// Pupil travel at full gaze span, as a fraction of the eye radius.
  double max_offset_x = 0.6;
  double max_offset_y = 0.5;
  double gaze_span_x_cm = 34.92;
  double gaze_span_y_cm = 39.28;
  /// Head-position dependent gaze bias at the frame edge.
  double bias_x_cm = 8.0;
  double bias_y_cm = 6.0;

  friend bool operator==(const RenderOptions&, const RenderOptions&) = default;
};

inline constexpr Rgb kSkinColor{200, 160, 130};
inline constexpr Rgb kEyeColor{245, 245, 245};
inline constexpr Rgb kPupilColor{20, 20, 20};
inline constexpr int kHeadRingPx = 3;

struct EyeGeometry {
  double radius = 0.0;
  double pupil_radius = 0.0;
  std::array<PixelCoord, 2> centers{};  // left, right
};

EyeGeometry eye_geometry(const HeadState& head);

/// Pupil displacement from the eye center in px.
PixelCoord pupil_offset(GazePointCm gaze, const HeadState& head, const RenderOptions& options = {});

struct RenderedSample {
  Frame frame;
  FaceBox bbox;
};

/// Throws HeadOutOfFrame when the head ellipse leaves the frame.
RenderedSample render_sample(GazePointCm gaze, const HeadState& head, std::uint64_t noise_seed,
                             const RenderOptions& options = {});

struct GenerateOptions {
  std::uint64_t seed = 0;
  int n_subjects = 5;
  int frames_per_location = 4;
  CalibrationProfile calibration;
  RenderOptions render;
  bool split_by_subject = false;
};

struct DatasetManifest {
  std::vector<SampleRecord> records;
  std::uint64_t seed = 0;
  bool split_by_subject = false;
  RenderOptions render;

  std::vector<const SampleRecord*> split(Split which) const;
};

/// Hash split with 80/15/5 train/val/test fractions.
Split split_for_key(std::uint64_t seed, std::uint64_t key);

/// Head pose for one frame of one subject. Each subject has its own mean
/// pose and size band.
HeadState sample_head_state(std::uint64_t seed, int subject_id, std::uint64_t sample_id);

/// Renders every subject x location x frame, writes `faces/NNNNNN.ppm`
/// crops and `manifest.csv` under out_dir.
DatasetManifest generate(const GenerateOptions& options, const std::filesystem::path& out_dir);

/// Records only, without rendering or touching the filesystem.
DatasetManifest plan_dataset(const GenerateOptions& options);

std::string format_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view text);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Decoded crops of one manifest held in memory.
class SampleStore {
 public:
  static SampleStore load(const DatasetManifest& manifest, const std::filesystem::path& root,
                          BBoxFeatureMode mode = BBoxFeatureMode::Normalized, int frame_w = 640, int frame_h = 480);

  SampleStore() = default;
  void add(const SampleRecord& record, const Frame& crop, const BBoxFeatures& features);

  std::size_t size() const { return records_.size(); }
  int crop_size() const { return crop_size_; }
  const SampleRecord& record(std::size_t i) const { return records_[i]; }
  const BBoxFeatures& features(std::size_t i) const { return features_[i]; }
  /// Indices of the records in a split, in manifest order.
  std::vector<std::size_t> indices(Split which) const;

  /// Faces [B,3,S,S] scaled to [0,1], bboxes [B,4], gaze [B,2].
  struct Batch {
    nn::Tensor<float> faces;
    nn::Tensor<float> bboxes;
    nn::Tensor<float> gaze;
  };
  Batch assemble(const std::vector<std::size_t>& rows) const;

 private:
  int crop_size_ = 0;
  std::vector<SampleRecord> records_;
  std::vector<BBoxFeatures> features_;
  std::vector<std::uint8_t> pixels_;  // planar CHW per sample
};

/// Fills faces[b] (CHW, [0,1]) from an interleaved crop.
void write_face_tensor(const Frame& crop, float* dst);

/// Epoch order over a split: shuffled by derive_seed(seed, epoch), final
/// partial batch kept. Throws EmptySplit.
std::vector<std::vector<std::size_t>> batch_indices(const SampleStore& store, Split which, std::size_t batch_size,
                                                    std::optional<std::uint64_t> shuffle_seed, std::uint64_t epoch = 0);

}  // namespace gaze
