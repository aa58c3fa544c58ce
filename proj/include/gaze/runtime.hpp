#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "gaze/facedet.hpp"
#include "gaze/geometry.hpp"
#include "gaze/imaging.hpp"
#include "gaze/layout.hpp"
#include "gaze/nn/gazenet.hpp"

namespace gaze {

/// Label shown when there is no target.
inline constexpr std::string_view kNoTargetLabel = "—";

/// Mode of the last `window` raw assignments; ties go to the most recent of
/// the tied values. Targetless is a value like any cell.
class Smoother {
 public:
  explicit Smoother(std::size_t window = 5);

  /// Returns the displayed cell index, or nullopt for targetless.
  std::optional<std::size_t> push(const AssignmentResult& raw);
  void reset() { history_.clear(); }
  std::size_t window() const { return window_; }

 private:
  std::size_t window_;
  std::deque<std::optional<std::size_t>> history_;
};

struct OverlayStyle {
  /// Top-left of the label; nullopt = horizontally centered, 8 px from the top.
  std::optional<PixelPoint> origin;
  int scale = 3;
  Rgb color{255, 255, 255};
  Rgb backing{0, 0, 0};
};

/// Replaces characters the font cannot draw with '-'.
std::string drawable_label(std::string_view label);

void draw_overlay(Frame& frame, std::string_view label, const OverlayStyle& style);

struct LayoutFromScreenshot {
  std::filesystem::path path;
  ParseOptions options;
};
struct LayoutFromRecords {
  std::filesystem::path path;
};
struct LayoutFromSpec {
  LayoutSpec spec;
};
using LayoutSource = std::variant<LayoutFromScreenshot, LayoutFromRecords, LayoutFromSpec>;

LayoutMap resolve_layout(const LayoutSource& source, const CalibrationProfile& cal);

struct PipelineConfig {
  CalibrationProfile calibration;
  LayoutMap layout;
  std::optional<double> tau_override_cm;
  std::size_t smoothing_window = 5;
  OverlayStyle overlay;
  nn::GazeNetConfig net;
};

struct FrameResult {
  std::string frame_id;
  bool face_found = false;
  std::optional<GazePointCm> gaze_cm;
  AssignmentResult assignment;  // raw, before smoothing
  std::optional<std::size_t> displayed_index;
  std::string displayed_label;
  Frame annotated{1, 1};
};

/// detect -> primary face -> crop -> regress -> assign -> smooth -> overlay.
class GazePipeline {
 public:
  GazePipeline(PipelineConfig config, nn::GazeNetParams<float> params, std::shared_ptr<const FaceDetector> detector);

  FrameResult process(const Frame& frame, std::string_view frame_id);

  /// Gaze for a single face crop, without smoothing.
  GazePointCm regress(const FaceCrop& crop) const;

  const PipelineConfig& config() const { return config_; }
  double tau_cm() const { return tau_; }
  void reset() { smoother_.reset(); }

 private:
  PipelineConfig config_;
  nn::GazeNetParams<float> params_;
  std::shared_ptr<const FaceDetector> detector_;
  std::vector<GazePointCm> centroids_;
  double tau_;
  Smoother smoother_;
};

/// Writes `frame_000001.ppm`, `frame_000002.ppm`, ... into a directory.
class FrameSequenceWriter {
 public:
  /// With append, numbering continues after the highest existing frame.
  /// Throws NonWritable when the directory cannot be created.
  FrameSequenceWriter(std::filesystem::path dir, bool append = false);

  /// Throws DiskFull or NonWritable.
  std::filesystem::path write(const Frame& frame);
  std::uint64_t next_index() const { return next_; }

  static std::string file_name(std::uint64_t index);

 private:
  std::filesystem::path dir_;
  std::uint64_t next_ = 1;
};

/// Newest encoded frame, replaced atomically. Readers never see a queue.
class LatestFrameSlot {
 public:
  struct Snapshot {
    std::shared_ptr<const std::string> ppm;
    std::uint64_t sequence = 0;  // 0 = nothing published yet
  };

  void publish(const Frame& frame);
  void publish_encoded(std::string ppm);
  Snapshot latest() const;
  /// Blocks until a frame newer than `after` exists, `timeout` passes, or
  /// close() is called.
  Snapshot wait_newer(std::uint64_t after, std::chrono::milliseconds timeout) const;
  void close();
  bool closed() const;

 private:
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::shared_ptr<const std::string> ppm_;
  std::uint64_t sequence_ = 0;
  bool closed_ = false;
};

inline constexpr std::string_view kStreamBoundary = "gazeframe";

/// HTTP server over a LatestFrameSlot: /healthz, /frame and /stream.
class StreamServer {
 public:
  explicit StreamServer(std::shared_ptr<LatestFrameSlot> slot);
  ~StreamServer();
  StreamServer(const StreamServer&) = delete;
  StreamServer& operator=(const StreamServer&) = delete;

  /// Port 0 picks a free port. Throws BindFailure.
  void start(const std::string& host, int port);
  void stop();
  int bound_port() const { return port_; }
  bool running() const;

 private:
  struct Impl;
  std::shared_ptr<LatestFrameSlot> slot_;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
};

/// Splits "host:port" (host may be empty for all interfaces).
std::pair<std::string, int> parse_bind_address(std::string_view address);

}  // namespace gaze
