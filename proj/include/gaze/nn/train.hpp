#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gaze/dataset.hpp"
#include "gaze/geometry.hpp"
#include "gaze/nn/adam.hpp"
#include "gaze/nn/gazenet.hpp"

namespace gaze::nn {

struct TrainOptions {
  int epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  AdamOptions adam;
  /// Return the parameters of the epoch with the lowest validation loss
  /// instead of the last epoch.
  bool keep_best_val = true;
};

struct EpochLog {
  int epoch = 0;  // 0 = before any update
  double train_loss = 0.0;
  double val_loss = 0.0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainResult {
  GazeNetParams<float> params;
  std::vector<EpochLog> log;
  int selected_epoch = 0;
  std::uint64_t steps = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Throws EmptyDataset when the train split is empty.
TrainResult train(const SampleStore& store, const GazeNetConfig& config, const TrainOptions& options,
                  const EpochCallback& on_epoch = {});

/// Mean squared error over a split; NaN when the split is empty.
double evaluate_loss(const GazeNetParams<float>& params, const GazeNetConfig& config, const SampleStore& store,
                     Split which, std::size_t batch_size = 64);

std::vector<GazePointCm> predict(const GazeNetParams<float>& params, const GazeNetConfig& config,
                                 const SampleStore& store, const std::vector<std::size_t>& rows,
                                 std::size_t batch_size = 64);

/// `epoch, train_loss, val_loss` lines.
std::string format_loss_log(const std::vector<EpochLog>& log);

}  // namespace gaze::nn
