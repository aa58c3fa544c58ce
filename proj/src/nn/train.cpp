#include "gaze/nn/train.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "gaze/kvfile.hpp"
#include "gaze/rng.hpp"

namespace gaze::nn {

namespace {

double loss_over(const GazeNetParams<float>& params, const GazeNetConfig& config, const SampleStore& store,
                 const std::vector<std::size_t>& rows, std::size_t batch_size) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (std::size_t i = 0; i < rows.size(); i += batch_size) {
    const std::vector<std::size_t> chunk(rows.begin() + static_cast<std::ptrdiff_t>(i),
                                         rows.begin() + static_cast<std::ptrdiff_t>(std::min(rows.size(), i + batch_size)));
    const auto batch = store.assemble(chunk);
    const auto pred = forward_gazenet(params, config, batch.faces, batch.bboxes);
    sum += static_cast<double>(mse_loss(pred, batch.gaze).loss) * static_cast<double>(chunk.size());
  }
  return sum / static_cast<double>(rows.size());
}

}  // namespace

double evaluate_loss(const GazeNetParams<float>& params, const GazeNetConfig& config, const SampleStore& store,
                     Split which, std::size_t batch_size) {
  return loss_over(params, config, store, store.indices(which), batch_size);
}

std::vector<GazePointCm> predict(const GazeNetParams<float>& params, const GazeNetConfig& config,
                                 const SampleStore& store, const std::vector<std::size_t>& rows,
                                 std::size_t batch_size) {
  std::vector<GazePointCm> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); i += batch_size) {
    const std::vector<std::size_t> chunk(rows.begin() + static_cast<std::ptrdiff_t>(i),
                                         rows.begin() + static_cast<std::ptrdiff_t>(std::min(rows.size(), i + batch_size)));
    const auto batch = store.assemble(chunk);
    const auto pred = forward_gazenet(params, config, batch.faces, batch.bboxes);
    for (std::size_t b = 0; b < chunk.size(); ++b) out.push_back({pred[2 * b], pred[2 * b + 1]});
  }
  return out;
}

TrainResult train(const SampleStore& store, const GazeNetConfig& config, const TrainOptions& options,
                  const EpochCallback& on_epoch) {
  const auto train_rows = store.indices(Split::Train);
  if (train_rows.empty()) throw Error(ErrorCode::EmptyDataset, "no training samples");
  if (store.crop_size() != config.input_size) {
    throw Error(ErrorCode::ShapeMismatch, "stored crops are " + std::to_string(store.crop_size()) +
                                              " px, network expects " + std::to_string(config.input_size));
  }
  const auto val_rows = store.indices(Split::Val);
  const std::size_t eval_batch = std::max<std::size_t>(options.batch_size, 64);

  TrainResult result;
  auto params = init_params<float>(config, derive_seed(options.seed, 1));
  auto state = make_adam_state(params);
  const std::uint64_t shuffle_seed = derive_seed(options.seed, 2);

  EpochLog initial{0, loss_over(params, config, store, train_rows, eval_batch),
                   loss_over(params, config, store, val_rows, eval_batch)};
  result.log.push_back(initial);
  if (on_epoch) on_epoch(initial);
  result.params = params;
  double best_val = std::isnan(initial.val_loss) ? std::numeric_limits<double>::infinity() : initial.val_loss;

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    double sum = 0.0;
    for (const auto& rows : batch_indices(store, Split::Train, options.batch_size, shuffle_seed,
                                          static_cast<std::uint64_t>(epoch))) {
      const auto batch = store.assemble(rows);
      ForwardCache<float> cache;
      const auto pred = forward_gazenet(params, config, batch.faces, batch.bboxes, &cache);
      const auto loss = mse_loss(pred, batch.gaze);
      sum += static_cast<double>(loss.loss) * static_cast<double>(rows.size());
      const auto grads = backward_gazenet(params, config, cache, loss.grad);
      adam_step(params, grads, state, options.adam);
      ++result.steps;
    }
    EpochLog entry{epoch, sum / static_cast<double>(train_rows.size()),
                   loss_over(params, config, store, val_rows, eval_batch)};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);

    const bool better = !std::isnan(entry.val_loss) && entry.val_loss < best_val;
    if (!options.keep_best_val || val_rows.empty() || better) {
      if (better) best_val = entry.val_loss;
      result.params = params;
      result.selected_epoch = epoch;
    }
  }
  return result;
}

std::string format_loss_log(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  for (const auto& e : log) {
    out << e.epoch << ", " << format_exact(e.train_loss) << ", " << format_exact(e.val_loss) << "\n";
  }
  return out.str();
}

}  // namespace gaze::nn
