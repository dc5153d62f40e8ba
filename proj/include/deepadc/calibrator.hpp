#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deepadc/adc_model.hpp"
#include "deepadc/nn/network.hpp"

namespace deepadc::calib {

struct WindowConfig {
  std::size_t window_length = 64;
  /// Position of the corrected sample inside the window (0-based).
  std::size_t current_index = 31;

  void validate() const;
  /// Future samples that must be buffered before a sample can be corrected.
  std::size_t latency() const { return window_length - 1 - current_index; }
};

/// The conv/LSTM stack: four conv(k3,p1)+BN+ReLU blocks (1-64-64-128-128),
/// channel/time transpose, LSTMs 128-64-32-4, flatten, linear to one output.
std::vector<nn::LayerSpec> network_specs(std::size_t window_length = 64);

/// Closed-form parameter count of network_specs().
std::size_t expected_parameter_count(std::size_t window_length = 64);

struct Model {
  nn::Network<float> net;
  WindowConfig window;
  int resolution_bits = 13;
  /// Codes are divided by this before entering the network (2^(bits-1)).
  double normalization = 4096.0;
};

/// Fresh network with parameters drawn from `seed`. Throws std::logic_error
/// if the built parameter count disagrees with expected_parameter_count().
Model build_network(std::uint64_t seed, const WindowConfig& window = {}, int resolution_bits = 13);

void save_model(const std::filesystem::path& path, Model& model);
Model load_model(const std::filesystem::path& path);

/// Sliding windows over normalized capture streams. Window j of a record spans
/// aggregate indices [j, j + window_length); its target is the ideal code at
/// j + current_index. Windows are stored as (record, start) references.
struct WindowDataset {
  struct Ref {
    std::uint32_t record;
    std::uint32_t start;
  };
  std::vector<std::vector<float>> inputs;   // normalized non-ideal codes per record
  std::vector<std::vector<float>> targets;  // normalized ideal codes per record
  std::vector<int> labels;                  // constellation order per record
  std::vector<Ref> windows;                 // shuffled across records
  WindowConfig window;
  double normalization = 4096.0;
  int resolution_bits = 13;
  std::uint64_t shuffle_seed = 0;

  std::size_t size() const { return windows.size(); }
  const float* window_data(std::size_t i) const {
    return inputs[windows[i].record].data() + windows[i].start;
  }
  float target(std::size_t i) const { return targets[windows[i].record][windows[i].start + window.current_index]; }
  int label(std::size_t i) const { return labels[windows[i].record]; }
};

/// Windows of a single capture, in stream order.
WindowDataset make_windows(const adc::AdcCapture& capture, const WindowConfig& window = {});

/// Windows of several captures, interleaved by a shuffle seeded with `seed`.
WindowDataset make_dataset(std::span<const adc::AdcCapture> captures, const WindowConfig& window,
                           std::uint64_t seed);

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  /// Held-out share of windows; 0 trains on everything and keeps the last model.
  double validation_fraction = 0.1;
  /// Stop once an epoch's mean train loss falls below this (0 disables).
  double stop_below = 0.0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation split
  double seconds = 0.0;
  std::size_t steps = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  double seconds = 0.0;
  TrainConfig config;
  std::size_t train_windows = 0, val_windows = 0;

  /// "epoch,train_loss,val_loss,seconds" with a header row.
  std::string to_csv() const;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Minimizes MSE between the network output and the window targets with
/// batchnorm in train mode. Returns the model with the lowest validation loss
/// (the last one without a split). `start` resumes from an existing model.
/// A non-finite loss or gradient throws NumericError naming the last good epoch.
TrainReport train(Model& model, const WindowDataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Infer-mode MSE over the given window indices.
double evaluate_loss(Model& model, const WindowDataset& data, std::span<const std::size_t> indices);

/// Corrected stream in normalized units. output[k] is defined (not NaN) for
/// k in [current_index, n - window_length + current_index]; it is the network
/// applied to the window starting at k - current_index.
std::vector<double> infer_stream(Model& model, std::span<const std::int16_t> codes);

}  // namespace deepadc::calib
