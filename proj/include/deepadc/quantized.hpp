#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepadc/adc_model.hpp"
#include "deepadc/calibrator.hpp"

namespace deepadc::quant {

struct QuantScheme {
  int weight_bits = 16;
  int activation_bits = 16;
  /// Entries of the sigmoid/tanh lookup tables (linear interpolation between them).
  std::size_t lut_size = 256;
  /// Tables cover [-range, range]; inputs beyond are clamped to the end entries.
  double sigmoid_range = 12.0;
  double tanh_range = 6.0;

  void validate() const;
};

/// Largest representable magnitude in units of the scale: 2^(bits-1) - 1.
std::int64_t quant_max(int bits);

/// Symmetric per-tensor scale max|v| / quant_max(bits). An all-zero tensor
/// gets scale 1 and sets `all_zero`.
double symmetric_scale(std::span<const double> values, int bits, bool* all_zero = nullptr);

/// round(v / s) clamped to +-quant_max(bits), times s.
double fake_quantize(double v, double scale, int bits);

/// f sampled at `size` points over [-range, range], evaluated by linear interpolation.
class LookupTable {
 public:
  LookupTable() = default;
  LookupTable(double (*f)(double), double range, std::size_t size);
  double operator()(double x) const;

 private:
  std::vector<double> y_;
  double lo_ = 0.0, step_ = 1.0;
};

/// Float network in double precision with every batchnorm folded into the
/// convolution in front of it. Weights are stored per layer in the same
/// layout as the source network.
struct FoldedLayer {
  nn::LayerSpec spec;
  std::string name;                   // e.g. "0.conv1d"
  std::vector<std::vector<double>> w; // conv/linear: {weight, bias}; lstm: {w_ih, w_hh, bias}
};

struct FoldedModel {
  std::vector<FoldedLayer> layers;
  calib::WindowConfig window;
  double normalization = 4096.0;
  int resolution_bits = 13;
};

/// Throws InvalidInput for a batchnorm that does not directly follow a
/// convolution or whose running statistics were never updated.
FoldedModel fold_batchnorm(calib::Model& model);

struct TensorQuantInfo {
  std::string name;
  double scale = 1.0;
  bool all_zero = false;
  double max_rounding_error = 0.0;
};

struct QuantizedModel {
  FoldedModel model;  // weights already rounded to their grids
  QuantScheme scheme;
  std::vector<TensorQuantInfo> weights;
  /// One scale per activation point, in forward order: network input, each
  /// conv output, each lstm's gate pre-activations, cell state and hidden
  /// output, each linear output.
  std::vector<double> activation_scales;
  LookupTable sigmoid, tanh;
};

/// Picks `count` windows of `data` for range calibration: half are the
/// windows whose corrected sample has the largest input magnitude (signal
/// peaks drive the extreme activations), the rest evenly spaced in stream
/// order. Returns `data` unchanged when it holds no more than `count`.
calib::WindowDataset select_calibration_windows(const calib::WindowDataset& data, std::size_t count);

/// Folds batchnorm, rounds every weight tensor to `scheme.weight_bits`, and
/// sets activation scales from the max-abs seen over `calibration` (at least
/// 1000 windows) in a float pass.
QuantizedModel calibrate_and_quantize(calib::Model& model, const QuantScheme& scheme,
                                      const calib::WindowDataset& calibration);

/// Exact double-precision forward of the folded network; normalized output per window.
std::vector<double> forward(const FoldedModel& model, std::span<const float> windows);
/// Fixed-point emulation: activations rounded at every activation point, LSTM
/// nonlinearities through the lookup tables.
std::vector<double> forward(const QuantizedModel& model, std::span<const float> windows);

/// Streaming inference with the same alignment and NaN padding as calib::infer_stream.
std::vector<double> infer_stream(const QuantizedModel& model, std::span<const std::int16_t> codes);

struct SweepRow {
  int bits = 0;  // 0 is the float model
  double enob = 0.0;
  double sndr = 0.0;  // dB
  double mse = 0.0;   // against the ideal codes, normalized units
  double max_abs_error = 0.0;  // against the float model output, normalized units
};

/// Quantizes weights and activations to each width in `bits` (same calibration
/// set, same capture) and scores the corrected stream against the ideal codes.
/// The first row is the float model.
std::vector<SweepRow> sweep_bitwidths(calib::Model& model, std::span<const int> bits,
                                      const adc::AdcCapture& eval_capture,
                                      const calib::WindowDataset& calibration, QuantScheme base = {});

/// "bits,enob,sndr,mse,max_abs_error" plus one line per row.
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace deepadc::quant
