#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "deepadc/adc_model.hpp"
#include "deepadc/calibrator.hpp"
#include "deepadc/error.hpp"
#include "deepadc/metrics.hpp"
#include "deepadc/quantized.hpp"
#include "deepadc/signal_gen.hpp"

namespace deepadc::app {

/// Bad or unknown configuration key, or a value out of range.
class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Everything a run needs, read from an INI file. Sections: ofdm, adc, data,
/// window, train, quant, eval, output. Unknown sections or keys are errors.
struct RunConfig {
  signal::OfdmConfig ofdm;

  int n_channels = 8;
  double channel_rate = 1.024e9;
  int resolution_bits = 13;
  double full_scale = 1.0;
  adc::ImpairmentRanges impairments;
  std::uint64_t adc_seed = 3;

  std::vector<int> constellations{64, 128, 256, 512, 1024};
  int train_symbols = 200;
  int eval_symbols = 32;
  std::uint64_t data_seed = 1;

  calib::WindowConfig window;
  calib::TrainConfig train;
  std::uint64_t model_seed = 0;

  quant::QuantScheme quant;
  std::vector<int> quant_bits{16, 12, 10, 8};
  std::size_t calibration_windows = 4096;

  double rbw = 1e6;
  signal::PaprMode papr_mode = signal::PaprMode::per_symbol;
  std::size_t overlay_start = 4096;
  std::size_t overlay_length = 256;

  std::filesystem::path output_dir = "out";

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  std::string to_ini() const;
  void validate() const;

  adc::AdcConfig draw_adc() const;
  /// Seed of the record for one constellation and split (0 train, 1 eval).
  std::uint64_t record_seed(int order, int split) const;
};

/// Output root: $DEEPADC_OUT when set, else the configured directory.
std::filesystem::path output_root(const RunConfig& cfg);

std::string capture_name(int order);

/// Writes <out>/{train,eval}/qam<order>.{wfm,cap} and <out>/manifest.txt;
/// returns the manifest text (config plus the drawn channel parameters).
std::string cmd_gen(const RunConfig& cfg, const std::filesystem::path& out);

struct TrainOutcome {
  calib::TrainReport report;
  std::filesystem::path model_path, report_path;
};

/// Trains on every capture in <data>/train and writes the model plus
/// <model stem>_train.csv beside it. With `resume` the weights start from
/// that model file. Progress goes to `log`.
TrainOutcome cmd_train(const RunConfig& cfg, const std::filesystem::path& data, const std::filesystem::path& model_out,
                       const std::optional<std::filesystem::path>& resume, std::ostream& log);

struct VariantSummary {
  int constellation_order = 0;
  metrics::Variant variant = metrics::Variant::ideal;
  double sndr_db = 0.0, enob = 0.0, ser = 0.0;
};

/// Scores ideal, non-ideal, shift-corrected and network output of every
/// capture in <data>/eval with one model. Per constellation a directory
/// <out>/qam<order>/ gets the ENOB, SER, LSB-error, spectrum, time-overlay
/// and PAPR CSVs; <out>/summary.csv collects the tables.
std::vector<VariantSummary> cmd_eval(const RunConfig& cfg, const std::filesystem::path& model_path,
                                     const std::filesystem::path& data, const std::filesystem::path& out,
                                     std::ostream& log);

/// Bit-width sweep of `model_path` on one capture. Activation ranges come
/// from calibration_windows windows of `calibration` picked by
/// quant::select_calibration_windows (the scored capture itself when not
/// given). Writes the sweep CSV to `out_csv`.
std::vector<quant::SweepRow> cmd_quant_sweep(const RunConfig& cfg, const std::filesystem::path& model_path,
                                             const std::filesystem::path& capture_path,
                                             const std::optional<std::filesystem::path>& calibration,
                                             const std::filesystem::path& out_csv);

}  // namespace deepadc::app
