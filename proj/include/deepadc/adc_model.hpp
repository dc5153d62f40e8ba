#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "deepadc/filter_design.hpp"
#include "deepadc/waveform.hpp"

namespace deepadc::adc {

/// Error sources of one sub-ADC. A missing memory filter means all-pass;
/// an infinite nonlinearity_scale means the tanh stage is bypassed.
struct ChannelImpairments {
  double skew = 0.0;              // seconds
  double jitter_rms = 0.0;        // seconds
  double jitter_bandwidth = 20e6; // Hz, -3 dB
  double nonlinearity_scale = std::numeric_limits<double>::infinity();  // volts
  std::optional<FilterDesign> memory_filter;
};

struct AdcConfig {
  int n_channels = 8;
  double channel_rate = 1.024e9;
  int resolution_bits = 13;
  double full_scale = 1.0;  // volts peak-to-peak
  std::vector<ChannelImpairments> channels;
  std::uint64_t seed = 0;

  double aggregate_rate() const { return n_channels * channel_rate; }
  double lsb() const;
  int max_code() const { return (1 << (resolution_bits - 1)) - 1; }
  int min_code() const { return -(1 << (resolution_bits - 1)); }
  void validate() const;
};

/// Ranges the per-channel impairments are drawn from.
struct ImpairmentRanges {
  double skew_spread = 12e-12;
  double jitter_rms = 390e-15;
  double jitter_bandwidth = 20e6;
  double ripple_db_min = 1.5, ripple_db_max = 6.0;
  double corner_hz_min = 5e9, corner_hz_max = 8e9;
  int filter_order = 8;
  /// tanh scale A, in units of full_scale / 2
  double nonlinearity_min = 1.5, nonlinearity_max = 2.5;
};

/// Draws every channel's impairments from `ranges` with `seed`. Skews are
/// drawn uniform, then shifted to zero mean and scaled so max - min equals
/// skew_spread exactly.
AdcConfig draw_adc_config(const ImpairmentRanges& ranges, double simulation_rate, std::uint64_t seed,
                          int n_channels = 8, double channel_rate = 1.024e9, int resolution_bits = 13,
                          double full_scale = 1.0);

/// All impairments disabled: zero skew/jitter, linear, all-pass.
AdcConfig ideal_adc_config(int n_channels = 8, double channel_rate = 1.024e9, int resolution_bits = 13,
                           double full_scale = 1.0);

/// offset[m][n] = skew_m + jitter_m[n]. Jitter is white Gaussian at the
/// channel rate, low-passed by a 4th-order Butterworth at the channel's
/// jitter bandwidth, then rescaled to exactly jitter_rms.
std::vector<std::vector<double>> gen_timing_offsets(const AdcConfig& cfg, std::size_t n_channel_samples,
                                                    std::uint64_t seed);

/// Band-limited evaluation of a real record at arbitrary times (seconds from
/// the first sample). Windowed sinc, 32 taps per side, Kaiser beta = 12.
std::vector<double> sample_nonuniform(const WaveformRecord& analog, std::span<const double> times);

inline double apply_nonlinearity(double x, double scale) { return scale * std::tanh(x / scale); }

/// Midtread quantizer with round-half-away-from-zero and saturation at the rails.
int quantize(double x, int bits, double full_scale);

struct CaptureSource {
  int constellation_order = 0;
  int n_symbols = 0;
  int n_subcarriers = 0;
  int cyclic_prefix = 0;  // at analog_rate
  double analog_rate = 0.0;
  double record_scale = 1.0;
  std::uint64_t record_seed = 0;
  std::vector<int> tx_symbols;
};

struct AdcCapture {
  std::vector<std::int16_t> nonideal_codes;
  std::vector<std::int16_t> ideal_codes;
  AdcConfig config;
  CaptureSource source;
  std::size_t clipped_nonideal = 0;
  std::size_t clipped_ideal = 0;

  std::size_t size() const { return ideal_codes.size(); }
};

/// Per channel m: memory filter -> nonlinearity -> sample at
/// (nM + m)/F_agg + offset[m][n] -> quantize, interleaved at index nM + m.
/// The ideal path samples the unfiltered, linear record on the nominal grid.
/// Timing offsets are seeded from cfg.seed and the record's seed.
AdcCapture simulate_interleaved(const WaveformRecord& analog, const AdcConfig& cfg);

/// Aggregate-rate passband record (volts) from code-valued samples, for demodulation.
WaveformRecord capture_waveform(std::span<const double> codes, const AdcCapture& capture);

void save_capture(const std::filesystem::path& path, const AdcCapture& capture);
AdcCapture load_capture(const std::filesystem::path& path);

}  // namespace deepadc::adc
