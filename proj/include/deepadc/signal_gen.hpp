#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "deepadc/waveform.hpp"

namespace deepadc::signal {

using cplx = std::complex<double>;

/// Unit-average-energy QAM constellation. Orders 64/256/1024 are square
/// Gray-coded grids; 128/512 are cross constellations (square with the
/// corners removed), indexed row-major over the remaining points.
class QamConstellation {
 public:
  explicit QamConstellation(int order);

  int order() const { return order_; }
  std::span<const cplx> points() const { return points_; }
  cplx point(int index) const;
  /// Smallest distance between two distinct points.
  double min_distance() const { return min_distance_; }

 private:
  int order_;
  std::vector<cplx> points_;
  double min_distance_ = 0.0;
};

inline constexpr int kSupportedOrders[] = {64, 128, 256, 512, 1024};

struct OfdmConfig {
  int n_subcarriers = 128;
  double subcarrier_spacing = 8e6;
  double center_frequency = 1.3e9;
  double analog_rate = 65.536e9;
  int cyclic_prefix_samples = 0;  // at analog_rate
  /// Record loading: peak |sample| = peak_fraction * full_scale / 2.
  double full_scale = 1.0;
  double peak_fraction = 0.95;

  /// Throws InvalidInput if the band or the rate grid is inconsistent.
  void validate() const;
  int samples_per_symbol() const;
  /// Passband DFT bin (spacing = subcarrier_spacing) of subcarrier 0.
  int first_bin() const;
};

std::vector<cplx> qam_map(std::span<const int> indices, const QamConstellation& constellation);

/// Nearest point by Euclidean distance; ties go to the lower index.
std::vector<int> qam_slice(std::span<const cplx> estimates, const QamConstellation& constellation);

std::vector<int> random_indices(std::size_t count, int order, std::uint64_t seed);

/// Real passband OFDM waveform at cfg.analog_rate. Subcarrier k sits at
/// center + (k - (n-1)/2) * spacing; the record is scaled so its peak
/// equals cfg.peak_fraction * cfg.full_scale / 2. tx_symbols is left empty.
WaveformRecord ofdm_modulate(std::span<const cplx> symbols, const OfdmConfig& cfg, std::uint64_t seed);

/// Complex envelope of the same symbols at cfg.analog_rate (unscaled).
WaveformRecord ofdm_envelope(std::span<const cplx> symbols, const OfdmConfig& cfg);

/// Random QAM symbols of the given order, modulated; tx_symbols filled in.
WaveformRecord generate_record(int order, int n_symbols, const OfdmConfig& cfg, std::uint64_t seed);

/// Symbol estimates from a real passband record at cfg.analog_rate or any
/// rate that is an integer multiple of the subcarrier spacing. Equivalent to
/// downconversion, image rejection and a per-subcarrier DFT over each symbol
/// body; the record's scale is divided out.
std::vector<cplx> ofdm_demodulate(const WaveformRecord& record, const OfdmConfig& cfg);

enum class PaprMode { per_symbol, per_record };

/// PAPR of the complex envelope in dB. Real records are converted to their
/// analytic signal per symbol; complex records are used as-is.
std::vector<double> papr_db(const WaveformRecord& record, PaprMode mode = PaprMode::per_symbol);

struct CcdfPoint {
  double threshold_db;
  double probability;  // P(PAPR > threshold)
};
std::vector<CcdfPoint> papr_ccdf(std::span<const double> papr_values, double lo_db, double hi_db, double step_db);

}  // namespace deepadc::signal
