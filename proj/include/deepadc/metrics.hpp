#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepadc/adc_model.hpp"
#include "deepadc/common.hpp"
#include "deepadc/signal_gen.hpp"

namespace deepadc::metrics {

/// Export cap for an infinite SNDR.
inline constexpr double kSndrCapDb = 200.0;

struct SndrResult {
  double sndr_db = 0.0;
  double enob = 0.0;
  bool infinite = false;

  double sndr_capped() const { return infinite ? kSndrCapDb : sndr_db; }
  double enob_capped() const { return infinite ? (kSndrCapDb - 1.76) / 6.02 : enob; }
};

inline double enob_from_sndr(double sndr_db) { return (sndr_db - 1.76) / 6.02; }

/// SNDR of `test` against `reference` over [edge, N - edge): signal power
/// over error power. Zero error yields an infinite, flagged result.
SndrResult sndr_enob(std::span<const double> reference, std::span<const double> test,
                     std::size_t edge = kEdgeExclusion);

/// Error in LSB units: (test - reference/2^(bits-1)) * 2^(bits-1), with `test`
/// in normalized units (codes / 2^(bits-1)).
std::vector<double> lsb_error_trace(std::span<const std::int16_t> reference_codes,
                                    std::span<const double> test_normalized, int bits);

struct Spectrum {
  std::vector<double> freq_hz;
  std::vector<double> magnitude_db;  // flat-top, tone-power calibrated, Welch averaged
  std::vector<double> phase_rad;     // rectangular window, first segment; NaN outside the band
  std::size_t segment_length = 0;
  std::size_t segments = 0;
  double enbw_bins = 0.0;
};

/// One-sided spectrum with FFT segments of round(rate / rbw) samples and 50%
/// overlap. A bin-centred tone of amplitude a reads 10*log10(a^2/2) dB.
Spectrum spectrum(std::span<const double> signal, double sample_rate, double rbw, double band_lo_hz = 0.0,
                  double band_hi_hz = 0.0);

/// Sum of bin powers corrected by the window's noise bandwidth; equals the
/// mean power of the analysed signal.
double spectrum_total_power(const Spectrum& s);

double symbol_error_rate(std::span<const int> tx, std::span<const int> rx);

/// SER over all but the first and last OFDM symbol (when there are at least three).
double interior_symbol_error_rate(std::span<const int> tx, std::span<const int> rx, int n_subcarriers);

/// Demodulate code-valued samples of a capture and slice to QAM indices.
std::vector<int> detect_symbols(std::span<const double> codes, const adc::AdcCapture& capture,
                                const signal::OfdmConfig& ofdm);

enum class Variant { ideal, nonideal, shift, nn };
std::string variant_name(Variant v);

struct MetricsReport {
  Variant variant = Variant::ideal;
  int constellation_order = 0;
  SndrResult sndr;
  std::vector<double> lsb_error;
  Spectrum spectrum;
  double ser = 0.0;
  std::vector<signal::CcdfPoint> papr_ccdf;
};

/// Every figure of merit for one variant of a capture. `codes` are code-valued
/// samples aligned with capture.ideal_codes.
MetricsReport evaluate_variant(Variant variant, std::span<const double> codes, const adc::AdcCapture& capture,
                               const signal::OfdmConfig& ofdm, double rbw = 1e6,
                               signal::PaprMode papr_mode = signal::PaprMode::per_symbol);

}  // namespace deepadc::metrics
