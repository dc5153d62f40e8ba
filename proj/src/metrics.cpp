#include "deepadc/metrics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "deepadc/error.hpp"
#include "deepadc/fft.hpp"

namespace deepadc::metrics {

namespace {

// 5-term flat-top (periodic form), coefficients as in common instrument practice.
std::vector<double> flat_top(std::size_t n) {
  constexpr double a[] = {0.21557895, 0.41663158, 0.277263158, 0.083578947, 0.006947368};
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    w[i] = a[0] - a[1] * std::cos(x) + a[2] * std::cos(2 * x) - a[3] * std::cos(3 * x) + a[4] * std::cos(4 * x);
  }
  return w;
}

}  // namespace

SndrResult sndr_enob(std::span<const double> reference, std::span<const double> test, std::size_t edge) {
  if (reference.size() != test.size()) throw InvalidInput("sndr_enob: length mismatch");
  if (reference.size() < 4096) throw InvalidInput("sndr_enob: need at least 4096 samples");
  if (2 * edge >= reference.size()) throw InvalidInput("sndr_enob: edge exclusion covers the whole record");
  double ps = 0.0, pe = 0.0;
  for (std::size_t i = edge; i < reference.size() - edge; ++i) {
    const double e = test[i] - reference[i];
    ps += reference[i] * reference[i];
    pe += e * e;
  }
  if (!std::isfinite(pe) || !std::isfinite(ps)) throw NumericError("sndr_enob: non-finite samples in range");
  if (!(ps > 0.0)) throw InvalidInput("sndr_enob: reference is zero");
  SndrResult r;
  if (pe == 0.0) {
    r.infinite = true;
    r.sndr_db = std::numeric_limits<double>::infinity();
    r.enob = std::numeric_limits<double>::infinity();
    return r;
  }
  r.sndr_db = 10.0 * std::log10(ps / pe);
  r.enob = enob_from_sndr(r.sndr_db);
  return r;
}

std::vector<double> lsb_error_trace(std::span<const std::int16_t> reference_codes,
                                    std::span<const double> test_normalized, int bits) {
  if (reference_codes.size() != test_normalized.size()) throw InvalidInput("lsb_error_trace: length mismatch");
  const double half = std::ldexp(1.0, bits - 1);
  std::vector<double> out(reference_codes.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (test_normalized[i] - reference_codes[i] / half) * half;
  }
  return out;
}

Spectrum spectrum(std::span<const double> signal, double sample_rate, double rbw, double band_lo_hz,
                  double band_hi_hz) {
  if (!(rbw > 0.0) || !(sample_rate > 0.0)) throw InvalidInput("spectrum: rate and RBW must be positive");
  const auto len = static_cast<std::size_t>(std::llround(sample_rate / rbw));
  if (len < 2 || signal.size() < len) throw InvalidInput("spectrum: signal shorter than one RBW segment");
  const std::size_t hop = len / 2;
  const std::size_t segs = (signal.size() - len) / hop + 1;
  const auto w = flat_top(len);
  double wsum = 0.0, w2sum = 0.0;
  for (double v : w) {
    wsum += v;
    w2sum += v * v;
  }
  const std::size_t bins = len / 2 + 1;
  std::vector<double> power(bins, 0.0);
  dsp::Fft plan(len);
  std::vector<dsp::cplx> buf(len);
  for (std::size_t s = 0; s < segs; ++s) {
    for (std::size_t i = 0; i < len; ++i) buf[i] = signal[s * hop + i] * w[i];
    plan.forward(buf, buf);
    for (std::size_t k = 0; k < bins; ++k) {
      const double one_sided = (k == 0 || 2 * k == len) ? 1.0 : 2.0;
      power[k] += one_sided * std::norm(buf[k]) / (wsum * wsum);
    }
  }
  Spectrum out;
  out.segment_length = len;
  out.segments = segs;
  out.enbw_bins = static_cast<double>(len) * w2sum / (wsum * wsum);
  out.freq_hz.resize(bins);
  out.magnitude_db.resize(bins);
  out.phase_rad.assign(bins, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < bins; ++k) {
    out.freq_hz[k] = static_cast<double>(k) * sample_rate / static_cast<double>(len);
    const double p = power[k] / static_cast<double>(segs);
    out.magnitude_db[k] = p > 0.0 ? 10.0 * std::log10(p) : -400.0;
  }
  for (std::size_t i = 0; i < len; ++i) buf[i] = signal[i];
  plan.forward(buf, buf);
  for (std::size_t k = 0; k < bins; ++k) {
    if (out.freq_hz[k] >= band_lo_hz && out.freq_hz[k] <= band_hi_hz) out.phase_rad[k] = std::arg(buf[k]);
  }
  return out;
}

double spectrum_total_power(const Spectrum& s) {
  double total = 0.0;
  for (double db : s.magnitude_db) total += std::pow(10.0, db / 10.0);
  return total / s.enbw_bins;
}

double symbol_error_rate(std::span<const int> tx, std::span<const int> rx) {
  if (tx.size() != rx.size()) throw InvalidInput("symbol_error_rate: length mismatch");
  if (tx.empty()) throw InvalidInput("symbol_error_rate: empty input");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < tx.size(); ++i) errors += tx[i] != rx[i];
  return static_cast<double>(errors) / static_cast<double>(tx.size());
}

double interior_symbol_error_rate(std::span<const int> tx, std::span<const int> rx, int n_subcarriers) {
  if (tx.size() != rx.size()) throw InvalidInput("symbol_error_rate: length mismatch");
  const auto per = static_cast<std::size_t>(n_subcarriers);
  if (per == 0 || tx.size() < 3 * per) return symbol_error_rate(tx, rx);
  const std::size_t n = tx.size() - 2 * per;
  return symbol_error_rate(tx.subspan(per, n), rx.subspan(per, n));
}

std::vector<int> detect_symbols(std::span<const double> codes, const adc::AdcCapture& capture,
                                const signal::OfdmConfig& ofdm) {
  const auto rec = adc::capture_waveform(codes, capture);
  const auto est = signal::ofdm_demodulate(rec, ofdm);
  return signal::qam_slice(est, signal::QamConstellation(capture.source.constellation_order));
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::ideal: return "ideal";
    case Variant::nonideal: return "nonideal";
    case Variant::shift: return "shift";
    case Variant::nn: return "nn";
  }
  return "unknown";
}

MetricsReport evaluate_variant(Variant variant, std::span<const double> codes, const adc::AdcCapture& capture,
                               const signal::OfdmConfig& ofdm, double rbw, signal::PaprMode papr_mode) {
  if (codes.size() != capture.size()) throw InvalidInput("evaluate_variant: length mismatch with capture");
  const int bits = capture.config.resolution_bits;
  const double half = std::ldexp(1.0, bits - 1);
  std::vector<double> ideal(capture.ideal_codes.begin(), capture.ideal_codes.end());

  MetricsReport r;
  r.variant = variant;
  r.constellation_order = capture.source.constellation_order;
  r.sndr = sndr_enob(ideal, codes);

  std::vector<double> normalized(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) normalized[i] = codes[i] / half;
  r.lsb_error = lsb_error_trace(capture.ideal_codes, normalized, bits);

  // undefined ends (NaN) of the network output are filled from the ideal
  // codes so the spectrum and demodulator see a full-length record; those
  // ends lie inside the first and last OFDM symbols, which SER skips
  std::vector<double> filled(codes.begin(), codes.end());
  for (std::size_t i = 0; i < filled.size(); ++i) {
    if (!std::isfinite(filled[i])) filled[i] = ideal[i];
  }
  const double half_bw = 0.5 * ofdm.n_subcarriers * ofdm.subcarrier_spacing;
  r.spectrum = spectrum(filled, capture.config.aggregate_rate(), rbw, ofdm.center_frequency - half_bw,
                        ofdm.center_frequency + half_bw);
  const auto rx = detect_symbols(filled, capture, ofdm);
  r.ser = interior_symbol_error_rate(capture.source.tx_symbols, rx, capture.source.n_subcarriers);
  const auto papr = signal::papr_db(adc::capture_waveform(ideal, capture), papr_mode);
  r.papr_ccdf = signal::papr_ccdf(papr, 0.0, 16.0, 0.25);
  return r;
}

}  // namespace deepadc::metrics
