#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace deepadc {

enum class SampleKind { real, complex };

/// A sampled waveform in volts. Complex (baseband) records store
/// interleaved re/im pairs in `samples`, the same layout as the file payload.
struct WaveformRecord {
  SampleKind kind = SampleKind::real;
  std::vector<double> samples;
  double sample_rate = 0.0;
  /// Volts per unit of complex envelope; ofdm_demodulate divides it out.
  double scale = 1.0;
  int constellation_order = 0;
  int n_subcarriers = 0;
  int n_symbols = 0;
  int cyclic_prefix = 0;  // samples at this record's rate
  /// QAM indices, n_symbols rows of n_subcarriers.
  std::vector<int> tx_symbols;
  std::uint64_t seed = 0;

  bool is_complex() const { return kind == SampleKind::complex; }
  std::size_t size() const { return is_complex() ? samples.size() / 2 : samples.size(); }
  std::complex<double> at(std::size_t i) const {
    return is_complex() ? std::complex<double>(samples[2 * i], samples[2 * i + 1])
                        : std::complex<double>(samples[i], 0.0);
  }
  std::span<const int> tx_symbol(int s) const {
    return std::span<const int>(tx_symbols).subspan(static_cast<std::size_t>(s) * n_subcarriers, n_subcarriers);
  }
};

void save_waveform(const std::filesystem::path& path, const WaveformRecord& record);
WaveformRecord load_waveform(const std::filesystem::path& path);

}  // namespace deepadc
