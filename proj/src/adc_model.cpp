#include "deepadc/adc_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "deepadc/container.hpp"
#include "deepadc/error.hpp"
#include "deepadc/kernels/interpolate.hpp"

namespace deepadc::adc {

namespace {

constexpr int kJitterFilterOrder = 4;
constexpr std::size_t kJitterWarmup = 2048;

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

bool is_integer(double v) { return std::abs(v - std::round(v)) <= 1e-9 * std::max(1.0, std::abs(v)); }

const kernels::SincInterpolator& interpolator() {
  static const kernels::SincInterpolator interp(32, 12.0);
  return interp;
}

}  // namespace

double AdcConfig::lsb() const { return full_scale / std::ldexp(1.0, resolution_bits); }

void AdcConfig::validate() const {
  if (n_channels < 1) throw InvalidInput("n_channels must be >= 1");
  if (!(channel_rate > 0.0)) throw InvalidInput("channel_rate must be positive");
  if (resolution_bits < 2 || resolution_bits > 16) throw InvalidInput("resolution_bits must lie in [2, 16]");
  if (!(full_scale > 0.0)) throw InvalidInput("full_scale must be positive");
  if (channels.size() != static_cast<std::size_t>(n_channels)) {
    throw InvalidInput("channel impairment count does not match n_channels");
  }
  for (const auto& ch : channels) {
    if (!(ch.nonlinearity_scale > 0.0)) throw InvalidInput("nonlinearity scale must be positive");
    if (ch.jitter_rms < 0.0) throw InvalidInput("jitter RMS must be non-negative");
  }
}

AdcConfig draw_adc_config(const ImpairmentRanges& r, double simulation_rate, std::uint64_t seed, int n_channels,
                          double channel_rate, int resolution_bits, double full_scale) {
  AdcConfig cfg;
  cfg.n_channels = n_channels;
  cfg.channel_rate = channel_rate;
  cfg.resolution_bits = resolution_bits;
  cfg.full_scale = full_scale;
  cfg.seed = seed;
  auto rng = substream(seed, 0xC0FFEE, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> u(static_cast<std::size_t>(n_channels));
  cfg.channels.resize(u.size());
  for (int m = 0; m < n_channels; ++m) {
    auto& ch = cfg.channels[m];
    const double ripple = r.ripple_db_min + (r.ripple_db_max - r.ripple_db_min) * unit(rng);
    const double corner = r.corner_hz_min + (r.corner_hz_max - r.corner_hz_min) * unit(rng);
    const double a = r.nonlinearity_min + (r.nonlinearity_max - r.nonlinearity_min) * unit(rng);
    u[m] = unit(rng);
    ch.memory_filter = design_chebyshev1(r.filter_order, ripple, corner, simulation_rate);
    ch.nonlinearity_scale = a * full_scale / 2.0;
    ch.jitter_rms = r.jitter_rms;
    ch.jitter_bandwidth = r.jitter_bandwidth;
  }
  const auto [lo, hi] = std::minmax_element(u.begin(), u.end());
  const double span = *hi - *lo;
  double mean = 0.0;
  for (double v : u) mean += v;
  mean /= static_cast<double>(u.size());
  for (int m = 0; m < n_channels; ++m) {
    cfg.channels[m].skew = span > 0.0 ? (u[m] - mean) * (r.skew_spread / span) : 0.0;
  }
  cfg.validate();
  return cfg;
}

AdcConfig ideal_adc_config(int n_channels, double channel_rate, int resolution_bits, double full_scale) {
  AdcConfig cfg;
  cfg.n_channels = n_channels;
  cfg.channel_rate = channel_rate;
  cfg.resolution_bits = resolution_bits;
  cfg.full_scale = full_scale;
  cfg.channels.resize(static_cast<std::size_t>(n_channels));
  cfg.validate();
  return cfg;
}

std::vector<std::vector<double>> gen_timing_offsets(const AdcConfig& cfg, std::size_t n_channel_samples,
                                                    std::uint64_t seed) {
  cfg.validate();
  std::vector<std::vector<double>> out(cfg.channels.size(), std::vector<double>(n_channel_samples, 0.0));
  for (std::size_t m = 0; m < cfg.channels.size(); ++m) {
    const auto& ch = cfg.channels[m];
    auto& off = out[m];
    if (ch.jitter_rms > 0.0 && n_channel_samples > 0) {
      auto rng = substream(seed, 0x717, m);
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::vector<double> white(n_channel_samples + kJitterWarmup);
      for (auto& v : white) v = gauss(rng);
      const auto lp = design_butterworth(kJitterFilterOrder, ch.jitter_bandwidth, cfg.channel_rate);
      const auto shaped = sosfilt(lp, white);
      double ss = 0.0;
      for (std::size_t n = 0; n < n_channel_samples; ++n) {
        off[n] = shaped[n + kJitterWarmup];
        ss += off[n] * off[n];
      }
      const double rms = std::sqrt(ss / static_cast<double>(n_channel_samples));
      const double gain = rms > 0.0 ? ch.jitter_rms / rms : 0.0;
      for (auto& v : off) v *= gain;
    }
    for (auto& v : off) v += ch.skew;
  }
  return out;
}

std::vector<double> sample_nonuniform(const WaveformRecord& analog, std::span<const double> times) {
  if (analog.is_complex()) throw InvalidInput("sample_nonuniform expects a real record");
  std::vector<double> pos(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) pos[i] = times[i] * analog.sample_rate;
  std::vector<double> out(times.size());
  kernels::parallel::interpolate(interpolator(), analog.samples, pos, out);
  return out;
}

int quantize(double x, int bits, double full_scale) {
  const double lsb = full_scale / std::ldexp(1.0, bits);
  const double hi = std::ldexp(1.0, bits - 1) - 1.0;
  const double lo = -std::ldexp(1.0, bits - 1);
  const double code = std::round(x / lsb);
  return static_cast<int>(std::clamp(code, lo, hi));
}

AdcCapture simulate_interleaved(const WaveformRecord& analog, const AdcConfig& cfg) {
  cfg.validate();
  if (analog.is_complex()) throw InvalidInput("simulate_interleaved expects a real passband record");
  const double ratio = analog.sample_rate / cfg.aggregate_rate();
  if (!(ratio >= 1.0) || !is_integer(ratio)) {
    throw InvalidInput("analog rate must be an integer multiple of the aggregate ADC rate");
  }
  const auto R = static_cast<std::size_t>(std::llround(ratio));
  const std::size_t K = analog.samples.size() / R;
  const auto M = static_cast<std::size_t>(cfg.n_channels);

  AdcCapture cap;
  cap.config = cfg;
  cap.source.constellation_order = analog.constellation_order;
  cap.source.n_symbols = analog.n_symbols;
  cap.source.n_subcarriers = analog.n_subcarriers;
  cap.source.cyclic_prefix = analog.cyclic_prefix;
  cap.source.analog_rate = analog.sample_rate;
  cap.source.record_scale = analog.scale;
  cap.source.record_seed = analog.seed;
  cap.source.tx_symbols = analog.tx_symbols;
  cap.ideal_codes.resize(K);
  cap.nonideal_codes.resize(K);

  const int hi = cfg.max_code(), lo = cfg.min_code();
  for (std::size_t k = 0; k < K; ++k) {
    const int c = quantize(analog.samples[k * R], cfg.resolution_bits, cfg.full_scale);
    cap.clipped_ideal += (c == hi || c == lo);
    cap.ideal_codes[k] = static_cast<std::int16_t>(c);
  }

  const std::size_t per_channel = (K + M - 1) / M;
  const auto offsets = gen_timing_offsets(cfg, per_channel, cfg.seed ^ (analog.seed * 0x9E3779B97F4A7C15ULL));
  const auto& interp = interpolator();
  // zero extension so edge samples have a full set of taps
  const std::size_t pad = static_cast<std::size_t>(interp.half_width()) + 8;

  std::vector<double> padded(analog.samples.size() + 2 * pad);
  std::vector<double> times, values;
  for (std::size_t m = 0; m < M; ++m) {
    const auto& ch = cfg.channels[m];
    std::vector<double> y = ch.memory_filter ? sosfilt(ch.memory_filter->sections, analog.samples) : analog.samples;
    if (std::isfinite(ch.nonlinearity_scale)) {
      for (auto& v : y) v = apply_nonlinearity(v, ch.nonlinearity_scale);
    }
    std::fill(padded.begin(), padded.end(), 0.0);
    std::copy(y.begin(), y.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad));

    times.clear();
    for (std::size_t k = m, n = 0; k < K; k += M, ++n) {
      times.push_back(static_cast<double>(pad + k * R) + offsets[m][n] * analog.sample_rate);
    }
    values.resize(times.size());
    kernels::parallel::interpolate(interp, padded, times, values);
    for (std::size_t k = m, n = 0; k < K; k += M, ++n) {
      const int c = quantize(values[n], cfg.resolution_bits, cfg.full_scale);
      cap.clipped_nonideal += (c == hi || c == lo);
      cap.nonideal_codes[k] = static_cast<std::int16_t>(c);
    }
  }
  return cap;
}

WaveformRecord capture_waveform(std::span<const double> codes, const AdcCapture& capture) {
  WaveformRecord rec;
  rec.kind = SampleKind::real;
  rec.sample_rate = capture.config.aggregate_rate();
  rec.scale = capture.source.record_scale;
  rec.constellation_order = capture.source.constellation_order;
  rec.n_subcarriers = capture.source.n_subcarriers;
  rec.n_symbols = capture.source.n_symbols;
  rec.cyclic_prefix = static_cast<int>(std::lround(capture.source.cyclic_prefix * rec.sample_rate /
                                                   std::max(capture.source.analog_rate, 1.0)));
  rec.seed = capture.source.record_seed;
  rec.tx_symbols = capture.source.tx_symbols;
  const double lsb = capture.config.lsb();
  rec.samples.resize(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) rec.samples[i] = codes[i] * lsb;
  return rec;
}

void save_capture(const std::filesystem::path& path, const AdcCapture& cap) {
  io::Header h;
  h.set("format", std::string("deepadc-capture"));
  h.set("version", 1);
  h.set("n_samples", static_cast<std::int64_t>(cap.size()));
  h.set("n_channels", cap.config.n_channels);
  h.set("channel_rate", cap.config.channel_rate);
  h.set("resolution_bits", cap.config.resolution_bits);
  h.set("full_scale", cap.config.full_scale);
  h.set("adc_seed", cap.config.seed);
  for (std::size_t m = 0; m < cap.config.channels.size(); ++m) {
    const auto& ch = cap.config.channels[m];
    const std::string p = "ch" + std::to_string(m) + ".";
    h.set(p + "skew", ch.skew);
    h.set(p + "jitter_rms", ch.jitter_rms);
    h.set(p + "jitter_bandwidth", ch.jitter_bandwidth);
    h.set(p + "nonlinearity_scale", ch.nonlinearity_scale);
    h.set(p + "filter_order", ch.memory_filter ? ch.memory_filter->order : 0);
    h.set(p + "ripple_db", ch.memory_filter ? ch.memory_filter->ripple_db : 0.0);
    h.set(p + "corner_hz", ch.memory_filter ? ch.memory_filter->corner_hz : 0.0);
    h.set(p + "filter_rate", ch.memory_filter ? ch.memory_filter->sample_rate : 0.0);
  }
  h.set("clipped_nonideal", static_cast<std::int64_t>(cap.clipped_nonideal));
  h.set("clipped_ideal", static_cast<std::int64_t>(cap.clipped_ideal));
  h.set("constellation_order", cap.source.constellation_order);
  h.set("n_symbols", cap.source.n_symbols);
  h.set("n_subcarriers", cap.source.n_subcarriers);
  h.set("cyclic_prefix", cap.source.cyclic_prefix);
  h.set("analog_rate", cap.source.analog_rate);
  h.set("record_scale", cap.source.record_scale);
  h.set("record_seed", cap.source.record_seed);
  h.set("tx_symbols", io::join_ints(cap.source.tx_symbols));
  std::vector<std::byte> payload;
  payload.reserve(cap.size() * 4);
  for (auto c : cap.nonideal_codes) io::append_i16(payload, c);
  for (auto c : cap.ideal_codes) io::append_i16(payload, c);
  io::write_container(path, h, payload);
}

AdcCapture load_capture(const std::filesystem::path& path) {
  const auto c = io::read_container(path);
  const auto& h = c.header;
  if (h.get("format") != "deepadc-capture") throw DataError("not a capture file: " + path.string());
  if (h.get_int("version") != 1) throw DataError("unsupported capture version in " + path.string());
  AdcCapture cap;
  auto& cfg = cap.config;
  cfg.n_channels = static_cast<int>(h.get_int("n_channels"));
  cfg.channel_rate = h.get_double("channel_rate");
  cfg.resolution_bits = static_cast<int>(h.get_int("resolution_bits"));
  cfg.full_scale = h.get_double("full_scale");
  cfg.seed = h.get_uint("adc_seed");
  cfg.channels.resize(static_cast<std::size_t>(std::max(cfg.n_channels, 0)));
  for (std::size_t m = 0; m < cfg.channels.size(); ++m) {
    auto& ch = cfg.channels[m];
    const std::string p = "ch" + std::to_string(m) + ".";
    ch.skew = h.get_double(p + "skew");
    ch.jitter_rms = h.get_double(p + "jitter_rms");
    ch.jitter_bandwidth = h.get_double(p + "jitter_bandwidth");
    ch.nonlinearity_scale = h.get_double(p + "nonlinearity_scale");
    const auto order = static_cast<int>(h.get_int(p + "filter_order"));
    if (order > 0) {
      ch.memory_filter = design_chebyshev1(order, h.get_double(p + "ripple_db"), h.get_double(p + "corner_hz"),
                                           h.get_double(p + "filter_rate"));
    }
  }
  cfg.validate();
  cap.clipped_nonideal = static_cast<std::size_t>(h.get_int("clipped_nonideal"));
  cap.clipped_ideal = static_cast<std::size_t>(h.get_int("clipped_ideal"));
  cap.source.constellation_order = static_cast<int>(h.get_int("constellation_order"));
  cap.source.n_symbols = static_cast<int>(h.get_int("n_symbols"));
  cap.source.n_subcarriers = static_cast<int>(h.get_int("n_subcarriers"));
  cap.source.cyclic_prefix = static_cast<int>(h.get_int("cyclic_prefix"));
  cap.source.analog_rate = h.get_double("analog_rate");
  cap.source.record_scale = h.get_double("record_scale");
  cap.source.record_seed = h.get_uint("record_seed");
  cap.source.tx_symbols = io::split_ints(h.get("tx_symbols"));
  const auto n = static_cast<std::size_t>(h.get_int("n_samples"));
  if (c.payload.size() != 4 * n) throw DataError("capture payload size mismatch in " + path.string());
  cap.nonideal_codes.resize(n);
  cap.ideal_codes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    cap.nonideal_codes[i] = io::read_i16(c.payload, 2 * i);
    cap.ideal_codes[i] = io::read_i16(c.payload, 2 * (n + i));
  }
  return cap;
}

}  // namespace deepadc::adc
