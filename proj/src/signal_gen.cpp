#include "deepadc/signal_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "deepadc/error.hpp"
#include "deepadc/fft.hpp"

namespace deepadc::signal {

namespace {

int gray_to_binary(int g) {
  int b = g;
  for (int shift = 1; (g >> shift) != 0; ++shift) b ^= g >> shift;
  return b;
}

bool is_integer(double v, double tol = 1e-9) { return std::abs(v - std::round(v)) <= tol * std::max(1.0, std::abs(v)); }

// Carrier phase at analog sample index n0 for a record at `rate`.
double carrier_phase(double center, double rate, std::int64_t n0) {
  const double cycles = std::fmod(center / rate * static_cast<double>(n0), 1.0);
  return 2.0 * std::numbers::pi * cycles;
}

}  // namespace

QamConstellation::QamConstellation(int order) : order_(order) {
  if (std::find(std::begin(kSupportedOrders), std::end(kSupportedOrders), order) == std::end(kSupportedOrders)) {
    throw InvalidInput("unsupported QAM order " + std::to_string(order));
  }
  const int bits = static_cast<int>(std::lround(std::log2(order)));
  if (bits % 2 == 0) {
    const int side = 1 << (bits / 2);
    const int half = bits / 2;
    points_.resize(order);
    for (int idx = 0; idx < order; ++idx) {
      const int pi = gray_to_binary(idx >> half);
      const int pq = gray_to_binary(idx & (side - 1));
      points_[idx] = cplx(2.0 * pi - (side - 1), 2.0 * pq - (side - 1));
    }
  } else {
    // cross: (6c x 6c) square minus four c x c corners; 128 -> c=2, 512 -> c=4
    const int c = order == 128 ? 2 : 4;
    const int side = 6 * c;
    auto outer = [&](int p) { return p < c || p >= side - c; };
    for (int pi = 0; pi < side; ++pi) {
      for (int pq = 0; pq < side; ++pq) {
        if (outer(pi) && outer(pq)) continue;
        points_.emplace_back(2.0 * pi - (side - 1), 2.0 * pq - (side - 1));
      }
    }
  }
  double energy = 0.0;
  for (const auto& p : points_) energy += std::norm(p);
  const double norm = 1.0 / std::sqrt(energy / static_cast<double>(points_.size()));
  for (auto& p : points_) p *= norm;
  // every layout is a grid of odd integers
  min_distance_ = 2.0 * norm;
}

cplx QamConstellation::point(int index) const {
  if (index < 0 || index >= order_) {
    throw InvalidInput("QAM index " + std::to_string(index) + " out of range for order " + std::to_string(order_));
  }
  return points_[static_cast<std::size_t>(index)];
}

void OfdmConfig::validate() const {
  if (n_subcarriers < 1) throw InvalidInput("n_subcarriers must be positive");
  if (!(subcarrier_spacing > 0.0) || !(analog_rate > 0.0) || !(center_frequency > 0.0)) {
    throw InvalidInput("OFDM frequencies must be positive");
  }
  if (cyclic_prefix_samples < 0) throw InvalidInput("cyclic prefix must be non-negative");
  if (!(full_scale > 0.0) || !(peak_fraction > 0.0) || peak_fraction > 1.0) {
    throw InvalidInput("record loading must satisfy 0 < peak_fraction <= 1, full_scale > 0");
  }
  if (!is_integer(analog_rate / subcarrier_spacing)) {
    throw InvalidInput("analog_rate must be an integer multiple of the subcarrier spacing");
  }
  const double b0 = center_frequency / subcarrier_spacing - 0.5 * (n_subcarriers - 1);
  if (!is_integer(b0)) {
    throw InvalidInput("subcarriers must fall on integer multiples of the spacing");
  }
  const double half_bw = 0.5 * n_subcarriers * subcarrier_spacing;
  if (center_frequency - half_bw <= 0.0 || center_frequency + half_bw >= analog_rate / 2.0) {
    throw InvalidInput("occupied band does not fit below the simulation Nyquist frequency");
  }
}

int OfdmConfig::samples_per_symbol() const { return static_cast<int>(std::lround(analog_rate / subcarrier_spacing)); }

int OfdmConfig::first_bin() const {
  return static_cast<int>(std::lround(center_frequency / subcarrier_spacing - 0.5 * (n_subcarriers - 1)));
}

std::vector<cplx> qam_map(std::span<const int> indices, const QamConstellation& constellation) {
  std::vector<cplx> out;
  out.reserve(indices.size());
  for (int idx : indices) out.push_back(constellation.point(idx));
  return out;
}

std::vector<int> qam_slice(std::span<const cplx> estimates, const QamConstellation& constellation) {
  const auto pts = constellation.points();
  std::vector<int> out(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_idx = 0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const double d = std::norm(estimates[i] - pts[k]);
      if (d < best) {
        best = d;
        best_idx = static_cast<int>(k);
      }
    }
    out[i] = best_idx;
  }
  return out;
}

std::vector<int> random_indices(std::size_t count, int order, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(0, order - 1);
  std::vector<int> out(count);
  for (auto& v : out) v = dist(rng);
  return out;
}

WaveformRecord ofdm_modulate(std::span<const cplx> symbols, const OfdmConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto n_sub = static_cast<std::size_t>(cfg.n_subcarriers);
  if (symbols.size() % n_sub != 0) {
    throw InvalidInput("symbol count must be a multiple of n_subcarriers");
  }
  const int n_blocks = static_cast<int>(symbols.size() / n_sub);
  const int spp = cfg.samples_per_symbol();
  const int cp = cfg.cyclic_prefix_samples;
  const int b0 = cfg.first_bin();

  WaveformRecord rec;
  rec.kind = SampleKind::real;
  rec.sample_rate = cfg.analog_rate;
  rec.n_subcarriers = cfg.n_subcarriers;
  rec.n_symbols = n_blocks;
  rec.cyclic_prefix = cp;
  rec.seed = seed;
  rec.samples.resize(static_cast<std::size_t>(n_blocks) * (spp + cp));

  dsp::Fft plan(static_cast<std::size_t>(spp));
  std::vector<cplx> spec(spp), block(spp);
  for (int s = 0; s < n_blocks; ++s) {
    const std::int64_t start = static_cast<std::int64_t>(s) * (spp + cp);
    const cplx rot = std::polar(1.0, carrier_phase(cfg.center_frequency, cfg.analog_rate, start + cp));
    std::fill(spec.begin(), spec.end(), cplx{});
    for (std::size_t k = 0; k < n_sub; ++k) spec[b0 + k] = symbols[s * n_sub + k] * rot;
    plan.inverse(spec, block);
    double* out = rec.samples.data() + start;
    for (int m = 0; m < cp; ++m) out[m] = block[spp - cp + m].real();
    for (int m = 0; m < spp; ++m) out[cp + m] = block[m].real();
  }

  double peak = 0.0;
  for (double v : rec.samples) peak = std::max(peak, std::abs(v));
  rec.scale = peak > 0.0 ? cfg.peak_fraction * cfg.full_scale / 2.0 / peak : 1.0;
  for (double& v : rec.samples) v *= rec.scale;
  return rec;
}

WaveformRecord ofdm_envelope(std::span<const cplx> symbols, const OfdmConfig& cfg) {
  cfg.validate();
  const auto n_sub = static_cast<std::size_t>(cfg.n_subcarriers);
  if (symbols.size() % n_sub != 0) {
    throw InvalidInput("symbol count must be a multiple of n_subcarriers");
  }
  const int n_blocks = static_cast<int>(symbols.size() / n_sub);
  const int spp = cfg.samples_per_symbol();
  WaveformRecord rec;
  rec.kind = SampleKind::complex;
  rec.sample_rate = cfg.analog_rate;
  rec.n_subcarriers = cfg.n_subcarriers;
  rec.n_symbols = n_blocks;
  rec.samples.resize(2 * static_cast<std::size_t>(n_blocks) * spp);

  // offsets (k - (n-1)/2) are half-integer for even n: split into an integer
  // bin plus a half-bin ramp applied in time
  const double centre = 0.5 * (cfg.n_subcarriers - 1);
  const int int_shift = static_cast<int>(std::floor(centre));
  const double frac = centre - int_shift;
  dsp::Fft plan(static_cast<std::size_t>(spp));
  std::vector<cplx> spec(spp), block(spp);
  for (int s = 0; s < n_blocks; ++s) {
    std::fill(spec.begin(), spec.end(), cplx{});
    for (std::size_t k = 0; k < n_sub; ++k) {
      const int bin = ((static_cast<int>(k) - int_shift) % spp + spp) % spp;
      spec[bin] += symbols[s * n_sub + k];
    }
    plan.inverse(spec, block);
    for (int m = 0; m < spp; ++m) {
      const cplx v = block[m] * std::polar(1.0, -2.0 * std::numbers::pi * frac * m / spp);
      rec.samples[2 * (static_cast<std::size_t>(s) * spp + m)] = v.real();
      rec.samples[2 * (static_cast<std::size_t>(s) * spp + m) + 1] = v.imag();
    }
  }
  return rec;
}

WaveformRecord generate_record(int order, int n_symbols, const OfdmConfig& cfg, std::uint64_t seed) {
  if (n_symbols < 1) throw InvalidInput("n_symbols must be >= 1");
  const QamConstellation qam(order);
  auto idx = random_indices(static_cast<std::size_t>(n_symbols) * cfg.n_subcarriers, order, seed);
  const auto syms = qam_map(idx, qam);
  auto rec = ofdm_modulate(syms, cfg, seed);
  rec.constellation_order = order;
  rec.tx_symbols = std::move(idx);
  return rec;
}

std::vector<cplx> ofdm_demodulate(const WaveformRecord& record, const OfdmConfig& cfg) {
  cfg.validate();
  if (record.is_complex()) throw InvalidInput("ofdm_demodulate expects a real passband record");
  const double ratio = record.sample_rate / cfg.subcarrier_spacing;
  if (!is_integer(ratio)) throw InvalidInput("record rate is not an integer multiple of the subcarrier spacing");
  const int spp = static_cast<int>(std::lround(ratio));
  const double cp_exact = cfg.cyclic_prefix_samples * record.sample_rate / cfg.analog_rate;
  if (!is_integer(cp_exact)) throw InvalidInput("cyclic prefix does not map to whole samples at this rate");
  const int cp = static_cast<int>(std::lround(cp_exact));
  const int b0 = cfg.first_bin();
  if (b0 + cfg.n_subcarriers >= spp / 2) throw InvalidInput("record rate too low for the occupied band");
  const std::size_t block_len = static_cast<std::size_t>(spp + cp);
  if (record.samples.size() % block_len != 0) throw InvalidInput("record is not a whole number of OFDM symbols");
  const std::size_t n_blocks = record.samples.size() / block_len;

  std::vector<cplx> out;
  out.reserve(n_blocks * cfg.n_subcarriers);
  dsp::Fft plan(static_cast<std::size_t>(spp));
  std::vector<cplx> block(spp), spec(spp);
  const double norm = 2.0 / spp / record.scale;
  for (std::size_t s = 0; s < n_blocks; ++s) {
    const std::int64_t body = static_cast<std::int64_t>(s * block_len) + cp;
    for (int m = 0; m < spp; ++m) block[m] = record.samples[body + m];
    plan.forward(block, spec);
    const cplx derot = std::polar(norm, -carrier_phase(cfg.center_frequency, record.sample_rate, body));
    for (int k = 0; k < cfg.n_subcarriers; ++k) out.push_back(spec[b0 + k] * derot);
  }
  return out;
}

std::vector<double> papr_db(const WaveformRecord& record, PaprMode mode) {
  const std::size_t n = record.size();
  if (n == 0) throw InvalidInput("PAPR of an empty record");
  std::vector<double> power(n);
  if (record.is_complex()) {
    for (std::size_t i = 0; i < n; ++i) power[i] = std::norm(record.at(i));
  } else {
    // analytic signal per block: keep positive frequencies, doubled
    const std::size_t blocks = record.n_symbols > 0 ? static_cast<std::size_t>(record.n_symbols) : 1;
    if (n % blocks != 0) throw InvalidInput("record length is not a whole number of symbols");
    const std::size_t len = n / blocks;
    dsp::Fft plan(len);
    std::vector<cplx> buf(len), spec(len);
    for (std::size_t b = 0; b < blocks; ++b) {
      for (std::size_t i = 0; i < len; ++i) buf[i] = record.samples[b * len + i];
      plan.forward(buf, spec);
      for (std::size_t k = 1; k < (len + 1) / 2; ++k) spec[k] *= 2.0;
      for (std::size_t k = len / 2 + 1; k < len; ++k) spec[k] = 0.0;
      plan.inverse(spec, buf);
      for (std::size_t i = 0; i < len; ++i) power[b * len + i] = std::norm(buf[i] / static_cast<double>(len));
    }
  }

  auto papr_of = [](std::span<const double> p) {
    double peak = 0.0, sum = 0.0;
    for (double v : p) {
      peak = std::max(peak, v);
      sum += v;
    }
    if (!(peak > 0.0)) throw NumericError("PAPR undefined for an all-zero signal");
    return 10.0 * std::log10(peak / (sum / static_cast<double>(p.size())));
  };

  if (mode == PaprMode::per_record) return {papr_of(power)};
  const std::size_t blocks = record.n_symbols > 0 ? static_cast<std::size_t>(record.n_symbols) : 1;
  if (n % blocks != 0) throw InvalidInput("record length is not a whole number of symbols");
  const std::size_t len = n / blocks;
  std::vector<double> out;
  out.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) out.push_back(papr_of(std::span<const double>(power).subspan(b * len, len)));
  return out;
}

std::vector<CcdfPoint> papr_ccdf(std::span<const double> papr_values, double lo_db, double hi_db, double step_db) {
  if (papr_values.empty()) throw InvalidInput("empty PAPR sample");
  if (!(step_db > 0.0) || hi_db < lo_db) throw InvalidInput("bad CCDF grid");
  std::vector<double> sorted(papr_values.begin(), papr_values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CcdfPoint> out;
  const int steps = static_cast<int>(std::floor((hi_db - lo_db) / step_db + 1e-9));
  for (int i = 0; i <= steps; ++i) {
    const double t = lo_db + i * step_db;
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t);
    out.push_back({t, static_cast<double>(above) / static_cast<double>(sorted.size())});
  }
  return out;
}

}  // namespace deepadc::signal
