#include "deepadc/baseline_calib.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "deepadc/common.hpp"
#include "deepadc/error.hpp"
#include "deepadc/fft.hpp"

namespace deepadc::baseline {

namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

DelayEstimate estimate_delay(std::span<const double> reference, std::span<const double> observed) {
  const std::size_t n = reference.size();
  if (observed.size() != n) throw InvalidInput("estimate_delay: length mismatch");
  if (n < 1024) throw InvalidInput("estimate_delay: need at least 1024 samples");

  auto centred = [](std::span<const double> x, double& energy) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    std::vector<double> out(x.size());
    energy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      out[i] = x[i] - mean;
      energy += out[i] * out[i];
    }
    return out;
  };
  double e_ref = 0.0, e_obs = 0.0;
  const auto r = centred(reference, e_ref);
  const auto o = centred(observed, e_obs);
  if (!(e_ref > 0.0) || !(e_obs > 0.0)) throw NumericError("estimate_delay: zero-variance input");

  const std::size_t p = next_pow2(2 * n);
  std::vector<dsp::cplx> rf(p), of(p);
  std::copy(r.begin(), r.end(), rf.begin());
  std::copy(o.begin(), o.end(), of.begin());
  dsp::Fft plan(p);
  plan.forward(rf, rf);
  plan.forward(of, of);
  for (std::size_t k = 0; k < p; ++k) of[k] *= std::conj(rf[k]);
  plan.inverse(of, of);

  const auto max_lag = static_cast<std::ptrdiff_t>((n - 1) / 2);
  auto corr = [&](std::ptrdiff_t lag) {
    const auto idx = static_cast<std::size_t>((lag % static_cast<std::ptrdiff_t>(p) + static_cast<std::ptrdiff_t>(p)) %
                                              static_cast<std::ptrdiff_t>(p));
    return of[idx].real() / static_cast<double>(p);
  };
  std::ptrdiff_t best = 0;
  double best_mag = -1.0;
  for (std::ptrdiff_t lag = -max_lag; lag <= max_lag; ++lag) {
    const double m = std::abs(corr(lag));
    if (m > best_mag) {
      best_mag = m;
      best = lag;
    }
  }
  const double peak = corr(best);
  const double sign = peak < 0.0 ? -1.0 : 1.0;
  double frac = 0.0;
  if (best > -max_lag && best < max_lag) {
    const double ym = sign * corr(best - 1), y0 = sign * peak, yp = sign * corr(best + 1);
    const double denom = ym - 2.0 * y0 + yp;
    if (denom < 0.0) frac = 0.5 * (ym - yp) / denom;
  }
  DelayEstimate est;
  est.delay = static_cast<double>(best) + frac;
  est.coefficient = std::clamp(peak / std::sqrt(e_ref * e_obs), -1.0, 1.0);
  return est;
}

std::vector<double> apply_fractional_delay(std::span<const double> signal, double delay) {
  const std::size_t n = signal.size();
  if (n == 0) return {};
  if (!(std::abs(delay) < static_cast<double>(n) / 4.0)) {
    throw InvalidInput("apply_fractional_delay: |delay| must be below a quarter of the length");
  }
  const std::size_t taper = std::min<std::size_t>(
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.01 * static_cast<double>(n)))),
      kEdgeExclusion);
  // zero padding keeps delayed content from wrapping onto the other end
  const auto guard = static_cast<std::size_t>(std::ceil(std::abs(delay))) + kEdgeExclusion;
  const std::size_t p = next_pow2(n + 2 * guard);

  std::vector<dsp::cplx> buf(p);
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    const std::size_t edge = std::min(i, n - 1 - i);
    if (edge < taper && n > 2 * taper) {
      w = 0.5 * (1.0 - std::cos(std::numbers::pi * (static_cast<double>(edge) + 0.5) / static_cast<double>(taper)));
    }
    buf[guard + i] = signal[i] * w;
  }
  dsp::Fft plan(p);
  plan.forward(buf, buf);
  const double two_pi_d = 2.0 * std::numbers::pi * delay / static_cast<double>(p);
  for (std::size_t k = 0; k < p; ++k) {
    if (2 * k == p) {
      buf[k] *= std::cos(std::numbers::pi * delay);  // Nyquist bin stays real
      continue;
    }
    const double f = k < p / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(p);
    buf[k] *= std::polar(1.0, -two_pi_d * f);
  }
  plan.inverse(buf, buf);
  std::vector<double> out(n);
  const double inv_p = 1.0 / static_cast<double>(p);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[guard + i].real() * inv_p;
  return out;
}

ShiftCorrection shift_correct(const adc::AdcCapture& capture) {
  std::vector<double> ideal(capture.ideal_codes.begin(), capture.ideal_codes.end());
  std::vector<double> nonideal(capture.nonideal_codes.begin(), capture.nonideal_codes.end());
  ShiftCorrection out;
  out.estimate = estimate_delay(ideal, nonideal);
  out.corrected = apply_fractional_delay(nonideal, -out.estimate.delay);
  return out;
}

}  // namespace deepadc::baseline
