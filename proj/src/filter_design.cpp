#include "deepadc/filter_design.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "deepadc/error.hpp"

namespace deepadc::adc {

namespace {

using cplx = std::complex<double>;

// Pole k of a normalized all-pole prototype: -sigma*sin(theta_k) + j*omega*cos(theta_k).
// Butterworth is sigma = omega = 1.
std::vector<Sos> discretize_prototype(int order, double sigma, double omega, double corner_hz,
                                      double sample_rate, double dc_gain) {
  const double fs2 = 2.0 * sample_rate;
  const double warped = fs2 * std::tan(std::numbers::pi * corner_hz / sample_rate);
  std::vector<Sos> sections;
  for (int k = 1; k <= order / 2; ++k) {
    const double theta = (2.0 * k - 1.0) * std::numbers::pi / (2.0 * order);
    const cplx p = warped * cplx(-sigma * std::sin(theta), omega * std::cos(theta));
    const cplx z = (fs2 + p) / (fs2 - p);
    Sos s;
    s.a1 = -2.0 * z.real();
    s.a2 = std::norm(z);
    const double g = (1.0 + s.a1 + s.a2) / 4.0;  // unit DC gain per section
    s.b0 = g;
    s.b1 = 2.0 * g;
    s.b2 = g;
    sections.push_back(s);
  }
  if (order % 2 == 1) {
    const double p = -warped * sigma;
    const double z = (fs2 + p) / (fs2 - p);
    Sos s;
    s.a1 = -z;
    const double g = (1.0 - z) / 2.0;
    s.b0 = g;
    s.b1 = g;
    sections.push_back(s);
  }
  sections.front().b0 *= dc_gain;
  sections.front().b1 *= dc_gain;
  sections.front().b2 *= dc_gain;
  return sections;
}

void check_common(int order, double corner_hz, double sample_rate) {
  if (order < 1) throw InvalidInput("filter order must be >= 1");
  if (!(sample_rate > 0.0)) throw InvalidInput("sample rate must be positive");
  if (!(corner_hz > 0.0) || corner_hz >= sample_rate / 2.0) {
    throw InvalidInput("filter corner must lie in (0, Nyquist)");
  }
}

}  // namespace

FilterDesign design_chebyshev1(int order, double ripple_db, double corner_hz, double sample_rate) {
  check_common(order, corner_hz, sample_rate);
  if (!(ripple_db > 0.0)) throw InvalidInput("Chebyshev ripple must be positive");
  const double eps = std::sqrt(std::pow(10.0, ripple_db / 10.0) - 1.0);
  const double mu = std::asinh(1.0 / eps) / order;
  const double dc_gain = order % 2 == 0 ? 1.0 / std::sqrt(1.0 + eps * eps) : 1.0;
  FilterDesign d;
  d.order = order;
  d.ripple_db = ripple_db;
  d.corner_hz = corner_hz;
  d.sample_rate = sample_rate;
  d.sections = discretize_prototype(order, std::sinh(mu), std::cosh(mu), corner_hz, sample_rate, dc_gain);
  return d;
}

std::vector<Sos> design_butterworth(int order, double corner_hz, double sample_rate) {
  check_common(order, corner_hz, sample_rate);
  return discretize_prototype(order, 1.0, 1.0, corner_hz, sample_rate, 1.0);
}

std::complex<double> frequency_response(std::span<const Sos> sections, double freq_hz, double sample_rate) {
  const cplx z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / sample_rate);
  const cplx z2 = z1 * z1;
  cplx h = 1.0;
  for (const auto& s : sections) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return h;
}

double max_pole_radius(std::span<const Sos> sections) {
  double r = 0.0;
  for (const auto& s : sections) {
    // roots of z^2 + a1 z + a2
    const cplx disc = std::sqrt(cplx(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    r = std::max({r, std::abs((-s.a1 + disc) / 2.0), std::abs((-s.a1 - disc) / 2.0)});
  }
  return r;
}

std::vector<double> sosfilt(std::span<const Sos> sections, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  for (const auto& s : sections) {
    double w1 = 0.0, w2 = 0.0;
    for (auto& v : y) {
      const double in = v;
      const double out = s.b0 * in + w1;
      w1 = s.b1 * in - s.a1 * out + w2;
      w2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

}  // namespace deepadc::adc
