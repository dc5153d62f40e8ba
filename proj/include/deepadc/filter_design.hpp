#pragma once

#include <complex>
#include <span>
#include <vector>

namespace deepadc::adc {

/// One biquad, a0 normalized to 1:
/// H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct Sos {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

struct FilterDesign {
  int order = 0;
  double ripple_db = 0.0;
  double corner_hz = 0.0;
  double sample_rate = 0.0;
  std::vector<Sos> sections;
};

/// Chebyshev type I low-pass. The analog prototype is discretized with the
/// bilinear transform, pre-warped so |H(corner_hz)| = -ripple_db exactly.
/// Even orders have DC gain -ripple_db; odd orders 0 dB.
FilterDesign design_chebyshev1(int order, double ripple_db, double corner_hz, double sample_rate);

/// Butterworth low-pass (-3 dB at corner_hz), same discretization.
std::vector<Sos> design_butterworth(int order, double corner_hz, double sample_rate);

std::complex<double> frequency_response(std::span<const Sos> sections, double freq_hz, double sample_rate);

/// Largest pole radius over all sections; < 1 means stable.
double max_pole_radius(std::span<const Sos> sections);

/// Cascade of direct-form-II-transposed biquads, zero initial state.
std::vector<double> sosfilt(std::span<const Sos> sections, std::span<const double> x);

}  // namespace deepadc::adc
