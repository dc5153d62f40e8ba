#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deepadc/adc_model.hpp"

namespace deepadc::baseline {

struct DelayEstimate {
  /// observed(t) ~ reference(t - delay), in samples.
  double delay = 0.0;
  /// Normalized cross-correlation at the integer peak, in [-1, 1].
  double coefficient = 0.0;
};

/// Cross-correlation argmax (by magnitude) over |lag| < N/2, refined with a
/// 3-point parabola. Both inputs are mean-removed first.
DelayEstimate estimate_delay(std::span<const double> reference, std::span<const double> observed);

/// Linear-phase ramp applied in the frequency domain after a raised-cosine
/// taper of min(1% of N, kEdgeExclusion) samples at each end. Positive
/// delay moves content later in time. Requires |delay| < N/4.
std::vector<double> apply_fractional_delay(std::span<const double> signal, double delay);

struct ShiftCorrection {
  DelayEstimate estimate;
  std::vector<double> corrected;  // code units
};

/// The single global time-shift baseline: align the non-ideal capture to the ideal one.
ShiftCorrection shift_correct(const adc::AdcCapture& capture);

}  // namespace deepadc::baseline
