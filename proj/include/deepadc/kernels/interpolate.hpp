#pragma once

#include <span>
#include <vector>

namespace deepadc::kernels {

/// Kaiser-windowed sinc interpolator for evaluating a uniformly sampled,
/// band-limited signal at arbitrary (fractional-sample) times.
/// Weights are normalized to sum to one, so constants are reproduced exactly.
class SincInterpolator {
 public:
  explicit SincInterpolator(int half_width = 32, double beta = 12.0, int table_oversampling = 4096);

  int half_width() const { return half_width_; }
  /// Smallest / largest time (in samples) that has a full set of taps in a signal of length n.
  double min_time() const { return static_cast<double>(half_width_ - 1); }
  double max_time(std::size_t n) const { return static_cast<double>(n) - 1.0 - half_width_; }

  /// t in units of samples. Caller guarantees min_time() <= t < max_time(x.size()) + 1.
  double operator()(std::span<const double> x, double t) const;

 private:
  double window(double u) const;

  int half_width_;
  double beta_;
  int oversampling_;
  std::vector<double> table_;
};

/// Throws InvalidInput if any time lacks a full set of taps.
void check_interpolation_span(const SincInterpolator& interp, std::size_t n, std::span<const double> times);

namespace serial {
void interpolate(const SincInterpolator& interp, std::span<const double> x, std::span<const double> times,
                 std::span<double> out);
}

namespace parallel {
/// Same result as serial::interpolate, bit for bit; splits output samples across OpenMP threads.
void interpolate(const SincInterpolator& interp, std::span<const double> x, std::span<const double> times,
                 std::span<double> out);
}

}  // namespace deepadc::kernels
