#include "deepadc/kernels/interpolate.hpp"

#include <cmath>
#include <numbers>

#include "deepadc/error.hpp"

namespace deepadc::kernels {

namespace {

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

}  // namespace

SincInterpolator::SincInterpolator(int half_width, double beta, int table_oversampling)
    : half_width_(half_width), beta_(beta), oversampling_(table_oversampling) {
  if (half_width < 1 || table_oversampling < 1) throw InvalidInput("bad interpolator parameters");
  const int n = half_width * table_oversampling;
  table_.resize(static_cast<std::size_t>(n) + 2);
  const double norm = 1.0 / bessel_i0(beta);
  for (int i = 0; i <= n; ++i) {
    const double u = static_cast<double>(i) / n;
    table_[i] = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - u * u))) * norm;
  }
  table_[n + 1] = 0.0;
}

double SincInterpolator::window(double u) const {
  const double pos = std::abs(u) * static_cast<double>(half_width_) * oversampling_;
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= table_.size()) return 0.0;
  const double f = pos - static_cast<double>(i);
  return table_[i] + f * (table_[i + 1] - table_[i]);
}

double SincInterpolator::operator()(std::span<const double> x, double t) const {
  const double base = std::floor(t);
  const auto i0 = static_cast<std::ptrdiff_t>(base);
  const double mu = t - base;
  if (mu == 0.0) return x[static_cast<std::size_t>(i0)];
  const double s = std::sin(std::numbers::pi * mu) / std::numbers::pi;
  double acc = 0.0, wsum = 0.0;
  for (int j = -(half_width_ - 1); j <= half_width_; ++j) {
    const double d = mu - j;
    const double sign = (j & 1) ? -1.0 : 1.0;
    const double w = sign * s / d * window(d / half_width_);
    acc += w * x[static_cast<std::size_t>(i0 + j)];
    wsum += w;
  }
  return acc / wsum;
}

void check_interpolation_span(const SincInterpolator& interp, std::size_t n, std::span<const double> times) {
  const double lo = interp.min_time();
  const double hi = interp.max_time(n) + 1.0;
  for (double t : times) {
    if (!(t >= lo && t < hi)) {
      throw InvalidInput("interpolation time " + std::to_string(t) + " outside the valid span");
    }
  }
}

namespace serial {
void interpolate(const SincInterpolator& interp, std::span<const double> x, std::span<const double> times,
                 std::span<double> out) {
  if (out.size() != times.size()) throw InvalidInput("output size mismatch");
  check_interpolation_span(interp, x.size(), times);
  for (std::size_t i = 0; i < times.size(); ++i) out[i] = interp(x, times[i]);
}
}  // namespace serial

namespace parallel {
void interpolate(const SincInterpolator& interp, std::span<const double> x, std::span<const double> times,
                 std::span<double> out) {
  if (out.size() != times.size()) throw InvalidInput("output size mismatch");
  check_interpolation_span(interp, x.size(), times);
  const auto n = static_cast<std::ptrdiff_t>(times.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = interp(x, times[i]);
}
}  // namespace parallel

}  // namespace deepadc::kernels
