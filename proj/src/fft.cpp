#include "deepadc/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <utility>

#include "deepadc/error.hpp"

namespace deepadc::dsp {

namespace {
// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Fft::Fft(std::size_t n) : n_(n) {
  if (n == 0) throw InvalidInput("FFT length must be positive");
  std::lock_guard lock(planner_mutex());
  buf_ = reinterpret_cast<cplx*>(fftw_malloc(sizeof(fftw_complex) * n));
  auto* b = reinterpret_cast<fftw_complex*>(buf_);
  fwd_ = fftw_plan_dft_1d(static_cast<int>(n), b, b, FFTW_FORWARD, FFTW_ESTIMATE);
  inv_ = fftw_plan_dft_1d(static_cast<int>(n), b, b, FFTW_BACKWARD, FFTW_ESTIMATE);
}

Fft::~Fft() { release(); }

Fft::Fft(Fft&& other) noexcept
    : n_(std::exchange(other.n_, 0)),
      buf_(std::exchange(other.buf_, nullptr)),
      fwd_(std::exchange(other.fwd_, nullptr)),
      inv_(std::exchange(other.inv_, nullptr)) {}

Fft& Fft::operator=(Fft&& other) noexcept {
  if (this != &other) {
    release();
    n_ = std::exchange(other.n_, 0);
    buf_ = std::exchange(other.buf_, nullptr);
    fwd_ = std::exchange(other.fwd_, nullptr);
    inv_ = std::exchange(other.inv_, nullptr);
  }
  return *this;
}

void Fft::release() noexcept {
  if (!buf_) return;
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(inv_));
  fftw_free(buf_);
  buf_ = nullptr;
}

void Fft::forward(std::span<const cplx> in, std::span<cplx> out) {
  if (in.size() != n_ || out.size() != n_) throw InvalidInput("FFT length mismatch");
  std::copy(in.begin(), in.end(), buf_);
  fftw_execute(static_cast<fftw_plan>(fwd_));
  std::copy(buf_, buf_ + n_, out.begin());
}

void Fft::inverse(std::span<const cplx> in, std::span<cplx> out) {
  if (in.size() != n_ || out.size() != n_) throw InvalidInput("FFT length mismatch");
  std::copy(in.begin(), in.end(), buf_);
  fftw_execute(static_cast<fftw_plan>(inv_));
  std::copy(buf_, buf_ + n_, out.begin());
}

std::vector<cplx> fft(std::span<const cplx> x) {
  std::vector<cplx> out(x.size());
  Fft plan(x.size());
  plan.forward(x, out);
  return out;
}

std::vector<cplx> fft(std::span<const double> x) {
  std::vector<cplx> tmp(x.begin(), x.end());
  return fft(std::span<const cplx>(tmp));
}

std::vector<cplx> ifft(std::span<const cplx> x) {
  std::vector<cplx> out(x.size());
  Fft plan(x.size());
  plan.inverse(x, out);
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (auto& v : out) v *= inv_n;
  return out;
}

}  // namespace deepadc::dsp
