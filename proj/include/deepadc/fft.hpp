#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace deepadc::dsp {

using cplx = std::complex<double>;

/// Complex DFT of a fixed length, backed by an FFTW plan.
/// forward: X[k] = sum x[n] e^{-j2pi kn/N}; inverse is unnormalized.
/// An instance is not safe for concurrent use; create one per thread.
class Fft {
 public:
  explicit Fft(std::size_t n);
  ~Fft();
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  Fft(Fft&& other) noexcept;
  Fft& operator=(Fft&& other) noexcept;

  std::size_t size() const { return n_; }
  void forward(std::span<const cplx> in, std::span<cplx> out);
  void inverse(std::span<const cplx> in, std::span<cplx> out);

 private:
  void release() noexcept;

  std::size_t n_ = 0;
  cplx* buf_ = nullptr;
  void* fwd_ = nullptr;
  void* inv_ = nullptr;
};

std::vector<cplx> fft(std::span<const cplx> x);
std::vector<cplx> fft(std::span<const double> x);
/// Normalized inverse (divides by N).
std::vector<cplx> ifft(std::span<const cplx> x);

}  // namespace deepadc::dsp
