#include "deepadc/kernels/conv1d.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <vector>

#include "reduce.hpp"

namespace deepadc::kernels {

namespace serial {

template <typename T>
void conv1d_forward(const Conv1dShape& s, const T* x, const T* w, const T* b, T* y) {
  const std::size_t L = s.length, Lo = s.out_length(), K = s.kernel;
  for (std::size_t n = 0; n < s.batch; ++n) {
    for (std::size_t o = 0; o < s.out_ch; ++o) {
      for (std::size_t t = 0; t < Lo; ++t) {
        T acc = b[o];
        for (std::size_t i = 0; i < s.in_ch; ++i) {
          for (std::size_t k = 0; k < K; ++k) {
            const auto p = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(s.padding);
            if (p < 0 || p >= static_cast<std::ptrdiff_t>(L)) continue;
            acc += w[(o * s.in_ch + i) * K + k] * x[(n * s.in_ch + i) * L + p];
          }
        }
        y[(n * s.out_ch + o) * Lo + t] = acc;
      }
    }
  }
}

template <typename T>
void conv1d_backward(const Conv1dShape& s, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const std::size_t L = s.length, Lo = s.out_length(), K = s.kernel;
  std::fill(dx, dx + s.batch * s.in_ch * L, T(0));
  for (std::size_t n = 0; n < s.batch; ++n) {
    for (std::size_t o = 0; o < s.out_ch; ++o) {
      for (std::size_t t = 0; t < Lo; ++t) {
        const T g = dy[(n * s.out_ch + o) * Lo + t];
        db[o] += g;
        for (std::size_t i = 0; i < s.in_ch; ++i) {
          for (std::size_t k = 0; k < K; ++k) {
            const auto p = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(s.padding);
            if (p < 0 || p >= static_cast<std::ptrdiff_t>(L)) continue;
            dw[(o * s.in_ch + i) * K + k] += g * x[(n * s.in_ch + i) * L + p];
            dx[(n * s.in_ch + i) * L + p] += g * w[(o * s.in_ch + i) * K + k];
          }
        }
      }
    }
  }
}

}  // namespace serial

namespace parallel {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// col[(i*K + k), t] = x[i, t + k - padding]
template <typename T>
void im2col(const Conv1dShape& s, const T* x, RowMat<T>& col) {
  const std::size_t L = s.length, Lo = s.out_length(), K = s.kernel;
  col.resize(static_cast<Eigen::Index>(s.in_ch * K), static_cast<Eigen::Index>(Lo));
  for (std::size_t i = 0; i < s.in_ch; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      T* row = col.data() + (i * K + k) * Lo;
      for (std::size_t t = 0; t < Lo; ++t) {
        const auto p = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(s.padding);
        row[t] = (p < 0 || p >= static_cast<std::ptrdiff_t>(L)) ? T(0) : x[i * L + p];
      }
    }
  }
}

template <typename T>
void col2im(const Conv1dShape& s, const RowMat<T>& col, T* dx) {
  const std::size_t L = s.length, Lo = s.out_length(), K = s.kernel;
  std::fill(dx, dx + s.in_ch * L, T(0));
  for (std::size_t i = 0; i < s.in_ch; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      const T* row = col.data() + (i * K + k) * Lo;
      for (std::size_t t = 0; t < Lo; ++t) {
        const auto p = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(s.padding);
        if (p >= 0 && p < static_cast<std::ptrdiff_t>(L)) dx[i * L + p] += row[t];
      }
    }
  }
}

}  // namespace

template <typename T>
void conv1d_forward(const Conv1dShape& s, const T* x, const T* w, const T* b, T* y) {
  const auto Co = static_cast<Eigen::Index>(s.out_ch);
  const auto CK = static_cast<Eigen::Index>(s.in_ch * s.kernel);
  const auto Lo = static_cast<Eigen::Index>(s.out_length());
  const Eigen::Map<const RowMat<T>> W(w, Co, CK);
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(b, Co);
#pragma omp parallel
  {
    RowMat<T> col;
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(s.batch); ++n) {
      im2col(s, x + n * s.in_ch * s.length, col);
      Eigen::Map<RowMat<T>> Y(y + n * s.out_ch * Lo, Co, Lo);
      Y.noalias() = W * col;
      Y.colwise() += bias;
    }
  }
}

template <typename T>
void conv1d_backward(const Conv1dShape& s, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const auto Co = static_cast<Eigen::Index>(s.out_ch);
  const auto CK = static_cast<Eigen::Index>(s.in_ch * s.kernel);
  const auto Lo = static_cast<Eigen::Index>(s.out_length());
  const Eigen::Map<const RowMat<T>> W(w, Co, CK);
  const std::size_t chunks = detail::chunk_count(s.batch);
  std::vector<std::vector<T>> pw(chunks), pb(chunks);
#pragma omp parallel
  {
    RowMat<T> col, dcol;
#pragma omp for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
      pw[c].assign(static_cast<std::size_t>(Co * CK), T(0));
      pb[c].assign(s.out_ch, T(0));
      Eigen::Map<RowMat<T>> dW(pw[c].data(), Co, CK);
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dB(pb[c].data(), Co);
      const std::size_t n1 = std::min(s.batch, (c + 1) * detail::kChunk);
      for (std::size_t n = c * detail::kChunk; n < n1; ++n) {
        im2col(s, x + n * s.in_ch * s.length, col);
        const Eigen::Map<const RowMat<T>> dY(dy + n * s.out_ch * Lo, Co, Lo);
        dW.noalias() += dY * col.transpose();
        for (Eigen::Index o = 0; o < Co; ++o) {
          const T* row = dy + n * s.out_ch * Lo + o * Lo;
          dB[o] += static_cast<T>(detail::lane_sum(static_cast<std::size_t>(Lo), [row](std::size_t t) { return row[t]; }));
        }
        dcol.noalias() = W.transpose() * dY;
        col2im(s, dcol, dx + n * s.in_ch * s.length);
      }
    }
  }
  detail::reduce_partials(pw, dw, static_cast<std::size_t>(Co * CK));
  detail::reduce_partials(pb, db, s.out_ch);
}

}  // namespace parallel

#define DEEPADC_CONV1D_INSTANTIATE(NS, T)                                                    \
  template void NS::conv1d_forward<T>(const Conv1dShape&, const T*, const T*, const T*, T*); \
  template void NS::conv1d_backward<T>(const Conv1dShape&, const T*, const T*, const T*, T*, T*, T*);

DEEPADC_CONV1D_INSTANTIATE(serial, float)
DEEPADC_CONV1D_INSTANTIATE(serial, double)
DEEPADC_CONV1D_INSTANTIATE(parallel, float)
DEEPADC_CONV1D_INSTANTIATE(parallel, double)

}  // namespace deepadc::kernels
