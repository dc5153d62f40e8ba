#pragma once

#include <cstddef>

namespace deepadc::kernels {

/// Stride-1 1-D convolution over [batch, in_ch, length] with zero padding.
/// Weights are [out_ch, in_ch, kernel], bias [out_ch].
struct Conv1dShape {
  std::size_t batch, in_ch, out_ch, length, kernel, padding;
  std::size_t out_length() const { return length + 2 * padding - kernel + 1; }
};

// Backward writes dx and accumulates into dw and db.

namespace serial {
template <typename T>
void conv1d_forward(const Conv1dShape& s, const T* x, const T* w, const T* b, T* y);
template <typename T>
void conv1d_backward(const Conv1dShape& s, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);
}  // namespace serial

namespace parallel {
/// im2col + GEMM per batch element, elements split across threads. Each
/// element's output depends only on that element, so results do not depend
/// on batch composition. Gradient reduction uses a fixed chunk order.
template <typename T>
void conv1d_forward(const Conv1dShape& s, const T* x, const T* w, const T* b, T* y);
template <typename T>
void conv1d_backward(const Conv1dShape& s, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);
}  // namespace parallel

}  // namespace deepadc::kernels
