#pragma once

#include <cstddef>
#include <vector>

namespace deepadc::kernels {

/// Single-layer LSTM over [batch, steps, in] -> [batch, steps, hidden], zero
/// initial state. Gate blocks of the 4*hidden dimension are ordered i, f, g, o.
/// w_ih is [4H, in], w_hh is [4H, H], bias [4H].
struct LstmShape {
  std::size_t batch, steps, in, hidden;
};

/// Forward activations kept for backpropagation through time.
template <typename T>
struct LstmCache {
  std::vector<T> gates;   // [batch, steps, 4H], after the nonlinearities
  std::vector<T> cell;    // [batch, steps, H]
  std::vector<T> cell_tanh;
};

namespace serial {
template <typename T>
void lstm_forward(const LstmShape& s, const T* x, const T* w_ih, const T* w_hh, const T* b, T* y,
                  LstmCache<T>* cache);
template <typename T>
void lstm_backward(const LstmShape& s, const T* x, const T* w_ih, const T* w_hh, const T* y,
                   const LstmCache<T>& cache, const T* dy, T* dx, T* dw_ih, T* dw_hh, T* db);
}  // namespace serial

namespace parallel {
template <typename T>
void lstm_forward(const LstmShape& s, const T* x, const T* w_ih, const T* w_hh, const T* b, T* y,
                  LstmCache<T>* cache);
template <typename T>
void lstm_backward(const LstmShape& s, const T* x, const T* w_ih, const T* w_hh, const T* y,
                   const LstmCache<T>& cache, const T* dy, T* dx, T* dw_ih, T* dw_hh, T* db);
}  // namespace parallel

}  // namespace deepadc::kernels
