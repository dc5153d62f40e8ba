#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace deepadc::kernels::detail {

/// Batch elements per gradient partial. Fixed so the summation order does not
/// depend on the thread count.
inline constexpr std::size_t kChunk = 16;

inline std::size_t chunk_count(std::size_t batch) { return (batch + kChunk - 1) / kChunk; }

/// out[i] += sum over chunks (in chunk order) of partial[c][i].
template <typename T>
void reduce_partials(const std::vector<std::vector<T>>& partial, T* out, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    T acc = T(0);
    for (const auto& p : partial) acc += p[i];
    out[i] += acc;
  }
}

/// Sum of f(0..n-1) over eight fixed lanes, accumulated in f's result type.
/// Unlike Eigen reductions the order does not depend on buffer alignment.
template <typename F>
double lane_sum(std::size_t n, F&& f) {
  using T = decltype(f(std::size_t{0}));
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t j = 0; j < 8; ++j) acc[j] += f(i + j);
  for (std::size_t j = 0; j < 8 && i + j < n; ++j) acc[j] += f(i + j);
  return ((static_cast<double>(acc[0]) + acc[4]) + (static_cast<double>(acc[1]) + acc[5])) +
         ((static_cast<double>(acc[2]) + acc[6]) + (static_cast<double>(acc[3]) + acc[7]));
}

}  // namespace deepadc::kernels::detail
