#include "deepadc/kernels/lstm.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "reduce.hpp"

namespace deepadc::kernels {

namespace {

template <typename T>
void resize_cache(const LstmShape& s, LstmCache<T>* cache) {
  if (!cache) return;
  cache->gates.resize(s.batch * s.steps * 4 * s.hidden);
  cache->cell.resize(s.batch * s.steps * s.hidden);
  cache->cell_tanh.resize(s.batch * s.steps * s.hidden);
}

template <typename T>
using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;

// Pointwise cell update from pre-activations z (4H). Writes the activated
// gates back into z and fills c, tanh(c) and h.
template <typename T>
void cell_step(std::size_t n, T* z, const T* c_prev, T* c, T* tc, T* h) {
  const auto H = static_cast<Eigen::Index>(n);
  Eigen::Map<Arr<T>> ifg(z, 2 * H), g(z + 2 * H, H), o(z + 3 * H, H);
  ifg = ifg.logistic();
  g = g.tanh();
  o = o.logistic();
  const Eigen::Map<const Arr<T>> i(z, H), f(z + H, H);
  Eigen::Map<Arr<T>> C(c, H), TC(tc, H), Hd(h, H);
  if (c_prev) {
    C = f * Eigen::Map<const Arr<T>>(c_prev, H) + i * g;
  } else {
    C = i * g;
  }
  TC = C.tanh();
  Hd = o * TC;
}

// Gradient of the pre-activations at one step. dh and dc carry the incoming
// gradients; dc is replaced by the gradient flowing to c_{t-1}.
template <typename T>
void cell_step_backward(std::size_t n, const T* a, const T* c_prev, const T* tc, const T* dh, T* dc, T* dz) {
  const auto H = static_cast<Eigen::Index>(n);
  const Eigen::Map<const Arr<T>> i(a, H), f(a + H, H), g(a + 2 * H, H), o(a + 3 * H, H);
  const Eigen::Map<const Arr<T>> TC(tc, H), dH(dh, H);
  Eigen::Map<Arr<T>> dC(dc, H);
  const Arr<T> dct = dC + dH * o * (T(1) - TC.square());
  Eigen::Map<Arr<T>>(dz, H) = dct * g * i * (T(1) - i);
  if (c_prev) {
    Eigen::Map<Arr<T>>(dz + H, H) = dct * Eigen::Map<const Arr<T>>(c_prev, H) * f * (T(1) - f);
  } else {
    Eigen::Map<Arr<T>>(dz + H, H).setZero();
  }
  Eigen::Map<Arr<T>>(dz + 2 * H, H) = dct * i * (T(1) - g.square());
  Eigen::Map<Arr<T>>(dz + 3 * H, H) = dH * TC * o * (T(1) - o);
  dC = dct * f;
}

}  // namespace

namespace serial {

template <typename T>
void lstm_forward(const LstmShape& s, const T* x, const T* w_ih, const T* w_hh, const T* b, T* y,
                  LstmCache<T>* cache) {
  const std::size_t H = s.hidden, G = 4 * H, F = s.in;
  LstmCache<T> local;
  if (!cache) cache = &local;
  resize_cache(s, cache);
  for (std::size_t n = 0; n < s.batch; ++n) {
    for (std::size_t t = 0; t < s.steps; ++t) {
      const std::size_t nt = n * s.steps + t;
      T* z = cache->gates.data() + nt * G;
      const T* xt = x + nt * F;
      const T* hp = t ? y + (nt - 1) * H : nullptr;
      for (std::size_t r = 0; r < G; ++r) {
        T acc = b[r];
        for (std::size_t k = 0; k < F; ++k) acc += w_ih[r * F + k] * xt[k];
        if (hp)
          for (std::size_t k = 0; k < H; ++k) acc += w_hh[r * H + k] * hp[k];
        z[r] = acc;
      }
      cell_step(H, z, t ? cache->cell.data() + (nt - 1) * H : nullptr, cache->cell.data() + nt * H,
                cache->cell_tanh.data() + nt * H, y + nt * H);
    }
  }
}

template <typename T>
void lstm_backward(const LstmShape& s, const T* x, const T* w_ih, const T* w_hh, const T* y,
                   const LstmCache<T>& cache, const T* dy, T* dx, T* dw_ih, T* dw_hh, T* db) {
  const std::size_t H = s.hidden, G = 4 * H, F = s.in;
  std::vector<T> dh(H), dc(H), dz(G);
  std::fill(dx, dx + s.batch * s.steps * F, T(0));
  for (std::size_t n = 0; n < s.batch; ++n) {
    std::fill(dh.begin(), dh.end(), T(0));
    std::fill(dc.begin(), dc.end(), T(0));
    for (std::size_t t = s.steps; t-- > 0;) {
      const std::size_t nt = n * s.steps + t;
      for (std::size_t j = 0; j < H; ++j) dh[j] += dy[nt * H + j];
      cell_step_backward(H, cache.gates.data() + nt * G, t ? cache.cell.data() + (nt - 1) * H : nullptr,
                         cache.cell_tanh.data() + nt * H, dh.data(), dc.data(), dz.data());
      const T* xt = x + nt * F;
      const T* hp = t ? y + (nt - 1) * H : nullptr;
      std::fill(dh.begin(), dh.end(), T(0));
      for (std::size_t r = 0; r < G; ++r) {
        db[r] += dz[r];
        for (std::size_t k = 0; k < F; ++k) {
          dw_ih[r * F + k] += dz[r] * xt[k];
          dx[nt * F + k] += dz[r] * w_ih[r * F + k];
        }
        for (std::size_t k = 0; k < H; ++k) {
          if (hp) dw_hh[r * H + k] += dz[r] * hp[k];
          dh[k] += dz[r] * w_hh[r * H + k];
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
template <typename T>
using Strided = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStrided = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// One element at a time: its result never depends on the rest of the batch.
template <typename T>
void forward_independent(const LstmShape& s, const T* x, const T* w_ih, const T* w_hh, const T* b, T* y) {
  const auto H = static_cast<Eigen::Index>(s.hidden), G = 4 * H, F = static_cast<Eigen::Index>(s.in);
  const auto Ts = static_cast<Eigen::Index>(s.steps);
  const Eigen::Map<const RowMat<T>> Wih(w_ih, G, F), Whh(w_hh, G, H);
  const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(b, G);
#pragma omp parallel
  {
    RowMat<T> Z(Ts, G);
    Vec<T> rec(G);
    std::vector<T> c(s.steps * s.hidden), tc(s.steps * s.hidden);
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(s.batch); ++n) {
      const std::size_t base = static_cast<std::size_t>(n) * s.steps;
      Z.noalias() = Eigen::Map<const RowMat<T>>(x + base * F, Ts, F) * Wih.transpose();
      Z.rowwise() += bias;
      for (Eigen::Index t = 0; t < Ts; ++t) {
        if (t) {
          rec.noalias() = Whh * Eigen::Map<const Vec<T>>(y + (base + t - 1) * H, H);
          Z.row(t) += rec.transpose();
        }
        cell_step(s.hidden, Z.row(t).data(), t ? c.data() + (t - 1) * H : nullptr, c.data() + t * H,
                  tc.data() + t * H, y + (base + t) * H);
      }
    }
  }
}

}  // namespace

template <typename T>
void lstm_forward(const LstmShape& s, const T* x, const T* w_ih, const T* w_hh, const T* b, T* y,
                  LstmCache<T>* cache) {
  if (!cache) {
    forward_independent(s, x, w_ih, w_hh, b, y);
    return;
  }
  // training: the recurrent product is one GEMM per chunk and step
  const auto H = static_cast<Eigen::Index>(s.hidden), G = 4 * H, F = static_cast<Eigen::Index>(s.in);
  const auto Ts = static_cast<Eigen::Index>(s.steps);
  const Eigen::Map<const RowMat<T>> Wih(w_ih, G, F), Whh(w_hh, G, H);
  const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(b, G);
  resize_cache(s, cache);
  const std::size_t chunks = detail::chunk_count(s.batch);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ch = 0; ch < static_cast<std::ptrdiff_t>(chunks); ++ch) {
    const std::size_t n0 = static_cast<std::size_t>(ch) * detail::kChunk;
    const auto nb = static_cast<Eigen::Index>(std::min(s.batch, n0 + detail::kChunk) - n0);
    Eigen::Map<RowMat<T>> Z(cache->gates.data() + n0 * s.steps * G, nb * Ts, G);
    Z.noalias() = Eigen::Map<const RowMat<T>>(x + n0 * s.steps * F, nb * Ts, F) * Wih.transpose();
    Z.rowwise() += bias;
    for (Eigen::Index t = 0; t < Ts; ++t) {
      if (t) {
        Strided<T> Zt(cache->gates.data() + (n0 * s.steps + t) * G, nb, G, Eigen::OuterStride<>(Ts * G));
        const ConstStrided<T> Hp(y + (n0 * s.steps + t - 1) * H, nb, H, Eigen::OuterStride<>(Ts * H));
        Zt.noalias() += Hp * Whh.transpose();
      }
      for (Eigen::Index e = 0; e < nb; ++e) {
        const std::size_t nt = (n0 + e) * s.steps + t;
        cell_step(s.hidden, cache->gates.data() + nt * G, t ? cache->cell.data() + (nt - 1) * H : nullptr,
                  cache->cell.data() + nt * H, cache->cell_tanh.data() + nt * H, y + nt * H);
      }
    }
  }
}

template <typename T>
void lstm_backward(const LstmShape& s, const T* x, const T* w_ih, const T* w_hh, const T* y,
                   const LstmCache<T>& cache, const T* dy, T* dx, T* dw_ih, T* dw_hh, T* db) {
  const auto H = static_cast<Eigen::Index>(s.hidden), G = 4 * H, F = static_cast<Eigen::Index>(s.in);
  const auto Ts = static_cast<Eigen::Index>(s.steps);
  const Eigen::Map<const RowMat<T>> Wih(w_ih, G, F), Whh(w_hh, G, H);
  const std::size_t chunks = detail::chunk_count(s.batch);
  std::vector<std::vector<T>> pih(chunks), phh(chunks), pb(chunks);
#pragma omp parallel
  {
    RowMat<T> dZ, Hp, dH, dC;
#pragma omp for schedule(static)
    for (std::ptrdiff_t ch = 0; ch < static_cast<std::ptrdiff_t>(chunks); ++ch) {
      const std::size_t n0 = static_cast<std::size_t>(ch) * detail::kChunk;
      const auto nb = static_cast<Eigen::Index>(std::min(s.batch, n0 + detail::kChunk) - n0);
      dZ.resize(nb * Ts, G);
      Hp.resize(nb * Ts, H);
      dH.setZero(nb, H);
      dC.setZero(nb, H);
      for (Eigen::Index t = Ts; t-- > 0;) {
        for (Eigen::Index e = 0; e < nb; ++e) {
          const std::size_t nt = (n0 + e) * s.steps + t;
          dH.row(e) += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(dy + nt * H, H);
          cell_step_backward(s.hidden, cache.gates.data() + nt * G, t ? cache.cell.data() + (nt - 1) * H : nullptr,
                             cache.cell_tanh.data() + nt * H, dH.row(e).data(), dC.row(e).data(),
                             dZ.row(e * Ts + t).data());
        }
        const Strided<T> dZt(dZ.data() + t * G, nb, G, Eigen::OuterStride<>(Ts * G));
        dH.noalias() = dZt * Whh;
      }
      for (Eigen::Index e = 0; e < nb; ++e) {
        Hp.row(e * Ts).setZero();
        if (Ts > 1) {
          Hp.middleRows(e * Ts + 1, Ts - 1) = Eigen::Map<const RowMat<T>>(y + (n0 + e) * s.steps * H, Ts - 1, H);
        }
      }
      const Eigen::Map<const RowMat<T>> X(x + n0 * s.steps * F, nb * Ts, F);
      Eigen::Map<RowMat<T>>(dx + n0 * s.steps * F, nb * Ts, F).noalias() = dZ * Wih;
      pih[ch].resize(static_cast<std::size_t>(G * F));
      phh[ch].resize(static_cast<std::size_t>(G * H));
      pb[ch].resize(static_cast<std::size_t>(G));
      Eigen::Map<RowMat<T>>(pih[ch].data(), G, F).noalias() = dZ.transpose() * X;
      Eigen::Map<RowMat<T>>(phh[ch].data(), G, H).noalias() = dZ.transpose() * Hp;
      std::fill(pb[ch].begin(), pb[ch].end(), T(0));
      for (Eigen::Index r = 0; r < dZ.rows(); ++r) {
        const T* row = dZ.data() + r * G;
        for (Eigen::Index g = 0; g < G; ++g) pb[ch][static_cast<std::size_t>(g)] += row[g];
      }
    }
  }
  detail::reduce_partials(pih, dw_ih, static_cast<std::size_t>(G * F));
  detail::reduce_partials(phh, dw_hh, static_cast<std::size_t>(G * H));
  detail::reduce_partials(pb, db, static_cast<std::size_t>(G));
}

}  // namespace parallel

#define DEEPADC_LSTM_INSTANTIATE(NS, T)                                                                     \
  template void NS::lstm_forward<T>(const LstmShape&, const T*, const T*, const T*, const T*, T*,          \
                                    LstmCache<T>*);                                                         \
  template void NS::lstm_backward<T>(const LstmShape&, const T*, const T*, const T*, const T*,             \
                                     const LstmCache<T>&, const T*, T*, T*, T*, T*);

DEEPADC_LSTM_INSTANTIATE(serial, float)
DEEPADC_LSTM_INSTANTIATE(serial, double)
DEEPADC_LSTM_INSTANTIATE(parallel, float)
DEEPADC_LSTM_INSTANTIATE(parallel, double)

}  // namespace deepadc::kernels
