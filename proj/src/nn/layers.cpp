#include "deepadc/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "deepadc/error.hpp"
#include "deepadc/kernels/conv1d.hpp"
#include "../kernels/reduce.hpp"

namespace deepadc::nn {

namespace {

constexpr std::pair<LayerKind, const char*> kKindNames[] = {
    {LayerKind::conv1d, "conv1d"},   {LayerKind::batchnorm1d, "batchnorm1d"}, {LayerKind::relu, "relu"},
    {LayerKind::transpose, "transpose"}, {LayerKind::lstm, "lstm"},       {LayerKind::flatten, "flatten"},
    {LayerKind::linear, "linear"}};

template <typename T>
Parameter<T> make_param(std::string name, Shape shape) {
  return {std::move(name), Tensor<T>(shape), Tensor<T>(shape)};
}

template <typename T>
void fill_uniform(Tensor<T>& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : t.data) v = static_cast<T>(u(rng));
}

void expect_rank(const Shape& s, std::size_t rank, const char* layer) {
  if (s.size() != rank) {
    throw InvalidInput(std::string(layer) + ": expected a rank-" + std::to_string(rank) + " input, got " +
                       shape_string(s));
  }
}

template <typename T>
void expect_train_input(const Tensor<T>& cached, const Tensor<T>& dy, const char* layer) {
  if (cached.size() == 0) throw InvalidInput(std::string(layer) + ": backward without a train-mode forward");
  (void)dy;
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstArr = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using MutArr = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;

}  // namespace

std::string LayerSpec::to_string() const {
  std::string name;
  for (auto [k, n] : kKindNames)
    if (k == kind) name = n;
  switch (kind) {
    case LayerKind::conv1d:
      return name + ":" + std::to_string(in) + ":" + std::to_string(out) + ":" + std::to_string(kernel) + ":" +
             std::to_string(padding);
    case LayerKind::batchnorm1d:
      return name + ":" + std::to_string(in);
    case LayerKind::lstm:
    case LayerKind::linear:
      return name + ":" + std::to_string(in) + ":" + std::to_string(out);
    default:
      return name;
  }
}

LayerSpec LayerSpec::parse(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.empty()) throw DataError("empty layer spec");
  LayerSpec s;
  bool found = false;
  for (auto [k, n] : kKindNames) {
    if (parts[0] == n) {
      s.kind = k;
      found = true;
    }
  }
  if (!found) throw DataError("unknown layer kind: " + parts[0]);
  std::vector<std::size_t> v;
  try {
    for (std::size_t i = 1; i < parts.size(); ++i) v.push_back(std::stoul(parts[i]));
  } catch (const std::exception&) {
    throw DataError("malformed layer spec: " + text);
  }
  auto need = [&](std::size_t n) {
    if (v.size() != n) throw DataError("malformed layer spec: " + text);
  };
  switch (s.kind) {
    case LayerKind::conv1d:
      need(4);
      s.in = v[0], s.out = v[1], s.kernel = v[2], s.padding = v[3];
      break;
    case LayerKind::batchnorm1d:
      need(1);
      s.in = s.out = v[0];
      break;
    case LayerKind::lstm:
    case LayerKind::linear:
      need(2);
      s.in = v[0], s.out = v[1];
      break;
    default:
      need(0);
  }
  return s;
}

std::size_t LayerSpec::parameter_count() const {
  switch (kind) {
    case LayerKind::conv1d: return out * (in * kernel + 1);
    case LayerKind::batchnorm1d: return 2 * in;
    case LayerKind::lstm: return 4 * (in * out + out * out + out);
    case LayerKind::linear: return out * (in + 1);
    default: return 0;
  }
}

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, std::mt19937_64& rng) {
  switch (spec.kind) {
    case LayerKind::conv1d: {
      auto l = std::make_unique<Conv1d<T>>(spec.in, spec.out, spec.kernel, spec.padding);
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec.in * spec.kernel));
      fill_uniform(l->weight.value, bound, rng);
      fill_uniform(l->bias.value, bound, rng);
      return l;
    }
    case LayerKind::batchnorm1d:
      return std::make_unique<BatchNorm1d<T>>(spec.in);
    case LayerKind::relu:
      return std::make_unique<Relu<T>>();
    case LayerKind::transpose:
      return std::make_unique<Transpose<T>>();
    case LayerKind::lstm: {
      auto l = std::make_unique<Lstm<T>>(spec.in, spec.out);
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec.out));
      fill_uniform(l->w_ih.value, bound, rng);
      fill_uniform(l->w_hh.value, bound, rng);
      for (std::size_t j = 0; j < spec.out; ++j) l->bias.value.data[spec.out + j] = T(1);
      return l;
    }
    case LayerKind::flatten:
      return std::make_unique<Flatten<T>>();
    case LayerKind::linear: {
      auto l = std::make_unique<Linear<T>>(spec.in, spec.out);
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec.in));
      fill_uniform(l->weight.value, bound, rng);
      fill_uniform(l->bias.value, bound, rng);
      return l;
    }
  }
  throw InvalidInput("unknown layer kind");
}

// ---- Conv1d

template <typename T>
Conv1d<T>::Conv1d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t padding)
    : weight(make_param<T>("weight", {out, in, kernel})),
      bias(make_param<T>("bias", {out})),
      in_(in),
      out_(out),
      kernel_(kernel),
      padding_(padding) {
  if (in == 0 || out == 0 || kernel == 0) throw InvalidInput("conv1d: channels and kernel must be positive");
}

template <typename T>
Tensor<T> Conv1d<T>::forward(const Tensor<T>& x, Mode mode) {
  expect_rank(x.shape, 3, "conv1d");
  if (x.dim(1) != in_) throw InvalidInput("conv1d: expected " + std::to_string(in_) + " input channels");
  if (x.dim(2) + 2 * padding_ < kernel_) throw InvalidInput("conv1d: input shorter than the kernel");
  const kernels::Conv1dShape s{x.dim(0), in_, out_, x.dim(2), kernel_, padding_};
  Tensor<T> y({s.batch, out_, s.out_length()});
  kernels::parallel::conv1d_forward(s, x.ptr(), weight.value.ptr(), bias.value.ptr(), y.ptr());
  if (mode == Mode::train) input_ = x;
  return y;
}

template <typename T>
Tensor<T> Conv1d<T>::backward(const Tensor<T>& dy) {
  expect_train_input(input_, dy, "conv1d");
  const kernels::Conv1dShape s{input_.dim(0), in_, out_, input_.dim(2), kernel_, padding_};
  if (dy.shape != Shape{s.batch, out_, s.out_length()}) throw InvalidInput("conv1d: gradient shape mismatch");
  Tensor<T> dx(input_.shape);
  kernels::parallel::conv1d_backward(s, input_.ptr(), weight.value.ptr(), dy.ptr(), dx.ptr(), weight.grad.ptr(),
                                     bias.grad.ptr());
  return dx;
}

// ---- BatchNorm1d

template <typename T>
BatchNorm1d<T>::BatchNorm1d(std::size_t channels)
    : gamma(make_param<T>("gamma", {channels})),
      beta(make_param<T>("beta", {channels})),
      running_mean({channels}, T(0)),
      running_var({channels}, T(1)),
      tracked({1}, T(0)),
      channels_(channels) {
  std::fill(gamma.value.data.begin(), gamma.value.data.end(), T(1));
}

template <typename T>
Tensor<T> BatchNorm1d<T>::forward(const Tensor<T>& x, Mode mode) {
  expect_rank(x.shape, 3, "batchnorm1d");
  if (x.dim(1) != channels_) throw InvalidInput("batchnorm1d: channel count mismatch");
  const std::size_t B = x.dim(0), C = channels_, L = x.dim(2);
  Tensor<T> y(x.shape);
  if (mode == Mode::infer) {
    if (tracked.data[0] == T(0)) throw InvalidInput("batchnorm1d: running statistics are uninitialized");
    for (std::size_t c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(running_var.data[c]) + kEps);
      const T scale = static_cast<T>(gamma.value.data[c] * inv);
      const T shift = static_cast<T>(beta.value.data[c] - gamma.value.data[c] * running_mean.data[c] * inv);
      for (std::size_t b = 0; b < B; ++b) {
        const T* xi = x.ptr() + (b * C + c) * L;
        T* yi = y.ptr() + (b * C + c) * L;
        for (std::size_t t = 0; t < L; ++t) yi[t] = scale * xi[t] + shift;
      }
    }
    return y;
  }
  const std::size_t n = B * L;
  if (n < 2) throw InvalidInput("batchnorm1d: train mode needs at least two values per channel");
  xhat_ = Tensor<T>(x.shape);
  inv_std_.assign(C, T(0));
  const auto Li = static_cast<Eigen::Index>(L);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(C); ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    auto block = [&](const Tensor<T>& t, std::size_t b) { return ConstArr<T>(t.ptr() + (b * C + c) * L, Li); };
    double sum = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const T* xi = x.ptr() + (b * C + c) * L;
      sum += kernels::detail::lane_sum(L, [xi](std::size_t t) { return xi[t]; });
    }
    const double mean = sum / static_cast<double>(n);
    const T tmean = static_cast<T>(mean);
    double ss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const T* xi = x.ptr() + (b * C + c) * L;
      ss += kernels::detail::lane_sum(L, [xi, tmean](std::size_t t) { return (xi[t] - tmean) * (xi[t] - tmean); });
    }
    const double var = ss / static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kEps);
    inv_std_[c] = static_cast<T>(inv);
    const T tm = static_cast<T>(mean), ti = static_cast<T>(inv);
    const T g = gamma.value.data[c], sh = beta.value.data[c];
    for (std::size_t b = 0; b < B; ++b) {
      MutArr<T> xh(xhat_.ptr() + (b * C + c) * L, Li);
      xh = (block(x, b) - tm) * ti;
      MutArr<T>(y.ptr() + (b * C + c) * L, Li) = xh * g + sh;
    }
    running_mean.data[c] = static_cast<T>((1.0 - kMomentum) * running_mean.data[c] + kMomentum * mean);
    running_var.data[c] = static_cast<T>((1.0 - kMomentum) * running_var.data[c] +
                                         kMomentum * var * static_cast<double>(n) / static_cast<double>(n - 1));
  }
  tracked.data[0] += T(1);
  return y;
}

template <typename T>
Tensor<T> BatchNorm1d<T>::backward(const Tensor<T>& dy) {
  expect_train_input(xhat_, dy, "batchnorm1d");
  if (dy.shape != xhat_.shape) throw InvalidInput("batchnorm1d: gradient shape mismatch");
  const std::size_t B = dy.dim(0), C = channels_, L = dy.dim(2), n = B * L;
  const auto Li = static_cast<Eigen::Index>(L);
  Tensor<T> dx(dy.shape);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(C); ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    double sdy = 0.0, sdyx = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const T* g = dy.ptr() + (b * C + c) * L;
      const T* xh = xhat_.ptr() + (b * C + c) * L;
      sdy += kernels::detail::lane_sum(L, [g](std::size_t t) { return g[t]; });
      sdyx += kernels::detail::lane_sum(L, [g, xh](std::size_t t) { return g[t] * xh[t]; });
    }
    gamma.grad.data[c] += static_cast<T>(sdyx);
    beta.grad.data[c] += static_cast<T>(sdy);
    const T k = static_cast<T>(gamma.value.data[c] * static_cast<double>(inv_std_[c]) / static_cast<double>(n));
    const T tn = static_cast<T>(n), ts = static_cast<T>(sdy), tx = static_cast<T>(sdyx);
    for (std::size_t b = 0; b < B; ++b) {
      const ConstArr<T> g(dy.ptr() + (b * C + c) * L, Li), xh(xhat_.ptr() + (b * C + c) * L, Li);
      MutArr<T>(dx.ptr() + (b * C + c) * L, Li) = k * (tn * g - ts - xh * tx);
    }
  }
  return dx;
}

// ---- ReLU

template <typename T>
Tensor<T> Relu<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = std::max(x.data[i], T(0));
  if (mode == Mode::train) output_ = y;
  return y;
}

template <typename T>
Tensor<T> Relu<T>::backward(const Tensor<T>& dy) {
  if (dy.shape != output_.shape) throw InvalidInput("relu: gradient shape mismatch");
  Tensor<T> dx(dy.shape);
  for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] = output_.data[i] > T(0) ? dy.data[i] : T(0);
  return dx;
}

// ---- Transpose

namespace {
template <typename T>
Tensor<T> swap_last_two(const Tensor<T>& x) {
  expect_rank(x.shape, 3, "transpose");
  const std::size_t B = x.dim(0), A = x.dim(1), C = x.dim(2);
  Tensor<T> y({B, C, A});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < A; ++i)
      for (std::size_t j = 0; j < C; ++j) y.data[(b * C + j) * A + i] = x.data[(b * A + i) * C + j];
  return y;
}
}  // namespace

template <typename T>
Tensor<T> Transpose<T>::forward(const Tensor<T>& x, Mode) {
  return swap_last_two(x);
}

template <typename T>
Tensor<T> Transpose<T>::backward(const Tensor<T>& dy) {
  return swap_last_two(dy);
}

// ---- LSTM

template <typename T>
Lstm<T>::Lstm(std::size_t in, std::size_t hidden)
    : w_ih(make_param<T>("w_ih", {4 * hidden, in})),
      w_hh(make_param<T>("w_hh", {4 * hidden, hidden})),
      bias(make_param<T>("bias", {4 * hidden})),
      in_(in),
      hidden_(hidden) {
  if (in == 0 || hidden == 0) throw InvalidInput("lstm: sizes must be positive");
}

template <typename T>
Tensor<T> Lstm<T>::forward(const Tensor<T>& x, Mode mode) {
  expect_rank(x.shape, 3, "lstm");
  if (x.dim(2) != in_) throw InvalidInput("lstm: expected " + std::to_string(in_) + " input features");
  const kernels::LstmShape s{x.dim(0), x.dim(1), in_, hidden_};
  Tensor<T> y({s.batch, s.steps, hidden_});
  const bool train = mode == Mode::train;
  kernels::parallel::lstm_forward(s, x.ptr(), w_ih.value.ptr(), w_hh.value.ptr(), bias.value.ptr(), y.ptr(),
                                  train ? &cache_ : nullptr);
  if (train) {
    input_ = x;
    output_ = y;
  }
  return y;
}

template <typename T>
Tensor<T> Lstm<T>::backward(const Tensor<T>& dy) {
  expect_train_input(input_, dy, "lstm");
  if (dy.shape != output_.shape) throw InvalidInput("lstm: gradient shape mismatch");
  const kernels::LstmShape s{input_.dim(0), input_.dim(1), in_, hidden_};
  Tensor<T> dx(input_.shape);
  kernels::parallel::lstm_backward(s, input_.ptr(), w_ih.value.ptr(), w_hh.value.ptr(), output_.ptr(), cache_,
                                   dy.ptr(), dx.ptr(), w_ih.grad.ptr(), w_hh.grad.ptr(), bias.grad.ptr());
  return dx;
}

// ---- Flatten

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() < 2) throw InvalidInput("flatten: expected a batched input");
  if (mode == Mode::train) shape_ = x.shape;
  Tensor<T> y;
  y.shape = {x.dim(0), x.size() / std::max<std::size_t>(x.dim(0), 1)};
  y.data = x.data;
  return y;
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& dy) {
  if (dy.size() != shape_size(shape_)) throw InvalidInput("flatten: gradient shape mismatch");
  Tensor<T> dx;
  dx.shape = shape_;
  dx.data = dy.data;
  return dx;
}

// ---- Linear

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out)
    : weight(make_param<T>("weight", {out, in})), bias(make_param<T>("bias", {out})), in_(in), out_(out) {
  if (in == 0 || out == 0) throw InvalidInput("linear: sizes must be positive");
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, Mode mode) {
  expect_rank(x.shape, 2, "linear");
  if (x.dim(1) != in_) throw InvalidInput("linear: expected " + std::to_string(in_) + " input features");
  const std::size_t B = x.dim(0);
  Tensor<T> y({B, out_});
  const Eigen::Map<const RowMat<T>> W(weight.value.ptr(), out_, in_);
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.value.ptr(), out_);
  // one matrix-vector product per element keeps rows independent of the batch
  for (std::size_t n = 0; n < B; ++n) {
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> yn(y.ptr() + n * out_, out_);
    yn.noalias() = W * Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(x.ptr() + n * in_, in_);
    yn += b;
  }
  if (mode == Mode::train) input_ = x;
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& dy) {
  expect_train_input(input_, dy, "linear");
  const std::size_t B = input_.dim(0);
  if (dy.shape != Shape{B, out_}) throw InvalidInput("linear: gradient shape mismatch");
  const Eigen::Map<const RowMat<T>> W(weight.value.ptr(), out_, in_);
  const Eigen::Map<const RowMat<T>> X(input_.ptr(), B, in_), dY(dy.ptr(), B, out_);
  Eigen::Map<RowMat<T>>(weight.grad.ptr(), out_, in_).noalias() += dY.transpose() * X;
  for (std::size_t o = 0; o < out_; ++o) {
    const T* g = dy.ptr() + o;
    const std::size_t stride = out_;
    bias.grad.data[o] += static_cast<T>(kernels::detail::lane_sum(B, [g, stride](std::size_t b) { return g[b * stride]; }));
  }
  Tensor<T> dx(input_.shape);
  Eigen::Map<RowMat<T>>(dx.ptr(), B, in_).noalias() = dY * W;
  return dx;
}

#define DEEPADC_LAYERS_INSTANTIATE(T)                                                      \
  template std::unique_ptr<Layer<T>> make_layer<T>(const LayerSpec&, std::mt19937_64&);    \
  template class Conv1d<T>;                                                                \
  template class BatchNorm1d<T>;                                                           \
  template class Relu<T>;                                                                  \
  template class Transpose<T>;                                                             \
  template class Lstm<T>;                                                                  \
  template class Flatten<T>;                                                               \
  template class Linear<T>;

DEEPADC_LAYERS_INSTANTIATE(float)
DEEPADC_LAYERS_INSTANTIATE(double)

}  // namespace deepadc::nn
