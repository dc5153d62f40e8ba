#pragma once

// Central finite-difference oracle for layer gradients (double precision).

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "deepadc/nn/layers.hpp"
#include "deepadc/nn/network.hpp"

namespace deepadc::testing {

using nn::Tensor;

inline Tensor<double> random_tensor(nn::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data) v = u(rng);
  return t;
}

/// ||a - n|| / max(||a||, ||n||), 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& n) {
  double d = 0, na = 0, nn_ = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn_ += n[i] * n[i];
  }
  const double denom = std::sqrt(std::max(na, nn_));
  return denom == 0.0 ? 0.0 : std::sqrt(d) / denom;
}

struct GradCheck {
  double input_error = 0.0;
  double param_error = 0.0;
  double worst() const { return std::max(input_error, param_error); }
};

/// Scalar objective sum(r * layer(x)) with a fixed random r. Every input
/// element and every parameter element is perturbed by +-h.
inline GradCheck check_layer(nn::Layer<double>& layer, Tensor<double> x, std::mt19937_64& rng, double h = 1e-5) {
  const auto y0 = layer.forward(x, nn::Mode::train);
  const auto r = random_tensor(y0.shape, rng);
  auto objective = [&](const Tensor<double>& in) {
    const auto y = layer.forward(in, nn::Mode::train);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r.data[i] * y.data[i];
    return s;
  };
  for (auto* p : layer.parameters()) std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
  layer.forward(x, nn::Mode::train);
  const auto dx = layer.backward(r);

  GradCheck out;
  std::vector<double> num(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x.data[i];
    x.data[i] = keep + h;
    const double fp = objective(x);
    x.data[i] = keep - h;
    const double fm = objective(x);
    x.data[i] = keep;
    num[i] = (fp - fm) / (2 * h);
  }
  out.input_error = relative_error(dx.data, num);

  std::vector<double> ana, nump;
  for (auto* p : layer.parameters()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double keep = p->value.data[i];
      p->value.data[i] = keep + h;
      const double fp = objective(x);
      p->value.data[i] = keep - h;
      const double fm = objective(x);
      p->value.data[i] = keep;
      nump.push_back((fp - fm) / (2 * h));
      ana.push_back(p->grad.data[i]);
    }
  }
  out.param_error = relative_error(ana, nump);
  return out;
}

/// Gradient of mean squared error against finite differences.
inline double check_mse(const Tensor<double>& pred, const Tensor<double>& target, double h = 1e-5) {
  Tensor<double> grad;
  nn::mse_loss(pred, target, &grad);
  auto p = pred;
  std::vector<double> num(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p.data[i];
    p.data[i] = keep + h;
    const double fp = nn::mse_loss(p, target, static_cast<Tensor<double>*>(nullptr));
    p.data[i] = keep - h;
    const double fm = nn::mse_loss(p, target, static_cast<Tensor<double>*>(nullptr));
    p.data[i] = keep;
    num[i] = (fp - fm) / (2 * h);
  }
  return relative_error(grad.data, num);
}

/// Input whose entries stay at least `margin` away from zero, so ReLU kinks are not straddled.
inline Tensor<double> relu_safe_tensor(nn::Shape shape, std::mt19937_64& rng, double margin = 1e-2) {
  auto t = random_tensor(std::move(shape), rng);
  for (auto& v : t.data)
    if (std::abs(v) < margin) v = v < 0 ? -margin : margin;
  return t;
}

/// Randomized gradient-check case for one layer kind: random small shape,
/// freshly initialized layer. Returns the worst relative error.
inline double random_layer_case(nn::LayerKind kind, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> small(1, 4), len(3, 8);
  nn::LayerSpec spec;
  spec.kind = kind;
  Tensor<double> x;
  const std::size_t b = small(rng) + 1;
  switch (kind) {
    case nn::LayerKind::conv1d:
      spec.in = small(rng), spec.out = small(rng), spec.kernel = 3, spec.padding = 1;
      x = random_tensor({b, spec.in, len(rng)}, rng);
      break;
    case nn::LayerKind::batchnorm1d:
      spec.in = spec.out = small(rng);
      x = random_tensor({b, spec.in, len(rng)}, rng);
      break;
    case nn::LayerKind::relu:
      x = relu_safe_tensor({b, small(rng), len(rng)}, rng);
      break;
    case nn::LayerKind::lstm:
      spec.in = small(rng), spec.out = small(rng);
      x = random_tensor({b, len(rng), spec.in}, rng);
      break;
    case nn::LayerKind::linear:
      spec.in = small(rng) * 3, spec.out = small(rng);
      x = random_tensor({b, spec.in}, rng);
      break;
    default:
      x = random_tensor({b, small(rng), len(rng)}, rng);
  }
  auto layer = nn::make_layer<double>(spec, rng);
  if (kind == nn::LayerKind::batchnorm1d) {
    auto* bn = dynamic_cast<nn::BatchNorm1d<double>*>(layer.get());
    for (auto& v : bn->gamma.value.data) v = 0.5 + std::uniform_real_distribution<double>(0, 1)(rng);
    for (auto& v : bn->beta.value.data) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  }
  if (kind == nn::LayerKind::lstm || kind == nn::LayerKind::conv1d || kind == nn::LayerKind::linear) {
    // non-trivial biases
    for (auto* p : layer->parameters())
      if (p->name == "bias")
        for (auto& v : p->value.data) v += std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  }
  return check_layer(*layer, x, rng).worst();
}

}  // namespace deepadc::testing
