#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "deepadc/container.hpp"
#include "deepadc/nn/layers.hpp"

namespace deepadc::nn {

template <typename T>
class Network {
 public:
  Network() = default;
  /// Layers built from specs, parameters drawn from `seed`.
  Network(std::span<const LayerSpec> specs, std::uint64_t seed);

  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  /// Backpropagates dloss/doutput through every layer; parameter grads accumulate.
  void backward(const Tensor<T>& grad);
  void zero_grad();

  std::vector<Parameter<T>*> parameters();
  /// (qualified name, tensor) for every running-state buffer.
  std::vector<std::pair<std::string, Tensor<T>*>> buffers();
  std::vector<LayerSpec> specs() const;
  std::size_t parameter_count() const;
  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_[i]; }
  const Layer<T>& layer(std::size_t i) const { return *layers_[i]; }

  /// Copy with every parameter and buffer converted to U.
  template <typename U>
  Network<U> cast() const;

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// Mean squared error and its gradient 2 (pred - target) / N.
template <typename T>
double mse_loss(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>* grad);

template <typename T>
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Throws NumericError naming the parameter if any gradient or updated value is non-finite.
  virtual void step(std::span<Parameter<T>* const> params) = 0;
};

template <typename T>
class Adam final : public Optimizer<T> {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::span<Parameter<T>* const> params) override;
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

template <typename T>
class Sgd final : public Optimizer<T> {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(std::span<Parameter<T>* const> params) override;

 private:
  double lr_;
};

/// Writes layer specs and tensor names/shapes into `header` ("layers",
/// "tensor.N") and appends the float32 tensors in the same order to `payload`.
void serialize(Network<float>& net, io::Header& header, std::vector<std::byte>& payload);
/// Inverse of serialize; `offset` is advanced past the consumed payload.
Network<float> deserialize(const io::Header& header, std::span<const std::byte> payload, std::size_t& offset);

}  // namespace deepadc::nn
