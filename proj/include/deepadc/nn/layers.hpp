#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "deepadc/kernels/lstm.hpp"
#include "deepadc/nn/tensor.hpp"

namespace deepadc::nn {

enum class Mode { train, infer };

enum class LayerKind { conv1d, batchnorm1d, relu, transpose, lstm, flatten, linear };

/// Layer hyperparameters. in/out are channels (conv1d), features (lstm,
/// linear) or channel count (batchnorm1d); unused fields stay zero.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in = 0, out = 0, kernel = 0, padding = 0;

  std::string to_string() const;
  static LayerSpec parse(const std::string& text);
  std::size_t parameter_count() const;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

/// A named non-trainable state tensor (batchnorm running statistics).
template <typename T>
struct Buffer {
  std::string name;
  Tensor<T>* tensor;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerSpec spec() const = 0;
  /// In train mode the layer keeps what backward needs.
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  /// Gradient w.r.t. the last train-mode input; parameter gradients accumulate.
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
  virtual std::vector<Parameter<T>*> parameters() { return {}; }
  virtual std::vector<Buffer<T>> buffers() { return {}; }
};

/// Weights uniform in +-1/sqrt(fan_in) (conv, linear, lstm with fan_in = hidden),
/// batchnorm scale 1 and shift 0, lstm forget-gate bias +1.
template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, std::mt19937_64& rng);

template <typename T>
class Conv1d final : public Layer<T> {
 public:
  Conv1d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t padding);
  LayerSpec spec() const override { return {LayerKind::conv1d, in_, out_, kernel_, padding_}; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::vector<Parameter<T>*> parameters() override { return {&weight, &bias}; }

  Parameter<T> weight, bias;

 private:
  std::size_t in_, out_, kernel_, padding_;
  Tensor<T> input_;
};

template <typename T>
class BatchNorm1d final : public Layer<T> {
 public:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEps = 1e-5;

  explicit BatchNorm1d(std::size_t channels);
  LayerSpec spec() const override { return {LayerKind::batchnorm1d, channels_, channels_, 0, 0}; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::vector<Parameter<T>*> parameters() override { return {&gamma, &beta}; }
  std::vector<Buffer<T>> buffers() override {
    return {{"running_mean", &running_mean}, {"running_var", &running_var}, {"tracked", &tracked}};
  }

  Parameter<T> gamma, beta;
  Tensor<T> running_mean, running_var;
  /// Number of running-stat updates so far (single element); zero means uninitialized.
  Tensor<T> tracked;

 private:
  std::size_t channels_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

template <typename T>
class Relu final : public Layer<T> {
 public:
  LayerSpec spec() const override { return {LayerKind::relu}; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& dy) override;

 private:
  Tensor<T> output_;
};

/// [batch, a, b] -> [batch, b, a]
template <typename T>
class Transpose final : public Layer<T> {
 public:
  LayerSpec spec() const override { return {LayerKind::transpose}; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
};

template <typename T>
class Lstm final : public Layer<T> {
 public:
  Lstm(std::size_t in, std::size_t hidden);
  LayerSpec spec() const override { return {LayerKind::lstm, in_, hidden_, 0, 0}; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::vector<Parameter<T>*> parameters() override { return {&w_ih, &w_hh, &bias}; }

  Parameter<T> w_ih, w_hh, bias;

 private:
  std::size_t in_, hidden_;
  Tensor<T> input_, output_;
  kernels::LstmCache<T> cache_;
};

/// [batch, ...] -> [batch, product]
template <typename T>
class Flatten final : public Layer<T> {
 public:
  LayerSpec spec() const override { return {LayerKind::flatten}; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& dy) override;

 private:
  Shape shape_;
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(std::size_t in, std::size_t out);
  LayerSpec spec() const override { return {LayerKind::linear, in_, out_, 0, 0}; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::vector<Parameter<T>*> parameters() override { return {&weight, &bias}; }

  Parameter<T> weight, bias;

 private:
  std::size_t in_, out_;
  Tensor<T> input_;
};

}  // namespace deepadc::nn
