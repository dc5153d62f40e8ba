#include "deepadc/nn/network.hpp"

#include <cmath>
#include <sstream>

#include "deepadc/error.hpp"

namespace deepadc::nn {

template <typename T>
Network<T>::Network(std::span<const LayerSpec> specs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& s : specs) layers_.push_back(make_layer<T>(s, rng));
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> h = x;
  for (auto& l : layers_) h = l->forward(h, mode);
  return h;
}

template <typename T>
void Network<T>::backward(const Tensor<T>& grad) {
  Tensor<T> g = grad;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto* p : parameters()) std::fill(p->grad.data.begin(), p->grad.data.end(), T(0));
}

template <typename T>
std::vector<Parameter<T>*> Network<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& l : layers_)
    for (auto* p : l->parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Network<T>::buffers() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    for (auto& b : layers_[i]->buffers()) out.emplace_back(std::to_string(i) + "." + b.name, b.tensor);
  return out;
}

template <typename T>
std::vector<LayerSpec> Network<T>::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_) out.push_back(l->spec());
  return out;
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l->spec().parameter_count();
  return n;
}

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
  const auto sp = specs();
  Network<U> out(sp, 0);
  auto& self = const_cast<Network<T>&>(*this);
  auto src = self.parameters();
  auto dst = out.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i]->value = src[i]->value.template cast<U>();
    dst[i]->grad = src[i]->grad.template cast<U>();
  }
  auto sb = self.buffers();
  auto db = out.buffers();
  for (std::size_t i = 0; i < sb.size(); ++i) *db[i].second = sb[i].second->template cast<U>();
  return out;
}

template <typename T>
double mse_loss(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>* grad) {
  if (pred.shape != target.shape) {
    throw InvalidInput("mse_loss: shape mismatch " + shape_string(pred.shape) + " vs " + shape_string(target.shape));
  }
  if (pred.size() == 0) throw InvalidInput("mse_loss: empty input");
  const double n = static_cast<double>(pred.size());
  double sum = 0.0;
  if (grad) *grad = Tensor<T>(pred.shape);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - target.data[i];
    sum += d * d;
    if (grad) grad->data[i] = static_cast<T>(2.0 * d / n);
  }
  return sum / n;
}

namespace {
template <typename T>
void check_finite(std::span<Parameter<T>* const> params, bool grads, std::size_t step) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = grads ? params[i]->grad : params[i]->value;
    if (!t.all_finite()) {
      throw NumericError(std::string("non-finite ") + (grads ? "gradient" : "value") + " in parameter #" +
                         std::to_string(i) + " (" + params[i]->name + ", shape " + shape_string(t.shape) +
                         ") at optimizer step " + std::to_string(step));
    }
  }
}
}  // namespace

template <typename T>
void Adam<T>::step(std::span<Parameter<T>* const> params) {
  check_finite(params, true, static_cast<std::size_t>(t_ + 1));
  if (m_.size() != params.size()) {
    m_.assign(params.size(), {});
    v_.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->value.size(), T(0));
      v_[i].assign(params[i]->value.size(), T(0));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
  const T step = static_cast<T>(lr_ / c1);
  const T sqrt_c2 = static_cast<T>(std::sqrt(c2));
  const T eps = static_cast<T>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i]->value.data;
    const auto& g = params[i]->grad.data;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * g[k];
      v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
      w[k] -= step * m[k] / (std::sqrt(v[k]) / sqrt_c2 + eps);
    }
  }
  check_finite(params, false, static_cast<std::size_t>(t_));
}

template <typename T>
void Sgd<T>::step(std::span<Parameter<T>* const> params) {
  check_finite(params, true, 0);
  const T lr = static_cast<T>(lr_);
  for (auto* p : params)
    for (std::size_t k = 0; k < p->value.size(); ++k) p->value.data[k] -= lr * p->grad.data[k];
  check_finite(params, false, 0);
}

void serialize(Network<float>& net, io::Header& header, std::vector<std::byte>& payload) {
  std::string layers;
  for (const auto& s : net.specs()) layers += (layers.empty() ? "" : ";") + s.to_string();
  header.set("layers", layers);
  std::vector<std::pair<std::string, const Tensor<float>*>> tensors;
  for (std::size_t i = 0; i < net.size(); ++i)
    for (auto* p : net.layer(i).parameters()) tensors.emplace_back(std::to_string(i) + "." + p->name, &p->value);
  for (auto& [name, t] : net.buffers()) tensors.emplace_back(name, t);
  header.set("n_tensors", static_cast<std::int64_t>(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    header.set("tensor." + std::to_string(i), tensors[i].first + " " + shape_string(tensors[i].second->shape));
    for (float v : tensors[i].second->data) io::append_f32(payload, v);
  }
}

Network<float> deserialize(const io::Header& header, std::span<const std::byte> payload, std::size_t& offset) {
  std::vector<LayerSpec> specs;
  std::stringstream ss(header.get("layers"));
  for (std::string item; std::getline(ss, item, ';');) specs.push_back(LayerSpec::parse(item));
  Network<float> net(specs, 0);
  std::vector<std::pair<std::string, Tensor<float>*>> tensors;
  for (std::size_t i = 0; i < net.size(); ++i)
    for (auto* p : net.layer(i).parameters()) tensors.emplace_back(std::to_string(i) + "." + p->name, &p->value);
  for (auto& b : net.buffers()) tensors.push_back(b);
  if (header.get_int("n_tensors") != static_cast<std::int64_t>(tensors.size())) {
    throw DataError("model tensor count does not match its layer list");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::string expect = tensors[i].first + " " + shape_string(tensors[i].second->shape);
    if (header.get("tensor." + std::to_string(i)) != expect) {
      throw DataError("model tensor " + std::to_string(i) + " is '" + header.get("tensor." + std::to_string(i)) +
                      "', expected '" + expect + "'");
    }
    auto& data = tensors[i].second->data;
    if (offset + 4 * data.size() > payload.size()) throw DataError("model payload is truncated");
    for (auto& v : data) {
      v = io::read_f32(payload, offset);
      offset += 4;
    }
  }
  return net;
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;
template Network<float> Network<float>::cast<float>() const;
template double mse_loss<float>(const Tensor<float>&, const Tensor<float>&, Tensor<float>*);
template double mse_loss<double>(const Tensor<double>&, const Tensor<double>&, Tensor<double>*);
template class Adam<float>;
template class Adam<double>;
template class Sgd<float>;
template class Sgd<double>;

}  // namespace deepadc::nn
