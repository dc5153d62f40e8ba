#include "deepadc/calibrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "deepadc/container.hpp"
#include "deepadc/error.hpp"

namespace deepadc::calib {

using nn::LayerKind;
using nn::LayerSpec;

void WindowConfig::validate() const {
  if (window_length < 3) throw InvalidInput("window_length must be at least 3");
  if (current_index >= window_length) throw InvalidInput("current_index must lie inside the window");
}

std::vector<LayerSpec> network_specs(std::size_t window_length) {
  return {
      {LayerKind::conv1d, 1, 64, 3, 1},   {LayerKind::batchnorm1d, 64, 64},   {LayerKind::relu},
      {LayerKind::conv1d, 64, 64, 3, 1},  {LayerKind::batchnorm1d, 64, 64},   {LayerKind::relu},
      {LayerKind::conv1d, 64, 128, 3, 1}, {LayerKind::batchnorm1d, 128, 128}, {LayerKind::relu},
      {LayerKind::conv1d, 128, 128, 3, 1}, {LayerKind::batchnorm1d, 128, 128}, {LayerKind::relu},
      {LayerKind::transpose},
      {LayerKind::lstm, 128, 64},         {LayerKind::lstm, 64, 32},          {LayerKind::lstm, 32, 4},
      {LayerKind::flatten},
      {LayerKind::linear, 4 * window_length, 1},
  };
}

std::size_t expected_parameter_count(std::size_t window_length) {
  auto conv = [](std::size_t i, std::size_t o) { return o * (i * 3 + 1); };
  auto lstm = [](std::size_t i, std::size_t h) { return 4 * (i * h + h * h + h); };
  return conv(1, 64) + conv(64, 64) + conv(64, 128) + conv(128, 128) + 2 * (64 + 64 + 128 + 128) + lstm(128, 64) +
         lstm(64, 32) + lstm(32, 4) + 4 * window_length + 1;
}

Model build_network(std::uint64_t seed, const WindowConfig& window, int resolution_bits) {
  window.validate();
  if (resolution_bits < 2 || resolution_bits > 16) throw InvalidInput("resolution_bits must lie in [2, 16]");
  const auto specs = network_specs(window.window_length);
  Model m{nn::Network<float>(specs, seed), window, resolution_bits, std::ldexp(1.0, resolution_bits - 1)};
  if (m.net.parameter_count() != expected_parameter_count(window.window_length)) {
    throw std::logic_error("network parameter count " + std::to_string(m.net.parameter_count()) +
                           " differs from the closed form " +
                           std::to_string(expected_parameter_count(window.window_length)));
  }
  return m;
}

void save_model(const std::filesystem::path& path, Model& model) {
  io::Header h;
  h.set("format", std::string("deepadc-model"));
  h.set("version", 1);
  h.set("window_length", static_cast<std::int64_t>(model.window.window_length));
  h.set("current_index", static_cast<std::int64_t>(model.window.current_index));
  h.set("resolution_bits", model.resolution_bits);
  h.set("normalization", model.normalization);
  h.set("parameter_count", static_cast<std::int64_t>(model.net.parameter_count()));
  std::vector<std::byte> payload;
  nn::serialize(model.net, h, payload);
  io::write_container(path, h, payload);
}

Model load_model(const std::filesystem::path& path) {
  const auto c = io::read_container(path);
  const auto& h = c.header;
  if (h.get("format") != "deepadc-model") throw DataError("not a model file: " + path.string());
  if (h.get_int("version") != 1) throw DataError("unsupported model version in " + path.string());
  Model m;
  m.window.window_length = static_cast<std::size_t>(h.get_int("window_length"));
  m.window.current_index = static_cast<std::size_t>(h.get_int("current_index"));
  m.resolution_bits = static_cast<int>(h.get_int("resolution_bits"));
  m.normalization = h.get_double("normalization");
  std::size_t offset = 0;
  m.net = nn::deserialize(h, c.payload, offset);
  if (offset != c.payload.size()) throw DataError("trailing bytes in model file " + path.string());
  try {
    m.window.validate();
  } catch (const InvalidInput& e) {
    throw DataError(std::string("bad window in model file: ") + e.what());
  }
  return m;
}

namespace {

void add_record(WindowDataset& ds, const adc::AdcCapture& cap) {
  const std::size_t n = cap.size();
  if (n < ds.window.window_length) {
    throw InvalidInput("capture of " + std::to_string(n) + " samples is shorter than one window");
  }
  if (cap.config.resolution_bits != ds.resolution_bits) throw InvalidInput("captures differ in resolution");
  if (n > std::numeric_limits<std::uint32_t>::max()) throw InvalidInput("capture too long");
  const float inv = static_cast<float>(1.0 / ds.normalization);
  std::vector<float> in(n), tg(n);
  for (std::size_t k = 0; k < n; ++k) {
    in[k] = static_cast<float>(cap.nonideal_codes[k]) * inv;
    tg[k] = static_cast<float>(cap.ideal_codes[k]) * inv;
  }
  const auto r = static_cast<std::uint32_t>(ds.inputs.size());
  ds.inputs.push_back(std::move(in));
  ds.targets.push_back(std::move(tg));
  ds.labels.push_back(cap.source.constellation_order);
  for (std::size_t j = 0; j + ds.window.window_length <= n; ++j) ds.windows.push_back({r, static_cast<std::uint32_t>(j)});
}

}  // namespace

WindowDataset make_windows(const adc::AdcCapture& capture, const WindowConfig& window) {
  window.validate();
  WindowDataset ds;
  ds.window = window;
  ds.resolution_bits = capture.config.resolution_bits;
  ds.normalization = std::ldexp(1.0, ds.resolution_bits - 1);
  add_record(ds, capture);
  return ds;
}

WindowDataset make_dataset(std::span<const adc::AdcCapture> captures, const WindowConfig& window,
                           std::uint64_t seed) {
  window.validate();
  if (captures.empty()) throw InvalidInput("no captures to build a dataset from");
  WindowDataset ds;
  ds.window = window;
  ds.resolution_bits = captures.front().config.resolution_bits;
  ds.normalization = std::ldexp(1.0, ds.resolution_bits - 1);
  ds.shuffle_seed = seed;
  for (const auto& c : captures) add_record(ds, c);
  std::mt19937_64 rng(seed);
  std::shuffle(ds.windows.begin(), ds.windows.end(), rng);
  return ds;
}

std::string TrainReport::to_csv() const {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,seconds\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << io::format_double(e.train_loss) << ',' << io::format_double(e.val_loss) << ','
       << io::format_double(e.seconds) << '\n';
  }
  return os.str();
}

namespace {

void fill_batch(const WindowDataset& data, std::span<const std::size_t> idx, nn::Tensor<float>& x,
                nn::Tensor<float>& y) {
  const std::size_t L = data.window.window_length;
  x = nn::Tensor<float>({idx.size(), 1, L});
  y = nn::Tensor<float>({idx.size(), 1});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const float* w = data.window_data(idx[b]);
    std::copy(w, w + L, x.data.begin() + static_cast<std::ptrdiff_t>(b * L));
    y.data[b] = data.target(idx[b]);
  }
}

struct Snapshot {
  std::vector<std::vector<float>> tensors;

  static Snapshot take(nn::Network<float>& net) {
    Snapshot s;
    for (auto* p : net.parameters()) s.tensors.push_back(p->value.data);
    for (auto& b : net.buffers()) s.tensors.push_back(b.second->data);
    return s;
  }
  void restore(nn::Network<float>& net) const {
    std::size_t i = 0;
    for (auto* p : net.parameters()) p->value.data = tensors[i++];
    for (auto& b : net.buffers()) b.second->data = tensors[i++];
  }
};

constexpr std::size_t kEvalBatch = 1024;

// Activation tensors are large and short-lived; keeping freed blocks in the
// heap instead of returning them to the OS avoids a page fault per touch.
void keep_freed_memory() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)once;
#endif
}

void check_model_matches(const Model& model, const WindowDataset& data) {
  if (model.window.window_length != data.window.window_length ||
      model.window.current_index != data.window.current_index) {
    throw InvalidInput("model and dataset window configurations differ");
  }
  if (model.resolution_bits != data.resolution_bits) throw InvalidInput("model and dataset resolutions differ");
}

}  // namespace

double evaluate_loss(Model& model, const WindowDataset& data, std::span<const std::size_t> indices) {
  check_model_matches(model, data);
  if (indices.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  nn::Tensor<float> x, y;
  for (std::size_t i = 0; i < indices.size(); i += kEvalBatch) {
    const auto idx = indices.subspan(i, std::min(kEvalBatch, indices.size() - i));
    fill_batch(data, idx, x, y);
    const auto out = model.net.forward(x, nn::Mode::infer);
    sum += nn::mse_loss(out, y, static_cast<nn::Tensor<float>*>(nullptr)) * static_cast<double>(idx.size());
  }
  return sum / static_cast<double>(indices.size());
}

TrainReport train(Model& model, const WindowDataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  check_model_matches(model, data);
  if (data.size() == 0) throw InvalidInput("empty training dataset");
  if (cfg.batch_size == 0) throw InvalidInput("batch_size must be positive");
  if (!(cfg.learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
  if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0)) {
    throw InvalidInput("validation_fraction must lie in [0, 1)");
  }
  keep_freed_memory();
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> val(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  std::vector<std::size_t> tr(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  if (tr.empty()) throw InvalidInput("validation split leaves no training windows");
  std::sort(val.begin(), val.end());

  std::unique_ptr<nn::Optimizer<float>> opt;
  if (cfg.optimizer == OptimizerKind::adam) {
    opt = std::make_unique<nn::Adam<float>>(cfg.learning_rate);
  } else {
    opt = std::make_unique<nn::Sgd<float>>(cfg.learning_rate);
  }

  TrainReport rep;
  rep.config = cfg;
  rep.train_windows = tr.size();
  rep.val_windows = val.size();
  rep.best_val_loss = std::numeric_limits<double>::infinity();
  Snapshot best;
  auto params = model.net.parameters();
  nn::Tensor<float> x, y, grad;
  std::size_t steps = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(tr.begin(), tr.end(), rng);
    double sum = 0.0;
    try {
      for (std::size_t i = 0; i < tr.size(); i += cfg.batch_size) {
        const auto idx = std::span<const std::size_t>(tr).subspan(i, std::min(cfg.batch_size, tr.size() - i));
        fill_batch(data, idx, x, y);
        model.net.zero_grad();
        const auto out = model.net.forward(x, nn::Mode::train);
        const double loss = nn::mse_loss(out, y, &grad);
        if (!std::isfinite(loss)) throw NumericError("non-finite training loss at step " + std::to_string(steps + 1));
        model.net.backward(grad);
        opt->step(params);
        ++steps;
        sum += loss * static_cast<double>(idx.size());
      }
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + "; training diverged in epoch " + std::to_string(epoch) +
                         ", last good epoch " + std::to_string(epoch - 1));
    }
    EpochStats st;
    st.epoch = epoch;
    st.steps = steps;
    st.train_loss = sum / static_cast<double>(tr.size());
    st.val_loss = evaluate_loss(model, data, val);
    st.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    if (!val.empty() && !std::isfinite(st.val_loss)) {
      throw NumericError("non-finite validation loss in epoch " + std::to_string(epoch) + ", last good epoch " +
                         std::to_string(epoch - 1));
    }
    rep.epochs.push_back(st);
    if (on_epoch) on_epoch(st);
    if (val.empty() || st.val_loss < rep.best_val_loss) {
      rep.best_epoch = epoch;
      rep.best_val_loss = val.empty() ? st.train_loss : st.val_loss;
      best = Snapshot::take(model.net);
    }
    if (cfg.stop_below > 0.0 && st.train_loss < cfg.stop_below) break;
  }
  if (!best.tensors.empty()) best.restore(model.net);
  rep.seconds = std::chrono::duration<double>(clock::now() - t0).count();
  return rep;
}

std::vector<double> infer_stream(Model& model, std::span<const std::int16_t> codes) {
  const std::size_t L = model.window.window_length, ci = model.window.current_index;
  const std::size_t n = codes.size();
  if (n < L) throw InvalidInput("stream shorter than one window");
  keep_freed_memory();
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  const std::size_t n_windows = n - L + 1;
  const float inv = static_cast<float>(1.0 / model.normalization);
  std::vector<float> norm(n);
  for (std::size_t k = 0; k < n; ++k) norm[k] = static_cast<float>(codes[k]) * inv;
  nn::Tensor<float> x;
  for (std::size_t j0 = 0; j0 < n_windows; j0 += kEvalBatch) {
    const std::size_t nb = std::min(kEvalBatch, n_windows - j0);
    x = nn::Tensor<float>({nb, 1, L});
    for (std::size_t b = 0; b < nb; ++b) {
      std::copy(norm.begin() + static_cast<std::ptrdiff_t>(j0 + b), norm.begin() + static_cast<std::ptrdiff_t>(j0 + b + L),
                x.data.begin() + static_cast<std::ptrdiff_t>(b * L));
    }
    const auto y = model.net.forward(x, nn::Mode::infer);
    for (std::size_t b = 0; b < nb; ++b) out[j0 + b + ci] = y.data[b];
  }
  return out;
}

}  // namespace deepadc::calib
