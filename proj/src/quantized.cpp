#include "deepadc/quantized.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "deepadc/common.hpp"
#include "deepadc/container.hpp"
#include "deepadc/error.hpp"
#include "deepadc/metrics.hpp"
#include "deepadc/nn/layers.hpp"

namespace deepadc::quant {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double hyperbolic_tangent(double x) { return std::tanh(x); }

std::vector<double> to_double(const nn::Tensor<float>& t) { return {t.data.begin(), t.data.end()}; }

/// Activation-point hook shared by the float, calibration and quantized passes.
struct Probe {
  enum class Kind { exact, record, quantize };
  Kind kind = Kind::exact;
  const QuantizedModel* qm = nullptr;
  std::vector<double>* maxima = nullptr;
  std::size_t point = 0;

  template <typename Derived>
  void apply(Eigen::MatrixBase<Derived>& a) {
    const std::size_t p = point++;
    if (kind == Kind::record) {
      (*maxima)[p] = std::max((*maxima)[p], a.cwiseAbs().maxCoeff());
    } else if (kind == Kind::quantize) {
      const double s = qm->activation_scales[p];
      const int bits = qm->scheme.activation_bits;
      a = a.unaryExpr([s, bits](double v) { return fake_quantize(v, s, bits); });
    }
  }
  double sigmoid(double x) const { return kind == Kind::quantize ? qm->sigmoid(x) : logistic(x); }
  double tanh(double x) const { return kind == Kind::quantize ? qm->tanh(x) : std::tanh(x); }
};

std::size_t activation_point_count(const FoldedModel& m) {
  std::size_t n = 1;
  for (const auto& l : m.layers) {
    if (l.spec.kind == nn::LayerKind::conv1d || l.spec.kind == nn::LayerKind::linear) n += 1;
    if (l.spec.kind == nn::LayerKind::lstm) n += 3;
  }
  return n;
}

// One window through the folded network. `a` holds the per-element activation
// as a (rows x cols) matrix: (channels x time) before the transpose,
// (time x features) after it, (1 x features) once flattened.
double forward_one(const FoldedModel& m, const float* window, Probe& probe) {
  probe.point = 0;
  const auto L = static_cast<Eigen::Index>(m.window.window_length);
  RowMat a(1, L);
  for (Eigen::Index t = 0; t < L; ++t) a(0, t) = window[t];
  probe.apply(a);
  RowMat col, z;
  for (const auto& layer : m.layers) {
    const auto& s = layer.spec;
    switch (s.kind) {
      case nn::LayerKind::conv1d: {
        const auto Ci = static_cast<Eigen::Index>(s.in), K = static_cast<Eigen::Index>(s.kernel);
        const auto P = static_cast<Eigen::Index>(s.padding);
        const Eigen::Index len = a.cols(), out_len = len + 2 * P - K + 1;
        col.setZero(Ci * K, out_len);
        for (Eigen::Index c = 0; c < Ci; ++c)
          for (Eigen::Index k = 0; k < K; ++k)
            for (Eigen::Index t = 0; t < out_len; ++t) {
              const Eigen::Index src = t + k - P;
              if (src >= 0 && src < len) col(c * K + k, t) = a(c, src);
            }
        const Eigen::Map<const RowMat> W(layer.w[0].data(), static_cast<Eigen::Index>(s.out), Ci * K);
        const Eigen::Map<const Eigen::VectorXd> b(layer.w[1].data(), static_cast<Eigen::Index>(s.out));
        RowMat y = W * col;
        y.colwise() += b;
        probe.apply(y);
        a = std::move(y);
        break;
      }
      case nn::LayerKind::relu:
        a = a.cwiseMax(0.0);
        break;
      case nn::LayerKind::transpose:
        a = a.transpose().eval();
        break;
      case nn::LayerKind::flatten:
        a.resize(1, a.size());  // row-major storage: time-major order is kept
        break;
      case nn::LayerKind::lstm: {
        const auto H = static_cast<Eigen::Index>(s.out), F = static_cast<Eigen::Index>(s.in);
        const Eigen::Index T = a.rows();
        const Eigen::Map<const RowMat> Wih(layer.w[0].data(), 4 * H, F), Whh(layer.w[1].data(), 4 * H, H);
        const Eigen::Map<const Eigen::RowVectorXd> b(layer.w[2].data(), 4 * H);
        z.noalias() = a * Wih.transpose();
        z.rowwise() += b;
        RowMat hs(T, H);
        Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(H), c = Eigen::RowVectorXd::Zero(H);
        const std::size_t gate_point = probe.point;
        for (Eigen::Index t = 0; t < T; ++t) {
          Eigen::RowVectorXd zt = z.row(t);
          if (t > 0) zt.noalias() += h * Whh.transpose();
          probe.point = gate_point;
          probe.apply(zt);
          for (Eigen::Index j = 0; j < H; ++j) {
            const double ig = probe.sigmoid(zt(j)), fg = probe.sigmoid(zt(H + j));
            const double gg = probe.tanh(zt(2 * H + j));
            c(j) = fg * c(j) + ig * gg;
          }
          probe.apply(c);
          for (Eigen::Index j = 0; j < H; ++j) h(j) = probe.sigmoid(zt(3 * H + j)) * probe.tanh(c(j));
          probe.apply(h);
          hs.row(t) = h;
        }
        a = std::move(hs);
        break;
      }
      case nn::LayerKind::linear: {
        const Eigen::Map<const RowMat> W(layer.w[0].data(), static_cast<Eigen::Index>(s.out),
                                         static_cast<Eigen::Index>(s.in));
        const Eigen::Map<const Eigen::RowVectorXd> b(layer.w[1].data(), static_cast<Eigen::Index>(s.out));
        RowMat y = a * W.transpose();
        y.row(0) += b;
        probe.apply(y);
        a = std::move(y);
        break;
      }
      case nn::LayerKind::batchnorm1d:
        throw InvalidInput("folded model still contains a batchnorm layer");
    }
  }
  if (a.size() != 1) throw InvalidInput("network must end in a single output");
  return a(0, 0);
}

std::vector<double> run(const FoldedModel& m, std::span<const float> windows, const Probe& proto) {
  const std::size_t L = m.window.window_length;
  if (windows.size() % L != 0) throw InvalidInput("window buffer is not a multiple of the window length");
  const std::size_t n = windows.size() / L;
  std::vector<double> out(n);
#pragma omp parallel
  {
    Probe probe = proto;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const auto k = static_cast<std::size_t>(i);
      out[k] = forward_one(m, windows.data() + k * L, probe);
    }
  }
  return out;
}

void round_tensor(std::vector<double>& w, const std::string& name, int bits, std::vector<TensorQuantInfo>& info) {
  TensorQuantInfo ti;
  ti.name = name;
  ti.scale = symmetric_scale(w, bits, &ti.all_zero);
  for (auto& v : w) {
    const double q = fake_quantize(v, ti.scale, bits);
    ti.max_rounding_error = std::max(ti.max_rounding_error, std::abs(q - v));
    v = q;
  }
  info.push_back(ti);
}

std::vector<float> stream_windows(std::span<const std::int16_t> codes, std::size_t L, double normalization) {
  if (codes.size() < L) throw InvalidInput("stream shorter than one window");
  const std::size_t n = codes.size() - L + 1;
  const auto inv = static_cast<float>(1.0 / normalization);
  std::vector<float> out(n * L);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < L; ++i) out[j * L + i] = static_cast<float>(codes[j + i]) * inv;
  return out;
}

std::vector<double> place(std::vector<double> values, std::size_t n, std::size_t ci) {
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  std::copy(values.begin(), values.end(), out.begin() + static_cast<std::ptrdiff_t>(ci));
  return out;
}

SweepRow score(int bits, const std::vector<double>& out, const std::vector<double>& reference_out,
               const adc::AdcCapture& cap, double normalization) {
  std::vector<double> ideal(cap.ideal_codes.begin(), cap.ideal_codes.end());
  std::vector<double> test(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) test[i] = out[i] * normalization;
  const auto r = metrics::sndr_enob(ideal, test);
  SweepRow row;
  row.bits = bits;
  row.sndr = r.sndr_capped();
  row.enob = r.enob_capped();
  double se = 0.0, worst = 0.0;
  std::size_t count = 0;
  for (std::size_t i = kEdgeExclusion; i + kEdgeExclusion < out.size(); ++i) {
    const double e = out[i] - ideal[i] / normalization;
    se += e * e;
    ++count;
    worst = std::max(worst, std::abs(out[i] - reference_out[i]));
  }
  row.mse = count ? se / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
  row.max_abs_error = worst;
  return row;
}

}  // namespace

void QuantScheme::validate() const {
  if (weight_bits < 4 || weight_bits > 24) throw InvalidInput("weight_bits must lie in [4, 24]");
  if (activation_bits < 4 || activation_bits > 24) throw InvalidInput("activation_bits must lie in [4, 24]");
  if (lut_size < 2) throw InvalidInput("lut_size must be at least 2");
  if (!(sigmoid_range > 0.0) || !(tanh_range > 0.0)) throw InvalidInput("lookup table ranges must be positive");
}

std::int64_t quant_max(int bits) { return (std::int64_t{1} << (bits - 1)) - 1; }

double symmetric_scale(std::span<const double> values, int bits, bool* all_zero) {
  double m = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("cannot quantize a non-finite value");
    m = std::max(m, std::abs(v));
  }
  if (all_zero) *all_zero = m == 0.0;
  return m == 0.0 ? 1.0 : m / static_cast<double>(quant_max(bits));
}

double fake_quantize(double v, double scale, int bits) {
  const auto q = static_cast<double>(quant_max(bits));
  return std::clamp(std::round(v / scale), -q, q) * scale;
}

LookupTable::LookupTable(double (*f)(double), double range, std::size_t size)
    : y_(size), lo_(-range), step_(2.0 * range / static_cast<double>(size - 1)) {
  for (std::size_t i = 0; i < size; ++i) y_[i] = f(lo_ + step_ * static_cast<double>(i));
}

double LookupTable::operator()(double x) const {
  const double pos = (x - lo_) / step_;
  if (!(pos > 0.0)) return y_.front();
  const auto last = static_cast<double>(y_.size() - 1);
  if (pos >= last) return y_.back();
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  return y_[i] + frac * (y_[i + 1] - y_[i]);
}

FoldedModel fold_batchnorm(calib::Model& model) {
  FoldedModel out;
  out.window = model.window;
  out.normalization = model.normalization;
  out.resolution_bits = model.resolution_bits;
  auto& net = model.net;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto spec = net.layer(i).spec();
    if (spec.kind == nn::LayerKind::batchnorm1d) {
      throw InvalidInput("batchnorm at layer " + std::to_string(i) + " does not follow a convolution");
    }
    FoldedLayer fl;
    fl.spec = spec;
    fl.name = std::to_string(i) + "." + spec.to_string().substr(0, spec.to_string().find(':'));
    for (auto* p : net.layer(i).parameters()) fl.w.push_back(to_double(p->value));
    if (spec.kind == nn::LayerKind::conv1d && i + 1 < net.size() &&
        net.layer(i + 1).spec().kind == nn::LayerKind::batchnorm1d) {
      auto* bn = dynamic_cast<nn::BatchNorm1d<float>*>(&net.layer(i + 1));
      if (bn->tracked.data[0] == 0.0f) throw InvalidInput("batchnorm running statistics are uninitialized");
      const std::size_t per_out = spec.in * spec.kernel;
      for (std::size_t o = 0; o < spec.out; ++o) {
        const double a = static_cast<double>(bn->gamma.value.data[o]) /
                         std::sqrt(static_cast<double>(bn->running_var.data[o]) + nn::BatchNorm1d<float>::kEps);
        for (std::size_t j = 0; j < per_out; ++j) fl.w[0][o * per_out + j] *= a;
        fl.w[1][o] = a * (fl.w[1][o] - static_cast<double>(bn->running_mean.data[o])) +
                     static_cast<double>(bn->beta.value.data[o]);
      }
      ++i;
    }
    out.layers.push_back(std::move(fl));
  }
  return out;
}

QuantizedModel calibrate_and_quantize(calib::Model& model, const QuantScheme& scheme,
                                      const calib::WindowDataset& calibration) {
  scheme.validate();
  if (calibration.size() < 1000) throw InvalidInput("calibration needs at least 1000 windows");
  if (calibration.window.window_length != model.window.window_length) {
    throw InvalidInput("calibration windows do not match the model window length");
  }
  QuantizedModel qm;
  qm.scheme = scheme;
  qm.model = fold_batchnorm(model);

  const std::size_t L = model.window.window_length;
  std::vector<float> buf(calibration.size() * L);
  for (std::size_t i = 0; i < calibration.size(); ++i) {
    std::copy(calibration.window_data(i), calibration.window_data(i) + L, buf.begin() + static_cast<std::ptrdiff_t>(i * L));
  }
  const std::size_t points = activation_point_count(qm.model);
  std::vector<double> maxima(points, 0.0);
#pragma omp parallel
  {
    std::vector<double> local(points, 0.0);
    Probe probe;
    probe.kind = Probe::Kind::record;
    probe.maxima = &local;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(calibration.size()); ++i) {
      forward_one(qm.model, buf.data() + static_cast<std::size_t>(i) * L, probe);
    }
#pragma omp critical
    for (std::size_t p = 0; p < points; ++p) maxima[p] = std::max(maxima[p], local[p]);
  }
  for (double m : maxima) {
    qm.activation_scales.push_back(m == 0.0 ? 1.0 : m / static_cast<double>(quant_max(scheme.activation_bits)));
  }

  for (auto& layer : qm.model.layers) {
    static const char* conv_names[] = {"weight", "bias"};
    static const char* lstm_names[] = {"w_ih", "w_hh", "bias"};
    for (std::size_t k = 0; k < layer.w.size(); ++k) {
      const char* n = layer.spec.kind == nn::LayerKind::lstm ? lstm_names[k] : conv_names[k];
      round_tensor(layer.w[k], layer.name + "." + n, scheme.weight_bits, qm.weights);
    }
  }
  qm.sigmoid = LookupTable(logistic, scheme.sigmoid_range, scheme.lut_size);
  qm.tanh = LookupTable(hyperbolic_tangent, scheme.tanh_range, scheme.lut_size);
  return qm;
}

std::vector<double> forward(const FoldedModel& model, std::span<const float> windows) {
  return run(model, windows, Probe{});
}

std::vector<double> forward(const QuantizedModel& model, std::span<const float> windows) {
  Probe p;
  p.kind = Probe::Kind::quantize;
  p.qm = &model;
  return run(model.model, windows, p);
}

std::vector<double> infer_stream(const QuantizedModel& model, std::span<const std::int16_t> codes) {
  const auto& w = model.model.window;
  const auto windows = stream_windows(codes, w.window_length, model.model.normalization);
  return place(forward(model, windows), codes.size(), w.current_index);
}

std::vector<SweepRow> sweep_bitwidths(calib::Model& model, std::span<const int> bits,
                                      const adc::AdcCapture& eval_capture,
                                      const calib::WindowDataset& calibration, QuantScheme base) {
  if (bits.empty()) throw InvalidInput("bit-width list is empty");
  for (int b : bits) {
    if (b < 4 || b > 24) throw InvalidInput("bit-widths must lie in [4, 24]");
  }
  const auto reference = calib::infer_stream(model, eval_capture.nonideal_codes);
  std::vector<SweepRow> rows;
  rows.push_back(score(0, reference, reference, eval_capture, model.normalization));
  for (int b : bits) {
    QuantScheme s = base;
    s.weight_bits = b;
    s.activation_bits = b;
    const auto qm = calibrate_and_quantize(model, s, calibration);
    rows.push_back(score(b, infer_stream(qm, eval_capture.nonideal_codes), reference, eval_capture,
                         model.normalization));
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  os << "bits,enob,sndr,mse,max_abs_error\n";
  for (const auto& r : rows) {
    os << r.bits << ',' << io::format_double(r.enob) << ',' << io::format_double(r.sndr) << ','
       << io::format_double(r.mse) << ',' << io::format_double(r.max_abs_error) << '\n';
  }
  return os.str();
}

calib::WindowDataset select_calibration_windows(const calib::WindowDataset& data, std::size_t count) {
  if (count == 0) throw InvalidInput("calibration window count must be positive");
  calib::WindowDataset out = data;
  if (data.size() <= count) return out;
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t peaks = count / 2, spread = count - peaks;
  auto mag = [&](std::size_t i) { return std::abs(data.window_data(i)[data.window.current_index]); };
  std::partial_sort(order.begin(), order.begin() + peaks, order.end(), [&](std::size_t a, std::size_t b) {
    return mag(a) != mag(b) ? mag(a) > mag(b) : a < b;
  });
  out.windows.clear();
  for (std::size_t i = 0; i < peaks; ++i) out.windows.push_back(data.windows[order[i]]);
  for (std::size_t i = 0; i < spread; ++i) out.windows.push_back(data.windows[i * data.size() / spread]);
  return out;
}

}  // namespace deepadc::quant
