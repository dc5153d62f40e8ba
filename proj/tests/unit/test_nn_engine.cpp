#include <cmath>
#include <random>

#include <omp.h>

#include "doctest.h"
#include "deepadc/error.hpp"
#include "deepadc/kernels/conv1d.hpp"
#include "deepadc/kernels/lstm.hpp"
#include "deepadc/nn/network.hpp"
#include "support/gradcheck.hpp"

using namespace deepadc;
using namespace deepadc::nn;
using deepadc::testing::check_layer;
using deepadc::testing::random_tensor;

namespace {
double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
}  // namespace

TEST_CASE("conv1d forward examples") {
  Conv1d<double> id(3, 3, 3, 1);
  for (std::size_t o = 0; o < 3; ++o) id.weight.value.data[(o * 3 + o) * 3 + 1] = 1.0;
  std::mt19937_64 rng(1);
  const auto x = random_tensor({2, 3, 7}, rng);
  CHECK(id.forward(x, Mode::infer).data == x.data);

  Conv1d<double> ones(1, 1, 3, 1);
  ones.weight.value.data = {1, 1, 1};
  const auto y = ones.forward(Tensor<double>({1, 1, 3}, 1.0), Mode::infer);
  CHECK(y.data == std::vector<double>{2, 3, 2});
  CHECK_THROWS_AS(ones.forward(Tensor<double>({1, 2, 3}), Mode::infer), InvalidInput);
  CHECK_THROWS_AS(ones.forward(Tensor<double>({3, 3}), Mode::infer), InvalidInput);
}

TEST_CASE("conv1d gradient on a 2x4x8 case") {
  std::mt19937_64 rng(2);
  auto layer = make_layer<double>({LayerKind::conv1d, 4, 5, 3, 1}, rng);
  CHECK(check_layer(*layer, random_tensor({2, 4, 8}, rng), rng).worst() < 1e-6);
}

TEST_CASE("batchnorm1d train statistics and running stats") {
  std::mt19937_64 rng(3);
  BatchNorm1d<double> bn(3);
  auto x = random_tensor({4, 3, 10}, rng, -2.0, 5.0);
  const auto y = bn.forward(x, Mode::train);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, v = 0, xm = 0, xv = 0;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t t = 0; t < 10; ++t) {
        m += y.data[(b * 3 + c) * 10 + t] / 40;
        xm += x.data[(b * 3 + c) * 10 + t] / 40;
      }
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t t = 0; t < 10; ++t) {
        v += std::pow(y.data[(b * 3 + c) * 10 + t] - m, 2) / 40;
        xv += std::pow(x.data[(b * 3 + c) * 10 + t] - xm, 2) / 39;
      }
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(v - 1.0) < 1e-4);  // eps = 1e-5 against a variance of order 1
    CHECK(bn.running_mean.data[c] == doctest::Approx(0.1 * xm).epsilon(1e-12));
    CHECK(bn.running_var.data[c] == doctest::Approx(0.9 + 0.1 * xv).epsilon(1e-12));
  }
}

TEST_CASE("batchnorm1d infer mode") {
  BatchNorm1d<double> bn(2);
  CHECK_THROWS_AS(bn.forward(Tensor<double>({1, 2, 4}), Mode::infer), InvalidInput);
  bn.tracked.data[0] = 1;
  std::mt19937_64 rng(4);
  const auto x = random_tensor({3, 2, 5}, rng);
  const auto y = bn.forward(x, Mode::infer);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data[i] == doctest::Approx(x.data[i] / std::sqrt(1 + 1e-5)));
  CHECK_THROWS_AS(bn.forward(Tensor<double>({1, 2, 1}), Mode::train), InvalidInput);
}

TEST_CASE("batchnorm1d gradient") {
  std::mt19937_64 rng(5);
  BatchNorm1d<double> bn(3);
  bn.gamma.value.data = {0.7, 1.3, 2.0};
  bn.beta.value.data = {0.1, -0.2, 0.3};
  CHECK(check_layer(bn, random_tensor({3, 3, 6}, rng), rng).worst() < 1e-6);
}

TEST_CASE("lstm examples") {
  Lstm<double> zero(3, 4);
  std::mt19937_64 rng(6);
  for (auto* p : {&zero.w_ih, &zero.w_hh}) p->value = random_tensor(p->value.shape, rng);
  const auto y = zero.forward(Tensor<double>({2, 5, 3}), Mode::infer);
  for (double v : y.data) CHECK(v == 0.0);

  Lstm<double> one(2, 1);
  one.w_ih.value.data = {0.5, -0.3, 0.2, 0.4, -0.6, 0.1, 0.9, -0.8};  // rows i, f, g, o
  one.bias.value.data = {0.1, 1.0, -0.2, 0.3};
  const Tensor<double> x({1, 1, 2}, 0.0);
  auto xi = x;
  xi.data = {0.7, -1.2};
  const double zi = 0.5 * 0.7 - 0.3 * -1.2 + 0.1, zf = 0.2 * 0.7 + 0.4 * -1.2 + 1.0;
  const double zg = -0.6 * 0.7 + 0.1 * -1.2 - 0.2, zo = 0.9 * 0.7 - 0.8 * -1.2 + 0.3;
  const double c = sigmoid(zf) * 0.0 + sigmoid(zi) * std::tanh(zg);
  const double h = sigmoid(zo) * std::tanh(c);
  CHECK(std::abs(one.forward(xi, Mode::infer).data[0] - h) < 1e-12);
}

TEST_CASE("lstm BPTT gradient on a 2x5x3 -> 4 case") {
  std::mt19937_64 rng(7);
  auto layer = make_layer<double>({LayerKind::lstm, 3, 4, 0, 0}, rng);
  CHECK(check_layer(*layer, random_tensor({2, 5, 3}, rng), rng).worst() < 1e-5);
}

TEST_CASE("linear examples and gradient") {
  Linear<double> id(4, 4);
  for (std::size_t i = 0; i < 4; ++i) id.weight.value.data[i * 4 + i] = 1.0;
  std::mt19937_64 rng(8);
  const auto x = random_tensor({3, 4}, rng);
  CHECK(id.forward(x, Mode::infer).data == x.data);

  Linear<double> sum(256, 1);
  std::fill(sum.weight.value.data.begin(), sum.weight.value.data.end(), 1.0);
  const auto v = random_tensor({1, 256}, rng);
  double s = 0;
  for (double e : v.data) s += e;
  CHECK(sum.forward(v, Mode::infer).data[0] == doctest::Approx(s).epsilon(1e-13));

  auto layer = make_layer<double>({LayerKind::linear, 6, 3, 0, 0}, rng);
  CHECK(check_layer(*layer, random_tensor({4, 6}, rng), rng).worst() < 1e-7);
}

TEST_CASE("shape-only layers") {
  std::mt19937_64 rng(9);
  Transpose<double> tr;
  const auto x = random_tensor({2, 3, 4}, rng);
  const auto y = tr.forward(x, Mode::train);
  CHECK(y.shape == Shape{2, 4, 3});
  CHECK(y.data[(1 * 4 + 2) * 3 + 1] == x.data[(1 * 3 + 1) * 4 + 2]);
  CHECK(tr.backward(y).data == x.data);
  Flatten<double> fl;
  CHECK(fl.forward(x, Mode::train).shape == Shape{2, 12});
  Relu<double> relu;
  CHECK(check_layer(relu, testing::relu_safe_tensor({2, 3, 5}, rng), rng).worst() < 1e-8);
}

TEST_CASE("mse loss") {
  std::mt19937_64 rng(10);
  const auto a = random_tensor({5, 1}, rng);
  CHECK(mse_loss(a, a, static_cast<Tensor<double>*>(nullptr)) == 0.0);
  auto b = a;
  for (auto& v : b.data) v += 0.25;
  CHECK(mse_loss(b, a, static_cast<Tensor<double>*>(nullptr)) == doctest::Approx(0.0625).epsilon(1e-12));
  CHECK(testing::check_mse(b, a) < 1e-8);
  CHECK_THROWS_AS(mse_loss(a, Tensor<double>({4, 1}), static_cast<Tensor<double>*>(nullptr)), InvalidInput);
}

TEST_CASE("randomized gradient checks") {
  std::mt19937_64 rng(11);
  for (auto kind : {LayerKind::conv1d, LayerKind::batchnorm1d, LayerKind::relu, LayerKind::lstm, LayerKind::linear}) {
    double worst = 0;
    for (int trial = 0; trial < 15; ++trial) worst = std::max(worst, testing::random_layer_case(kind, rng));
    CAPTURE(LayerSpec{kind}.to_string());
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("adam") {
  Parameter<double> p{"x", Tensor<double>({1}, 1.0), Tensor<double>({1}, 0.0)};
  std::vector<Parameter<double>*> ps{&p};
  Adam<double> opt(0.1);
  opt.step(ps);
  CHECK(p.value.data[0] == 1.0);

  Adam<double> opt2(0.1);
  p.grad.data[0] = 2.0 * p.value.data[0];  // d/dx x^2
  opt2.step(ps);
  CHECK(p.value.data[0] == doctest::Approx(0.9).epsilon(1e-6));

  auto run = [] {
    Parameter<float> q{"w", Tensor<float>({3}, 0.5f), Tensor<float>({3}, 0.0f)};
    std::vector<Parameter<float>*> qs{&q};
    Adam<float> o(1e-2);
    for (int i = 0; i < 50; ++i) {
      for (std::size_t k = 0; k < 3; ++k) q.grad.data[k] = std::sin(q.value.data[k] * (k + 1.0f));
      o.step(qs);
    }
    return q.value.data;
  };
  CHECK(run() == run());

  p.grad.data[0] = std::nan("");
  CHECK_THROWS_AS(opt2.step(ps), NumericError);
  Sgd<double> sgd(0.5);
  p.grad.data[0] = 1.0;
  const double before = p.value.data[0];
  sgd.step(ps);
  CHECK(p.value.data[0] == doctest::Approx(before - 0.5));
}

TEST_CASE("serial and parallel kernels agree") {
  std::mt19937_64 rng(12);
  const kernels::Conv1dShape cs{37, 5, 6, 16, 3, 1};
  const auto x = random_tensor({37, 5, 16}, rng), w = random_tensor({6, 5, 3}, rng), b = random_tensor({6}, rng);
  Tensor<double> y1({37, 6, 16}), y2({37, 6, 16});
  kernels::serial::conv1d_forward(cs, x.ptr(), w.ptr(), b.ptr(), y1.ptr());
  kernels::parallel::conv1d_forward(cs, x.ptr(), w.ptr(), b.ptr(), y2.ptr());
  CHECK(testing::relative_error(y1.data, y2.data) < 1e-14);
  const auto dy = random_tensor({37, 6, 16}, rng);
  Tensor<double> dx1(x.shape), dx2(x.shape), dw1(w.shape), dw2(w.shape), db1(b.shape), db2(b.shape);
  kernels::serial::conv1d_backward(cs, x.ptr(), w.ptr(), dy.ptr(), dx1.ptr(), dw1.ptr(), db1.ptr());
  kernels::parallel::conv1d_backward(cs, x.ptr(), w.ptr(), dy.ptr(), dx2.ptr(), dw2.ptr(), db2.ptr());
  CHECK(testing::relative_error(dx1.data, dx2.data) < 1e-14);
  CHECK(testing::relative_error(dw1.data, dw2.data) < 1e-14);
  CHECK(testing::relative_error(db1.data, db2.data) < 1e-14);

  const kernels::LstmShape ls{21, 9, 4, 5};
  const auto lx = random_tensor({21, 9, 4}, rng), wih = random_tensor({20, 4}, rng), whh = random_tensor({20, 5}, rng),
             lb = random_tensor({20}, rng);
  Tensor<double> h1({21, 9, 5}), h2({21, 9, 5});
  kernels::LstmCache<double> c1, c2;
  kernels::serial::lstm_forward(ls, lx.ptr(), wih.ptr(), whh.ptr(), lb.ptr(), h1.ptr(), &c1);
  kernels::parallel::lstm_forward(ls, lx.ptr(), wih.ptr(), whh.ptr(), lb.ptr(), h2.ptr(), &c2);
  CHECK(testing::relative_error(h1.data, h2.data) < 1e-14);
  const auto dh = random_tensor({21, 9, 5}, rng);
  Tensor<double> ldx1(lx.shape), ldx2(lx.shape), gih1(wih.shape), gih2(wih.shape), ghh1(whh.shape), ghh2(whh.shape),
      gb1(lb.shape), gb2(lb.shape);
  kernels::serial::lstm_backward(ls, lx.ptr(), wih.ptr(), whh.ptr(), h1.ptr(), c1, dh.ptr(), ldx1.ptr(), gih1.ptr(),
                                 ghh1.ptr(), gb1.ptr());
  kernels::parallel::lstm_backward(ls, lx.ptr(), wih.ptr(), whh.ptr(), h2.ptr(), c2, dh.ptr(), ldx2.ptr(), gih2.ptr(),
                                   ghh2.ptr(), gb2.ptr());
  CHECK(testing::relative_error(ldx1.data, ldx2.data) < 1e-13);
  CHECK(testing::relative_error(gih1.data, gih2.data) < 1e-13);
  CHECK(testing::relative_error(ghh1.data, ghh2.data) < 1e-13);
  CHECK(testing::relative_error(gb1.data, gb2.data) < 1e-13);
}

namespace {
std::vector<LayerSpec> small_stack() {
  return {{LayerKind::conv1d, 1, 4, 3, 1}, {LayerKind::batchnorm1d, 4, 4}, {LayerKind::relu},
          {LayerKind::transpose},          {LayerKind::lstm, 4, 3},         {LayerKind::flatten},
          {LayerKind::linear, 24, 1}};
}
}  // namespace

TEST_CASE("network forward in infer mode does not depend on the batch") {
  Network<float> net(small_stack(), 3);
  std::mt19937_64 rng(13);
  const auto xd = random_tensor({5, 1, 8}, rng);
  const auto x = xd.cast<float>();
  net.forward(x, Mode::train);
  const auto all = net.forward(x, Mode::infer);
  CHECK(all.shape == Shape{5, 1});
  for (std::size_t n = 0; n < 5; ++n) {
    Tensor<float> one({1, 1, 8});
    std::copy(x.data.begin() + n * 8, x.data.begin() + (n + 1) * 8, one.data.begin());
    CHECK(net.forward(one, Mode::infer).data[0] == all.data[n]);
  }
  CHECK(net.forward(x, Mode::infer).data == all.data);
}

TEST_CASE("training step is independent of the thread count") {
  std::mt19937_64 rng(14);
  const auto x = random_tensor({53, 1, 8}, rng).cast<float>();
  const auto y = random_tensor({53, 1}, rng).cast<float>();
  auto step = [&](int threads) {
    omp_set_num_threads(threads);
    Network<float> net(small_stack(), 5);
    Tensor<float> grad;
    mse_loss(net.forward(x, Mode::train), y, &grad);
    net.backward(grad);
    std::vector<float> g;
    for (auto* p : net.parameters()) g.insert(g.end(), p->grad.data.begin(), p->grad.data.end());
    return g;
  };
  const int keep = omp_get_max_threads();
  const auto one = step(1);
  CHECK(step(4) == one);
  CHECK(step(3) == one);
  omp_set_num_threads(keep);
}

TEST_CASE("whole-network gradient") {
  Network<double> net(small_stack(), 4);
  std::mt19937_64 rng(14);
  const auto x = random_tensor({3, 1, 8}, rng);
  const auto target = random_tensor({3, 1}, rng);
  Tensor<double> g;
  net.zero_grad();
  mse_loss(net.forward(x, Mode::train), target, &g);
  net.backward(g);
  std::vector<double> ana, num;
  const double h = 1e-6;
  for (auto* p : net.parameters()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double keep = p->value.data[i];
      p->value.data[i] = keep + h;
      const double fp = mse_loss(net.forward(x, Mode::train), target, static_cast<Tensor<double>*>(nullptr));
      p->value.data[i] = keep - h;
      const double fm = mse_loss(net.forward(x, Mode::train), target, static_cast<Tensor<double>*>(nullptr));
      p->value.data[i] = keep;
      num.push_back((fp - fm) / (2 * h));
      ana.push_back(p->grad.data[i]);
    }
  }
  CHECK(testing::relative_error(ana, num) < 1e-4);
}

TEST_CASE("network serialization round trip") {
  Network<float> net(small_stack(), 5);
  std::mt19937_64 rng(15);
  const auto x = random_tensor({4, 1, 8}, rng).cast<float>();
  net.forward(x, Mode::train);
  io::Header h;
  std::vector<std::byte> payload;
  serialize(net, h, payload);
  std::size_t offset = 0;
  auto back = deserialize(h, payload, offset);
  CHECK(offset == payload.size());
  CHECK(back.forward(x, Mode::infer).data == net.forward(x, Mode::infer).data);
  CHECK(back.parameter_count() == net.parameter_count());

  io::Header bad = h;
  bad.set("tensor.0", std::string("0.weight 9x9"));
  std::size_t o2 = 0;
  CHECK_THROWS_AS(deserialize(bad, payload, o2), DataError);
  std::size_t o3 = 0;
  CHECK_THROWS_AS(deserialize(h, std::span(payload).first(10), o3), DataError);
  CHECK(LayerSpec::parse("conv1d:1:64:3:1").parameter_count() == 256);
  CHECK_THROWS_AS(LayerSpec::parse("pool:2"), DataError);
}
