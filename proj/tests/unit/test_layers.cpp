#include <doctest.h>

#include "grad_check.hpp"
#include "sigcl/nn/layers.hpp"
#include "sigcl/nn/optim.hpp"

using namespace sigcl;
using namespace sigcl::nn;
using testing::random_tensor;

TEST_CASE("linear gradients") {
  Rng rng = make_rng(1);
  Linear l(6, 4, rng, "fc");
  testing::check_layer_gradients(l, random_tensor({5, 6}, rng), Mode::train, rng);
}

TEST_CASE("conv1d gradients, strided and padded") {
  Rng rng = make_rng(2);
  Conv1d c(3, 4, 5, 2, 2, rng, "conv");
  CHECK(c.output_length(17) == 9);
  const Tensor x = random_tensor({3, 2, 17}, rng);
  CHECK(c.forward(x, Mode::train).shape() == std::vector<std::size_t>{4, 2, 9});
  testing::check_layer_gradients(c, x, Mode::train, rng);
}

TEST_CASE("conv1d matches direct convolution") {
  Rng rng = make_rng(9);
  Conv1d c(2, 3, 3, 1, 1, rng, "conv");
  const Tensor x = random_tensor({2, 1, 8}, rng);
  const Tensor y = c.forward(x, Mode::eval);
  std::vector<Param*> ps;
  c.collect_parameters(ps);
  const auto& w = ps[0]->value;
  const auto& b = ps[1]->value;
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t t = 0; t < 8; ++t) {
      double ref = b[o];
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t k = 0; k < 3; ++k) {
          const long pos = static_cast<long>(t + k) - 1;
          if (pos >= 0 && pos < 8) ref += double(w[o * 6 + i * 3 + k]) * x[i * 8 + static_cast<std::size_t>(pos)];
        }
      CHECK(y[o * 8 + t] == doctest::Approx(ref).epsilon(1e-5));
    }
}

TEST_CASE("conv2d gradients") {
  Rng rng = make_rng(3);
  Conv2d c(2, 3, 3, 2, 1, rng, "conv2");
  testing::check_layer_gradients(c, random_tensor({2, 2, 7, 6}, rng), Mode::train, rng);
}

TEST_CASE("batchnorm gradients in train mode") {
  Rng rng = make_rng(4);
  BatchNorm bn(3, "bn");
  testing::check_layer_gradients(bn, random_tensor({3, 4, 5}, rng, 2.0), Mode::train, rng, 20);
}

TEST_CASE("batchnorm normalizes per channel and eval mode is pure") {
  Rng rng = make_rng(5);
  BatchNorm bn(2, "bn");
  Tensor x = random_tensor({2, 8, 4}, rng, 3.0);
  for (std::size_t i = 0; i < 32; ++i) x[i] += 5.0f;
  const Tensor y = bn.forward(x, Mode::train);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 32; ++i) m += y[c * 32 + i];
    m /= 32;
    for (std::size_t i = 0; i < 32; ++i) v += (y[c * 32 + i] - m) * (y[c * 32 + i] - m);
    CHECK(m == doctest::Approx(0.0).epsilon(1e-5).scale(1.0));
    CHECK(v / 32 == doctest::Approx(1.0).epsilon(1e-3));
  }
  std::vector<Param*> ps;
  bn.collect_parameters(ps);
  REQUIRE(ps.size() == 4);
  CHECK(ps[2]->buffer);
  CHECK(ps[3]->buffer);
  CHECK(ps[2]->value[0] > 0.4f);  // running mean moved toward 5
  std::vector<std::vector<float>> before;
  for (auto* p : ps) before.push_back(p->value);
  const Tensor e1 = bn.forward(x, Mode::eval);
  const Tensor e2 = bn.forward(x, Mode::eval);
  CHECK(e1 == e2);
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(ps[i]->value == before[i]);
}

TEST_CASE("residual block and pooling gradients") {
  Rng rng = make_rng(6);
  auto body = std::make_unique<Sequential>();
  body->emplace<Conv1d>(3, 3, 3, 1, 1, rng, "b.c1");
  body->emplace<Relu>();
  body->emplace<Conv1d>(3, 3, 3, 1, 1, rng, "b.c2");
  Sequential net;
  net.add(std::make_unique<Residual>(std::move(body), nullptr));
  net.emplace<GlobalAvgPool>();
  net.emplace<Linear>(3, 2, rng, "fc");
  testing::check_layer_gradients(net, random_tensor({3, 2, 6}, rng), Mode::train, rng);
}

TEST_CASE("global average pool output layout") {
  Tensor x({2, 3, 4});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(i);
  GlobalAvgPool p;
  const Tensor y = p.forward(x, Mode::eval);
  REQUIRE(y.shape() == std::vector<std::size_t>{3, 2});
  CHECK(y[0] == doctest::Approx(1.5));   // channel 0, sample 0
  CHECK(y[1] == doctest::Approx(13.5));  // channel 1, sample 0
}

TEST_CASE("dropout is the identity in eval mode and unbiased in train mode") {
  Dropout d(0.5f, 11);
  Tensor x({1, 20000}, 1.0f);
  CHECK(d.forward(x, Mode::eval) == x);
  const Tensor y = d.forward(x, Mode::train);
  double s = 0;
  for (float v : y.values()) {
    CHECK((v == 0.0f || v == 2.0f));
    s += v;
  }
  CHECK(s / 20000 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("adam skips frozen parameters and buffers") {
  Param a("a", {3}), b("b", {3}), c("c", {3});
  for (auto* p : {&a, &b, &c}) p->grad = {1.0f, -1.0f, 0.5f};
  b.frozen = true;
  c.buffer = true;
  Adam opt({&a, &b, &c}, 0.1f);
  opt.step();
  CHECK(a.value[0] == doctest::Approx(-0.1f));
  CHECK(a.value[1] == doctest::Approx(0.1f));
  CHECK(b.value == std::vector<float>{0, 0, 0});
  CHECK(c.value == std::vector<float>{0, 0, 0});
  CHECK(opt.steps_taken() == 1);
}

TEST_CASE("matmul transposes") {
  const float a[] = {1, 2, 3, 4, 5, 6};  // 2x3
  const float b[] = {1, 0, 0, 1, 1, 1};  // 2x3
  float out[4];
  matmul(a, 2, 3, false, b, 2, 3, true, out, false);  // a * b^T
  CHECK(out[0] == 1);
  CHECK(out[1] == 6);
  CHECK(out[2] == 4);
  CHECK(out[3] == 15);
}

TEST_CASE("layer shape errors") {
  Rng rng = make_rng(0);
  Linear l(4, 2, rng, "fc");
  CHECK_THROWS(l.forward(Tensor({3, 5}), Mode::eval));
  BatchNorm bn(4, "bn");
  CHECK_THROWS(bn.forward(Tensor({3, 2, 2}), Mode::eval));
}
