#include <doctest.h>

#include <cmath>

#include "grad_check.hpp"
#include "sigcl/errors.hpp"
#include "sigcl/heads.hpp"

using namespace sigcl;
using namespace sigcl::heads;
using testing::random_tensor;

TEST_CASE("fusion modes") {
  Tensor a({2, 3}), b({2, 3});
  for (std::size_t i = 0; i < 6; ++i) {
    a[i] = static_cast<float>(i);
    b[i] = 2.0f;
  }
  const std::vector<Tensor> parts{a, b};
  const Tensor c = fuse(parts, FusionMode::concat);
  CHECK(c.shape() == std::vector<std::size_t>{2, 6});
  CHECK(c[3] == 2.0f);
  CHECK(c[6] == 3.0f);
  CHECK(fuse(parts, FusionMode::add)[4] == 6.0f);
  CHECK(fuse(parts, FusionMode::dot)[4] == 8.0f);
  const std::vector<Tensor> ragged{a, Tensor({2, 4})};
  CHECK(fuse(ragged, FusionMode::concat).dim(1) == 7);
  CHECK_THROWS_AS(fuse(ragged, FusionMode::add), InvalidArgument);
  CHECK(parse_fusion_mode(fusion_mode_name(FusionMode::dot)) == FusionMode::dot);
  CHECK_THROWS_AS(parse_fusion_mode("max"), InvalidArgument);
}

TEST_CASE("fusion backward matches finite differences") {
  Rng rng = make_rng(1);
  for (FusionMode mode : {FusionMode::concat, FusionMode::add, FusionMode::dot}) {
    std::vector<Tensor> parts{random_tensor({3, 4}, rng), random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)};
    const Tensor out = fuse(parts, mode);
    const Tensor w = random_tensor(out.shape(), rng);
    const auto grads = fuse_backward(parts, mode, w);
    REQUIRE(grads.size() == 3);
    const float h = 1e-2f;
    for (std::size_t p = 0; p < 3; ++p)
      for (std::size_t i = 0; i < parts[p].size(); ++i) {
        const float keep = parts[p][i];
        parts[p][i] = keep + h;
        const double lp = testing::weighted_sum(fuse(parts, mode), w);
        parts[p][i] = keep - h;
        const double lm = testing::weighted_sum(fuse(parts, mode), w);
        parts[p][i] = keep;
        CHECK(testing::grad_close(grads[p][i], (lp - lm) / (2 * h)));
      }
  }
}

TEST_CASE("attention with equal logits is the identity") {
  Rng rng = make_rng(2);
  DomainAttention att(3, 4, rng);
  for (auto* p : std::vector<nn::Param*>{&att.scorer().weight(), &att.scorer().bias()})
    std::fill(p->value.begin(), p->value.end(), 0.0f);
  const Tensor x = random_tensor({2, 12}, rng);
  const Tensor y = att.forward(x, nn::Mode::eval);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-6));
  for (float w : att.weights().values()) CHECK(w == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("attention gradients") {
  Rng rng = make_rng(3);
  DomainAttention att(3, 4, rng);
  testing::check_layer_gradients(att, random_tensor({4, 12}, rng), nn::Mode::train, rng, 20);
}

TEST_CASE("cross entropy value and gradient") {
  Mat logits(2, 3);
  logits(0, 0) = 1.0;
  logits(1, 2) = 2.0;
  const std::vector<std::size_t> y{0, 1};
  const CrossEntropy ce = cross_entropy(logits, y);
  const double l0 = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0));
  const double l1 = -std::log(1.0 / (2.0 + std::exp(2.0)));
  CHECK(ce.value == doctest::Approx((l0 + l1) / 2));
  const double h = 1e-6;
  for (std::size_t i = 0; i < logits.v.size(); ++i) {
    Mat lp = logits, lm = logits;
    lp.v[i] += h;
    lm.v[i] -= h;
    CHECK(ce.grad.v[i] == doctest::Approx((cross_entropy(lp, y).value - cross_entropy(lm, y).value) / (2 * h)).epsilon(1e-5));
  }
  CHECK_THROWS_AS(cross_entropy(logits, std::vector<std::size_t>{0, 3}), InvalidArgument);
  Tensor t({2, 3});
  t[1] = 5.0f;
  t[5] = 1.0f;
  CHECK(predict(t) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("fusion head layouts") {
  FusionConfig cfg;
  cfg.num_classes = 4;
  {
    FusionHead h(cfg, 3, 128, 1);
    CHECK(h.input_width() == 384);
    CHECK(h.attention() != nullptr);
    CHECK(h.forward(Tensor({5, 384}), nn::Mode::eval).shape() == std::vector<std::size_t>{5, 4});
    CHECK_THROWS_AS(h.forward(Tensor({5, 128}), nn::Mode::eval), InvalidArgument);
  }
  cfg.mode = FusionMode::add;
  {
    FusionHead h(cfg, 3, 128, 1);
    CHECK(h.input_width() == 128);
    CHECK(h.attention() == nullptr);
  }
  cfg.mode = FusionMode::concat;
  cfg.use_attention = false;
  cfg.use_classifier_head = false;
  {
    FusionHead h(cfg, 2, 8, 1);
    CHECK(h.parameters().size() == 2);
    CHECK(h.module().name == "head");
  }
  cfg.num_classes = 1;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("fusion head gradient through attention and classifier") {
  FusionConfig cfg;
  cfg.num_classes = 3;
  cfg.dropout_rate = 0.0;
  cfg.hidden = 16;
  FusionHead h(cfg, 2, 5, 4);
  Rng rng = make_rng(5);
  Tensor x = random_tensor({3, 10}, rng);
  const Tensor w = random_tensor({3, 3}, rng);
  h.forward(x, nn::Mode::train);
  nn::zero_grad(h.parameters());
  const Tensor gx = h.backward(w);
  const float eps = 1e-3f;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float keep = x[i];
    x[i] = keep + eps;
    const double lp = testing::weighted_sum(h.forward(x, nn::Mode::train), w);
    x[i] = keep - eps;
    const double lm = testing::weighted_sum(h.forward(x, nn::Mode::train), w);
    x[i] = keep;
    CHECK_MESSAGE(testing::grad_close(gx[i], (lp - lm) / (2 * eps)), i, ": ", gx[i], " vs ", (lp - lm) / (2 * eps));
  }
}
