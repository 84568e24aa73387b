#include <doctest.h>

#include <cmath>

#include "sigcl/conloss.hpp"
#include "sigcl/errors.hpp"
#include "sigcl/rng.hpp"

using namespace sigcl;
using namespace sigcl::conloss;

namespace {

Mat random_mat(std::size_t r, std::size_t c, Rng& rng) {
  Mat m(r, c);
  for (double& v : m.v) v = standard_normal(rng);
  return m;
}

double cosine(const double* a, const double* b, std::size_t d) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < d; ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return ab / std::sqrt(aa * bb);
}

// Straight transcription of the per-anchor formula, no shared code with the library.
double reference_pair_loss(const Mat& a, const Mat& p, double tau, bool simclr) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double pos = std::exp(cosine(a.row(i), p.row(i), a.cols) / tau);
    double den = simclr ? pos : 0.0;
    for (std::size_t j = 0; j < a.rows; ++j) {
      if (j == i) continue;
      den += std::exp(cosine(a.row(i), a.row(j), a.cols) / tau) + std::exp(cosine(a.row(i), p.row(j), a.cols) / tau);
    }
    total += -std::log(pos / den);
  }
  return total / static_cast<double>(a.rows);
}

ViewSet random_views(std::size_t b, std::size_t d, Rng& rng) {
  ViewSet v;
  for (auto& dom : v.z)
    for (auto& m : dom) m = random_mat(b, d, rng);
  return v;
}

}  // namespace

TEST_CASE("cosine similarity matrix") {
  Mat a(2, 2), c(2, 2);
  a(0, 0) = 1;
  a(1, 1) = 2;
  c(0, 0) = 3;
  c(1, 0) = 1;
  c(1, 1) = 1;
  const Mat s = cos_sim_matrix(a, c);
  CHECK(s(0, 0) == doctest::Approx(1.0));
  CHECK(s(1, 0) == doctest::Approx(0.0));
  CHECK(s(0, 1) == doctest::Approx(1 / std::sqrt(2.0)));
  Mat z(2, 2);
  CHECK_THROWS_AS(cos_sim_matrix(z, c), InvalidArgument);
}

TEST_CASE("all-equal embeddings give log 2") {
  Mat z(2, 4, 1.0);
  CHECK(intra_loss(z, z, 0.05) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(inter_loss(z, z, 0.05) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  ViewSet v;
  for (auto& dom : v.z)
    for (auto& m : dom) m = z;
  LossConfig cfg;
  cfg.lambda = 0.8;
  const TotalLoss t = total_loss(v, cfg);
  CHECK(std::fabs(t.value - 3.6 * std::log(2.0)) < 1e-6);
  CHECK(t.breakdown.size() == 9);
  CHECK(t.breakdown.count("intra_T") == 1);
  CHECK(t.breakdown.count("inter_TF") == 1);
  CHECK(t.breakdown.count("inter_aug_FC") == 1);
}

TEST_CASE("aligned positives with orthogonal negatives") {
  Mat z(2, 2);
  z(0, 0) = 1;
  z(1, 1) = 1;
  CHECK(intra_loss(z, z, 0.05) == doctest::Approx(-20.0 + std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("inter reduces to intra when the domains coincide") {
  Rng rng = make_rng(1);
  const Mat a = random_mat(6, 8, rng), b = random_mat(6, 8, rng);
  CHECK(inter_loss(a, b, 0.1) == doctest::Approx(intra_loss(a, b, 0.1)).epsilon(1e-12));
}

TEST_CASE("pair loss matches the reference formula") {
  Rng rng = make_rng(2);
  for (int t = 0; t < 20; ++t) {
    const Mat a = random_mat(5, 7, rng), p = random_mat(5, 7, rng);
    for (bool simclr : {false, true})
      CHECK(pair_loss(a, p, 0.05, simclr).value == doctest::Approx(reference_pair_loss(a, p, 0.05, simclr)).epsilon(1e-10));
  }
  CHECK_THROWS_AS(pair_loss(Mat(1, 3, 1.0), Mat(1, 3, 1.0), 0.05), InvalidArgument);
}

TEST_CASE("extreme similarities stay finite") {
  Rng rng = make_rng(3);
  Mat a = random_mat(8, 4, rng);
  const PairLoss pl = pair_loss(a, a, 1e-3);
  CHECK(std::isfinite(pl.value));
  for (double g : pl.grad_anchor.v) CHECK(std::isfinite(g));
}

TEST_CASE("total loss gradient matches central differences for every term subset") {
  Rng rng = make_rng(4);
  for (int mask = 1; mask < 16; ++mask) {
    for (bool simclr : {false, true}) {
      LossConfig cfg;
      cfg.tau = 0.5;
      cfg.terms = {bool(mask & 1), bool(mask & 2), bool(mask & 4), bool(mask & 8)};
      cfg.simclr_denominator = simclr;
      ViewSet v = random_views(4, 8, rng);
      const TotalLoss t = total_loss(v, cfg);
      const double h = 1e-6;
      double worst = 0.0;
      for (std::size_t d = 0; d < 3; ++d)
        for (int view = 0; view < 2; ++view)
          for (std::size_t i = 0; i < v.z[d][view].v.size(); ++i) {
            double& x = v.z[d][view].v[i];
            const double keep = x;
            x = keep + h;
            const double lp = total_loss(v, cfg).value;
            x = keep - h;
            const double lm = total_loss(v, cfg).value;
            x = keep;
            const double fd = (lp - lm) / (2 * h);
            const double an = t.grad[d][view].v[i];
            worst = std::max(worst, std::fabs(an - fd) / std::max(1e-3, std::max(std::fabs(an), std::fabs(fd))));
          }
      CHECK_MESSAGE(worst < 1e-4, "mask ", mask, " simclr ", simclr, " worst rel err ", worst);
    }
  }
}

TEST_CASE("disabled domains drop their terms") {
  Rng rng = make_rng(5);
  ViewSet v = random_views(4, 6, rng);
  v.enabled = {true, false, false};
  v.z[1] = {};
  v.z[2] = {};
  const TotalLoss t = total_loss(v, LossConfig{});
  CHECK(t.breakdown.size() == 1);
  CHECK(t.inter_sum == 0.0);
  CHECK(t.value == doctest::Approx(0.8 * t.breakdown.at("intra_T")));
}

TEST_CASE("config validation") {
  LossConfig c;
  c.tau = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.tau = 0.05;
  c.lambda = 1.2;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}
