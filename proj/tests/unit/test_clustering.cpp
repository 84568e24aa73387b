#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "sigcl/clustering.hpp"
#include "sigcl/errors.hpp"
#include "sigcl/rng.hpp"

using namespace sigcl;
using namespace sigcl::clustering;

namespace {

double brute_accuracy(const std::vector<std::size_t>& assign, const std::vector<std::size_t>& truth, std::size_t k) {
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < assign.size(); ++i) hits += perm[assign[i]] == truth[i];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(assign.size());
}

Mat blobs(std::size_t per, std::size_t k, std::size_t d, double spread, Rng& rng, std::vector<std::size_t>& truth) {
  Mat x(per * k, d);
  truth.clear();
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < per; ++i) {
      for (std::size_t j = 0; j < d; ++j) x(c * per + i, j) = (j == c % d ? 10.0 * (1 + c / d) : 0.0) + spread * standard_normal(rng);
      truth.push_back(c);
    }
  return x;
}

}  // namespace

TEST_CASE("hungarian solves small assignments optimally") {
  Rng rng = make_rng(1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 6);
    Mat cost(n, n);
    for (double& v : cost.v) v = std::floor(uniform(rng, 0, 20));
    const auto col = hungarian(cost);
    double got = 0.0;
    for (std::size_t r = 0; r < n; ++r) got += cost(r, col[r]);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += cost(r, perm[r]);
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(got == best);
    std::vector<std::size_t> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t r = 0; r < n; ++r) CHECK(sorted[r] == r);
  }
  CHECK_THROWS_AS(hungarian(Mat(2, 3)), InvalidArgument);
}

TEST_CASE("cluster accuracy equals the best permutation") {
  Rng rng = make_rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 1 + uniform_index(rng, 5);
    const std::size_t m = 1 + uniform_index(rng, 40);
    std::vector<std::size_t> a(m), y(m);
    for (std::size_t i = 0; i < m; ++i) {
      a[i] = uniform_index(rng, k);
      y[i] = uniform_index(rng, k);
    }
    CHECK(cluster_accuracy(a, y, k) == doctest::Approx(brute_accuracy(a, y, k)).epsilon(1e-12));
  }
  const std::vector<std::size_t> relabeled{2, 2, 0, 0, 1}, truth{0, 0, 1, 1, 2};
  CHECK(cluster_accuracy(relabeled, truth, 3) == 1.0);
  CHECK(reward(0.7, 0.5) == doctest::Approx(0.2));
}

TEST_CASE("k-means recovers separated blobs") {
  Rng rng = make_rng(3);
  std::vector<std::size_t> truth;
  const Mat x = blobs(20, 4, 4, 0.5, rng, truth);
  KMeansConfig cfg;
  cfg.k = 4;
  cfg.seed = 9;
  const KMeansResult r = kmeans_fit(x, cfg);
  CHECK(cluster_accuracy(r.assignments, truth, 4) == 1.0);
  CHECK(r.centers.rows == 4);
  CHECK(r.history.size() == cfg.restarts);
  double best = 1e300;
  for (const auto& h : r.history) best = std::min(best, h.back());
  CHECK(r.wcss == doctest::Approx(best));
}

TEST_CASE("k-means WCSS never increases and fits are deterministic") {
  Rng rng = make_rng(4);
  for (int t = 0; t < 50; ++t) {
    const std::size_t m = 10 + uniform_index(rng, 60);
    Mat x(m, 3);
    for (double& v : x.v) v = standard_normal(rng);
    KMeansConfig cfg;
    cfg.k = 2 + uniform_index(rng, 4);
    cfg.seed = static_cast<std::uint64_t>(t);
    const KMeansResult r = kmeans_fit(x, cfg);
    for (const auto& h : r.history)
      for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] + 1e-9 * std::max(1.0, h[i - 1]));
    const KMeansResult again = kmeans_fit(x, cfg);
    CHECK(again.assignments == r.assignments);
  }
}

TEST_CASE("k-means handles duplicates and validates input") {
  Mat x(6, 2, 1.0);
  x(5, 0) = 5.0;
  KMeansConfig cfg;
  cfg.k = 3;
  const KMeansResult r = kmeans_fit(x, cfg);
  CHECK(r.assignments.size() == 6);
  CHECK(r.wcss == doctest::Approx(0.0).scale(1.0));
  cfg.k = 7;
  CHECK_THROWS_AS(kmeans_fit(x, cfg), InvalidArgument);
  cfg.k = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}
