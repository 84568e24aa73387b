#include "sigcl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sigcl/errors.hpp"
#include "sigcl/rng.hpp"

namespace sigcl::clustering {
namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

Mat plus_plus_init(const Mat& x, std::size_t k, Rng& rng) {
  const std::size_t m = x.rows, d = x.cols;
  Mat c(k, d);
  std::size_t first = uniform_index(rng, m);
  std::copy_n(x.row(first), d, c.row(0));
  std::vector<double> best(m);
  for (std::size_t i = 0; i < m; ++i) best[i] = sq_dist(x.row(i), c.row(0), d);
  for (std::size_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (double b : best) total += b;
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = uniform01(rng) * total;
      pick = m - 1;
      for (std::size_t i = 0; i < m; ++i) {
        r -= best[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, m);
    }
    std::copy_n(x.row(pick), d, c.row(j));
    for (std::size_t i = 0; i < m; ++i) best[i] = std::min(best[i], sq_dist(x.row(i), c.row(j), d));
  }
  return c;
}

struct Lloyd {
  std::vector<std::size_t> assign;
  Mat centers;
  double wcss;
  std::vector<double> history;
};

double assign_points(const Mat& x, const Mat& c, std::vector<std::size_t>& assign) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < c.rows; ++j) {
      const double dd = sq_dist(x.row(i), c.row(j), x.cols);
      if (dd < best) {
        best = dd;
        arg = j;
      }
    }
    assign[i] = arg;
    total += best;
  }
  return total;
}

Lloyd run_lloyd(const Mat& x, const KMeansConfig& cfg, Rng& rng) {
  const std::size_t m = x.rows, d = x.cols, k = cfg.k;
  Lloyd out{std::vector<std::size_t>(m), plus_plus_init(x, k, rng), 0.0, {}};
  out.wcss = assign_points(x, out.centers, out.assign);
  out.history.push_back(out.wcss);
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    Mat next(k, d);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < m; ++i) {
      ++count[out.assign[i]];
      double* row = next.row(out.assign[i]);
      for (std::size_t t = 0; t < d; ++t) row[t] += x(i, t);
    }
    // Empty clusters take the point currently worst served by its center.
    std::vector<bool> taken(m, false);
    for (std::size_t j = 0; j < k; ++j) {
      if (count[j] > 0) {
        for (std::size_t t = 0; t < d; ++t) next(j, t) /= static_cast<double>(count[j]);
        continue;
      }
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (taken[i]) continue;
        const double dd = sq_dist(x.row(i), out.centers.row(out.assign[i]), d);
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      taken[far] = true;
      std::copy_n(x.row(far), d, next.row(j));
    }
    double moved = 0.0;
    for (std::size_t j = 0; j < k; ++j) moved = std::max(moved, std::sqrt(sq_dist(next.row(j), out.centers.row(j), d)));
    out.centers = std::move(next);
    out.wcss = assign_points(x, out.centers, out.assign);
    out.history.push_back(out.wcss);
    if (moved <= cfg.tol) break;
  }
  return out;
}

}  // namespace

void KMeansConfig::validate() const {
  if (k < 2) throw InvalidArgument("KMeansConfig: k must be at least 2");
  if (restarts < 1) throw InvalidArgument("KMeansConfig: restarts must be at least 1");
  if (!(tol >= 0.0)) throw InvalidArgument("KMeansConfig: tol must be non-negative");
}

KMeansResult kmeans_fit(const Mat& x, const KMeansConfig& cfg) {
  cfg.validate();
  if (x.rows < cfg.k)
    throw InvalidArgument("kmeans_fit: " + std::to_string(x.rows) + " points for k = " + std::to_string(cfg.k));
  for (double v : x.v)
    if (!std::isfinite(v)) throw InvalidArgument("kmeans_fit: non-finite input");
  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    Rng rng = make_rng(cfg.seed, r);
    Lloyd run = run_lloyd(x, cfg, rng);
    best.history.push_back(run.history);
    if (run.wcss < best.wcss) {
      best.wcss = run.wcss;
      best.assignments = std::move(run.assign);
      best.centers = std::move(run.centers);
      best.best_restart = r;
    }
  }
  return best;
}

// Shortest augmenting path (Jonker-Volgenant style potentials), O(n^3).
std::vector<std::size_t> hungarian(const Mat& cost) {
  const std::size_t n = cost.rows;
  if (cost.cols != n) throw InvalidArgument("hungarian: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col(n);
  for (std::size_t j = 1; j <= n; ++j) col[p[j] - 1] = j - 1;
  return col;
}

double cluster_accuracy(std::span<const std::size_t> assignments, std::span<const std::size_t> truth,
                        std::size_t k) {
  if (assignments.size() != truth.size())
    throw InvalidArgument("cluster_accuracy: assignment and label counts differ");
  if (assignments.empty()) throw InvalidArgument("cluster_accuracy: no samples");
  Mat hits(k, k);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (assignments[i] >= k || truth[i] >= k) throw InvalidArgument("cluster_accuracy: label out of range");
    hits(assignments[i], truth[i]) += 1.0;
  }
  Mat cost(k, k);
  for (std::size_t i = 0; i < k * k; ++i) cost.v[i] = -hits.v[i];
  const auto col = hungarian(cost);
  double correct = 0.0;
  for (std::size_t r = 0; r < k; ++r) correct += hits(r, col[r]);
  return correct / static_cast<double>(truth.size());
}

}  // namespace sigcl::clustering
