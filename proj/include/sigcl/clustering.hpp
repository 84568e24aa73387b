#pragma once

// K-means with k-means++ seeding and restarts, plus clustering accuracy under
// the best one-to-one cluster-to-class mapping.

#include <cstdint>
#include <span>
#include <vector>

#include "sigcl/matrix.hpp"

namespace sigcl::clustering {

struct KMeansConfig {
  std::size_t k = 2;
  std::size_t max_iters = 100;
  double tol = 1e-4;  // stop once no center moves farther than this
  std::size_t restarts = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct KMeansResult {
  std::vector<std::size_t> assignments;
  Mat centers;
  double wcss = 0.0;
  // WCSS after each assignment step, one vector per restart.
  std::vector<std::vector<double>> history;
  std::size_t best_restart = 0;
};

KMeansResult kmeans_fit(const Mat& x, const KMeansConfig& cfg);

// Square assignment: returns col[r] for each row minimizing sum cost(r, col[r]).
std::vector<std::size_t> hungarian(const Mat& cost);

double cluster_accuracy(std::span<const std::size_t> assignments, std::span<const std::size_t> truth,
                        std::size_t k);

inline double reward(double acc, double acc_prev) { return acc - acc_prev; }

}  // namespace sigcl::clustering
