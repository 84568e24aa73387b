#pragma once

// Cosine-similarity contrastive losses within and across representation
// domains, with analytic gradients.

#include <array>
#include <map>
#include <string>

#include "sigcl/domains.hpp"
#include "sigcl/matrix.hpp"

namespace sigcl::conloss {

struct LossTerms {
  bool intra = true;        // within-domain original vs augmented
  bool inter_orig = true;   // cross-domain between originals
  bool inter_aug = true;    // cross-domain between augmented views
  bool inter_cross = false; // cross-domain original vs augmented
};

struct LossConfig {
  double tau = 0.05;
  double lambda = 0.8;
  LossTerms terms{};
  // Adds the positive pair to the denominator (NT-Xent form).
  bool simclr_denominator = false;

  void validate() const;
};

// (i, j) = <a_i, c_j> / (|a_i| |c_j|). Throws on a zero-norm row.
Mat cos_sim_matrix(const Mat& a, const Mat& c);

struct PairLoss {
  double value = 0.0;
  Mat grad_anchor;
  Mat grad_positive;
};

// mean_i -log( exp(s(a_i,p_i)/tau) / sum_{j != i} [exp(s(a_i,a_j)/tau) + exp(s(a_i,p_j)/tau)] )
// The anchor's own batch supplies the first negative family and the positive
// batch the second. Used for both intra-domain (p = augmented view) and
// inter-domain (p = other domain) terms.
PairLoss pair_loss(const Mat& anchor, const Mat& positive, double tau, bool simclr_denominator = false);

double intra_loss(const Mat& z, const Mat& z_aug, double tau);
double inter_loss(const Mat& za, const Mat& zb, double tau);

// Six projected batches indexed [domain][0 = original, 1 = augmented].
// Disabled domains must be left empty.
struct ViewSet {
  std::array<std::array<Mat, 2>, domains::kNumDomains> z;
  std::array<bool, domains::kNumDomains> enabled{true, true, true};
};

struct TotalLoss {
  double value = 0.0;
  double intra_sum = 0.0;
  double inter_sum = 0.0;
  std::map<std::string, double> breakdown;
  std::array<std::array<Mat, 2>, domains::kNumDomains> grad;
};

// lambda * sum(intra) + (1 - lambda) * sum(inter); disabled flags drop terms.
TotalLoss total_loss(const ViewSet& views, const LossConfig& cfg);

}  // namespace sigcl::conloss
