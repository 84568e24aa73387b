#include "sigcl/conloss.hpp"

#include <cmath>
#include <limits>

#include "sigcl/errors.hpp"

namespace sigcl::conloss {
namespace {

struct Normalized {
  Mat unit;
  std::vector<double> norm;
};

Normalized normalize_rows(const Mat& m) {
  Normalized out{Mat(m.rows, m.cols), std::vector<double>(m.rows)};
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < m.cols; ++k) s += m(i, k) * m(i, k);
    const double n = std::sqrt(s);
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("cosine similarity: zero-norm or non-finite row " + std::to_string(i));
    out.norm[i] = n;
    for (std::size_t k = 0; k < m.cols; ++k) out.unit(i, k) = m(i, k) / n;
  }
  return out;
}

Mat gram(const Mat& a, const Mat& c) {
  Mat out(a.rows, c.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < c.rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * c(j, k);
      out(i, j) = s;
    }
  return out;
}

// Gradient through x_hat = x / |x| given dL/dx_hat.
Mat unnormalize_grad(const Normalized& n, const Mat& g_unit) {
  Mat g(g_unit.rows, g_unit.cols);
  for (std::size_t i = 0; i < g.rows; ++i) {
    double proj = 0.0;
    for (std::size_t k = 0; k < g.cols; ++k) proj += n.unit(i, k) * g_unit(i, k);
    for (std::size_t k = 0; k < g.cols; ++k) g(i, k) = (g_unit(i, k) - n.unit(i, k) * proj) / n.norm[i];
  }
  return g;
}

void add_scaled(Mat& dst, const Mat& src, double s) {
  if (dst.v.empty()) dst = Mat(src.rows, src.cols);
  for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += s * src.v[i];
}

}  // namespace

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw InvalidArgument("LossConfig: tau must be positive");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("LossConfig: lambda must lie in [0, 1]");
}

Mat cos_sim_matrix(const Mat& a, const Mat& c) {
  if (a.cols != c.cols) throw InvalidArgument("cos_sim_matrix: column counts differ");
  return gram(normalize_rows(a).unit, normalize_rows(c).unit);
}

PairLoss pair_loss(const Mat& anchor, const Mat& positive, double tau, bool simclr_denominator) {
  if (anchor.rows != positive.rows || anchor.cols != positive.cols)
    throw InvalidArgument("contrastive loss: batch shapes differ");
  const std::size_t b = anchor.rows;
  if (b < 2) throw InvalidArgument("contrastive loss: batch size must be at least 2");
  const Normalized na = normalize_rows(anchor);
  const Normalized np = normalize_rows(positive);
  const Mat s_aa = gram(na.unit, na.unit);
  const Mat s_ap = gram(na.unit, np.unit);

  Mat g_aa(b, b), g_ap(b, b);
  const double inv_b = 1.0 / static_cast<double>(b);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      mx = std::max({mx, s_aa(i, j) / tau, s_ap(i, j) / tau});
    }
    if (simclr_denominator) mx = std::max(mx, s_ap(i, i) / tau);
    double denom = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      denom += std::exp(s_aa(i, j) / tau - mx) + std::exp(s_ap(i, j) / tau - mx);
    }
    if (simclr_denominator) denom += std::exp(s_ap(i, i) / tau - mx);
    total += -s_ap(i, i) / tau + mx + std::log(denom);

    const double scale = inv_b / tau;
    g_ap(i, i) -= scale;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      g_aa(i, j) += scale * std::exp(s_aa(i, j) / tau - mx) / denom;
      g_ap(i, j) += scale * std::exp(s_ap(i, j) / tau - mx) / denom;
    }
    if (simclr_denominator) g_ap(i, i) += scale * std::exp(s_ap(i, i) / tau - mx) / denom;
  }

  // s_aa(i,j) = a_i . a_j feeds both rows; s_ap(i,j) = a_i . p_j.
  const std::size_t d = anchor.cols;
  Mat ga_unit(b, d), gp_unit(b, d);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      const double waa = g_aa(i, j) + g_aa(j, i);
      const double wap = g_ap(i, j);
      const double wpa = g_ap(j, i);
      for (std::size_t k = 0; k < d; ++k) {
        ga_unit(i, k) += waa * na.unit(j, k) + wap * np.unit(j, k);
        gp_unit(i, k) += wpa * na.unit(j, k);
      }
    }
  }
  return {total * inv_b, unnormalize_grad(na, ga_unit), unnormalize_grad(np, gp_unit)};
}

double intra_loss(const Mat& z, const Mat& z_aug, double tau) { return pair_loss(z, z_aug, tau).value; }

double inter_loss(const Mat& za, const Mat& zb, double tau) { return pair_loss(za, zb, tau).value; }

TotalLoss total_loss(const ViewSet& views, const LossConfig& cfg) {
  cfg.validate();
  TotalLoss out;
  std::size_t rows = 0, cols = 0;
  for (std::size_t d = 0; d < domains::kNumDomains; ++d) {
    if (!views.enabled[d]) continue;
    for (int v = 0; v < 2; ++v) {
      const Mat& m = views.z[d][v];
      if (rows == 0) {
        rows = m.rows;
        cols = m.cols;
      } else if (m.rows != rows || m.cols != cols) {
        throw InvalidArgument("total_loss: inconsistent embedding shapes");
      }
    }
  }
  if (rows < 2) throw InvalidArgument("total_loss: batch size must be at least 2");
  for (std::size_t d = 0; d < domains::kNumDomains; ++d)
    if (views.enabled[d]) out.grad[d] = {Mat(rows, cols), Mat(rows, cols)};

  auto tag = [](std::size_t d) { return std::string(domains::domain_tag(static_cast<domains::Domain>(d))); };
  auto accumulate = [&](const std::string& name, std::size_t da, int va, std::size_t db, int vb, bool intra) {
    const PairLoss pl = pair_loss(views.z[da][va], views.z[db][vb], cfg.tau, cfg.simclr_denominator);
    const double w = intra ? cfg.lambda : 1.0 - cfg.lambda;
    out.breakdown[name] = pl.value;
    (intra ? out.intra_sum : out.inter_sum) += pl.value;
    add_scaled(out.grad[da][va], pl.grad_anchor, w);
    add_scaled(out.grad[db][vb], pl.grad_positive, w);
  };

  if (cfg.terms.intra)
    for (std::size_t d = 0; d < domains::kNumDomains; ++d)
      if (views.enabled[d]) accumulate("intra_" + tag(d), d, 0, d, 1, true);

  constexpr std::array<std::array<std::size_t, 2>, 3> pairs{{{0, 1}, {0, 2}, {1, 2}}};
  for (const auto& [a, b] : pairs) {
    if (!views.enabled[a] || !views.enabled[b]) continue;
    const std::string ab = tag(a) + tag(b);
    if (cfg.terms.inter_orig) accumulate("inter_" + ab, a, 0, b, 0, false);
    if (cfg.terms.inter_aug) accumulate("inter_aug_" + ab, a, 1, b, 1, false);
    if (cfg.terms.inter_cross) {
      accumulate("cross_" + tag(a) + "_" + tag(b) + "aug", a, 0, b, 1, false);
      accumulate("cross_" + tag(a) + "aug_" + tag(b), a, 1, b, 0, false);
    }
  }
  out.value = cfg.lambda * out.intra_sum + (1.0 - cfg.lambda) * out.inter_sum;
  return out;
}

}  // namespace sigcl::conloss
