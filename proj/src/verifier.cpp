#include "invlab/verifier.hpp"

#include <cmath>

#include <fmt/format.h>

#include "invlab/kernels.hpp"

namespace invlab {

GramData make_gram_data(const LabeledDataset& data, double gamma, double theta_2) {
  if (data.empty()) throw InvalidArgument("Gram data of an empty dataset");
  if (!(gamma >= 0.0)) throw InvalidArgument("target margin must be nonnegative");
  GramData gd;
  gd.z = data.signed_rows();
  gd.gram = gram_parallel(gd.z);
  gd.e1 = Vec::Zero(data.size());
  gd.e2 = Vec::Zero(data.size());
  for (int i = 0; i < data.size(); ++i) (data.env()[i] == 1 ? gd.e1 : gd.e2)[i] = 1.0;
  gd.gamma = gamma;
  gd.theta_2 = theta_2;
  return gd;
}

namespace {

Eigen::LLT<Mat> checked_cholesky(const Mat& k, double eigen_floor) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(k, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  if (!(lo >= eigen_floor))
    throw NumericalError(
        fmt::format("Gram matrix too ill-conditioned: min eigenvalue {:.4g} < {:.4g}", lo, eigen_floor));
  Eigen::LLT<Mat> llt(k);
  if (llt.info() != Eigen::Success) throw NumericalError("Cholesky factorization failed");
  return llt;
}

// max_{lambda >= 0} b^T lambda - lambda^T K lambda / 2 by exact coordinate
// steps, warm-started from `lambda`. Returns K lambda.
Vec box_qp(const Mat& k, const Vec& b, Vec& lambda, double tol) {
  const Eigen::Index n = k.rows();
  Vec kl = k * lambda;
  for (int sweep = 0; sweep < 200000; ++sweep) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double grad = b[i] - kl[i];
      const double viol = lambda[i] > 0.0 ? std::abs(grad) : std::max(grad, 0.0);
      worst = std::max(worst, viol);
      const double next = std::max(0.0, lambda[i] + grad / k(i, i));
      const double delta = next - lambda[i];
      if (delta != 0.0) {
        lambda[i] = next;
        kl += delta * k.col(i);
      }
    }
    if (sweep % 64 == 63) kl = k * lambda;
    if (worst <= tol) return k * lambda;
  }
  throw ConvergenceError("margin-multiplier QP did not converge");
}

}  // namespace

double dual_value(const GramData& gd, const Vec& lambda, double eigen_floor) {
  if (lambda.size() != gd.size()) throw InvalidArgument("multiplier has the wrong length");
  if ((lambda.array() < 0.0).any()) throw InvalidArgument("multipliers must be nonnegative");
  const auto llt = checked_cholesky(gd.gram, eigen_floor);
  const Vec r = gd.weights() - gd.gram * lambda;
  const double q = r.dot(llt.solve(r));
  return gd.gamma * lambda.sum() - std::sqrt(std::max(q, 0.0));
}

BetaSolution min_weighted_beta(const GramData& gd, double tol, double eigen_floor) {
  const Mat& k = gd.gram;
  const Eigen::Index n = k.rows();
  const auto llt = checked_cholesky(k, eigen_floor);
  const Vec u = gd.weights();
  const Vec kinv_u = llt.solve(u);
  const Vec ones = Vec::Ones(n);
  const double qp_tol = 1e-14 * (1.0 + u.cwiseAbs().maxCoeff() + gd.gamma);

  // Smallest-norm point of the margin polyhedron decides feasibility.
  {
    Vec a = Vec::Zero(n);
    box_qp(k, gd.gamma * ones, a, qp_tol);
    const double min_norm2 = a.dot(k * a);
    if (min_norm2 > 1.0 + 1e-12)
      throw InvalidArgument(fmt::format(
          "target margin {} is infeasible: smallest beta^T K beta is {:.6g}", gd.gamma, min_norm2));
  }

  BetaSolution sol;
  // If K^{-1} u >= 0 the linear objective is bounded on the polyhedron alone
  // and its minimizer gamma K^{-1} 1 may already satisfy the norm bound.
  if ((kinv_u.array() >= 0.0).all()) {
    const Vec beta = gd.gamma * llt.solve(ones);
    if (beta.dot(k * beta) <= 1.0) {
      sol.beta = beta;
      sol.optimum = u.dot(beta);
      sol.lambda = kinv_u;
      sol.dual = dual_value(gd, sol.lambda, eigen_floor);
      sol.gap = sol.optimum - sol.dual;
      sol.norm_active = false;
      return sol;
    }
  }

  // For nu > 0 the multipliers solve max (u + nu gamma 1)^T l - l^T K l / 2
  // and beta(nu) = (l - K^{-1} u) / nu. The norm beta^T K beta decreases in nu.
  Vec lambda = Vec::Zero(n);
  auto norm2_at = [&](double nu, Vec& l) {
    const Vec kl = box_qp(k, u + nu * gd.gamma * ones, l, qp_tol);
    const Vec r = kl - u;
    return r.dot(llt.solve(r)) / (nu * nu);
  };
  double hi = 1.0, lo = 1.0;
  Vec l_hi = lambda, l_lo = lambda;
  while (norm2_at(hi, l_hi) > 1.0) {
    hi *= 2.0;
    if (hi > 1e30) throw NumericalError("could not bracket the norm multiplier");
  }
  l_lo = l_hi;
  while (norm2_at(lo, l_lo) < 1.0) {
    lo *= 0.5;
    if (lo < 1e-30) throw NumericalError("could not bracket the norm multiplier");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = std::sqrt(lo * hi);
    Vec l_mid = l_hi;
    if (norm2_at(mid, l_mid) > 1.0) {
      lo = mid;
      l_lo = l_mid;
    } else {
      hi = mid;
      l_hi = l_mid;
    }
  }
  // nu = hi keeps the norm constraint satisfied.
  const double nu = hi;
  sol.lambda = l_hi;
  sol.beta = (sol.lambda - kinv_u) / nu;
  sol.optimum = u.dot(sol.beta);
  sol.dual = dual_value(gd, sol.lambda, eigen_floor);
  sol.gap = sol.optimum - sol.dual;
  sol.norm_active = true;
  if (sol.gap > tol * (1.0 + std::abs(sol.optimum)))
    throw ConvergenceError(fmt::format("primal-dual gap {:.3g} above tolerance {:.3g}", sol.gap, tol));
  return sol;
}

Vec canonical_multiplier(const GramData& gd, double r_c, double r_s) {
  const double n_1 = gd.e1.sum();
  const double alpha = 1.0 / (1.0 + n_1 * (r_c * r_c + r_s * r_s));
  return alpha * gd.e1;
}

double closed_form_bound(int n_1, int n_2, double gamma, double theta_2, double r_c, double d,
                         double t) {
  const double n = n_1 + n_2;
  const double pos = std::max(theta_2, 0.0), neg = std::max(-theta_2, 0.0);
  return 0.5 * ((n_1 + pos * n_2) * gamma - std::sqrt(2.0 * n_2) * n_1 * r_c * r_c -
                std::sqrt(18.0 * n) * (std::sqrt(n) + t) / std::sqrt(d) -
                std::sqrt(8.0 * n_2) * neg);
}

namespace {

Vec row_thetas(const LabeledDataset& data, const PopulationTruth& truth) {
  Vec tau(data.size());
  for (int i = 0; i < data.size(); ++i) tau[i] = data.env()[i] == 1 ? truth.theta_1 : truth.theta_2;
  return tau;
}

}  // namespace

Mat expected_gram(const LabeledDataset& data, const PopulationTruth& truth) {
  const Eigen::Index n = data.size();
  const Vec tau = row_thetas(data, truth);
  const double rc2 = truth.mu_c.squaredNorm(), rs2 = truth.mu_s.squaredNorm();
  Mat e = rc2 * Mat::Ones(n, n) + rs2 * tau * tau.transpose();
  e.diagonal().array() += truth.sigma * truth.sigma * data.dim();
  return e;
}

RowMat noise_matrix(const LabeledDataset& data, const PopulationTruth& truth) {
  RowMat g = data.signed_rows();
  const Vec tau = row_thetas(data, truth);
  g.rowwise() -= truth.mu_c.transpose();
  g -= tau * truth.mu_s.transpose();
  return g;
}

SpectralReport check_spectral_events(const LabeledDataset& data, const PopulationTruth& truth,
                                     double t) {
  if (!(t >= 0.0)) throw InvalidArgument("t must be nonnegative");
  const double n = data.size(), d = data.dim();
  SpectralReport rep;
  rep.t = t;
  const RowMat g = noise_matrix(data, truth);

  Eigen::SelfAdjointEigenSolver<Mat> gg(gram_parallel(g), Eigen::EigenvaluesOnly);
  rep.sv_min = std::sqrt(std::max(gg.eigenvalues().minCoeff(), 0.0));
  rep.sv_max = std::sqrt(std::max(gg.eigenvalues().maxCoeff(), 0.0));
  const double width = (std::sqrt(n) + t) / std::sqrt(d);
  rep.sv_lo = 1.0 - width;
  rep.sv_hi = 1.0 + width;
  rep.sv_ok = rep.sv_min >= rep.sv_lo && rep.sv_max <= rep.sv_hi;

  const double scale = t * std::sqrt(n / d);
  rep.g_mu_c = (g * truth.mu_c).norm();
  rep.g_mu_c_bound = scale * truth.mu_c.norm();
  rep.g_mu_c_ok = rep.g_mu_c <= rep.g_mu_c_bound;
  rep.g_mu_s = (g * truth.mu_s).norm();
  rep.g_mu_s_bound = scale * truth.mu_s.norm();
  rep.g_mu_s_ok = rep.g_mu_s <= rep.g_mu_s_bound;

  const Mat k = gram_parallel(data.signed_rows());
  Eigen::SelfAdjointEigenSolver<Mat> dev(k - expected_gram(data, truth), Eigen::EigenvaluesOnly);
  rep.gram_deviation = dev.eigenvalues().cwiseAbs().maxCoeff();
  rep.gram_deviation_bound = 3.0 * width;
  rep.gram_deviation_ok = rep.gram_deviation <= rep.gram_deviation_bound;

  Eigen::SelfAdjointEigenSolver<Mat> ke(k, Eigen::EigenvaluesOnly);
  rep.gram_eig_min = ke.eigenvalues().minCoeff();
  rep.gram_eig_max = ke.eigenvalues().maxCoeff();
  rep.gram_sandwich_ok = rep.gram_eig_min >= 0.5 && rep.gram_eig_max <= 2.0;

  rep.condition = width + std::sqrt(n) * (truth.mu_c.norm() + truth.mu_s.norm());
  rep.condition_ok = rep.condition <= 0.5;
  rep.failure_budget = 6.0 * std::exp(-t * t / 2.0);
  return rep;
}

SpanDecomposition span_decomposition(const Vec& w, const LabeledDataset& data) {
  if (w.size() != data.dim()) throw InvalidArgument("vector and data differ in dimension");
  if (data.dim() <= data.size())
    throw InvalidArgument(fmt::format("need d > N, got d = {}, N = {}", data.dim(), data.size()));
  const RowMat z = data.signed_rows();
  const Mat k = gram_parallel(z);
  Eigen::SelfAdjointEigenSolver<Mat> eig(k, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 1e-12 * hi)) throw NumericalError("signed samples are linearly dependent");
  const Vec coeff = k.llt().solve(z * w);
  Vec in_span = z.transpose() * coeff;
  Vec orthogonal = w - in_span;
  return {std::move(in_span), std::move(orthogonal)};
}

double orthogonal_complement_stats(const LinearModel& model, const LabeledDataset& data,
                                   const Vec& mu) {
  const SpanDecomposition parts = span_decomposition(model.w(), data);
  const double mn = mu.norm();
  if (!(mn > 0.0)) throw InvalidArgument("reference direction must be nonzero");
  return std::abs(parts.orthogonal.dot(mu)) / (model.norm() * mn);
}

}  // namespace invlab
