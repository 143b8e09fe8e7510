#include <cmath>

#include <fmt/format.h>

#include "invlab/estimators.hpp"
#include "invlab/kernels.hpp"

namespace invlab {

namespace {

// Nearest point of conv{z_i} to the origin by Mitchell-Demyanov-Malozemov
// pair steps. Runs only until the iterate p = Z^T lambda separates every
// sample (then the data are separable) or |p| vanishes (then they are not).
Vec separating_weights(const Mat& k, long max_steps) {
  const Eigen::Index n = k.rows();
  const double scale = k.diagonal().maxCoeff();
  Vec lambda = Vec::Constant(n, 1.0 / n);
  Vec g = k * lambda;
  for (long step = 0; step < max_steps; ++step) {
    if (step % 1000 == 999) g = k * lambda;
    Eigen::Index i = 0;
    g.minCoeff(&i);
    if (g[i] > 0.0) return lambda;
    const double p2 = lambda.dot(g);
    Eigen::Index j = -1;
    for (Eigen::Index c = 0; c < n; ++c)
      if (lambda[c] > 0.0 && (j < 0 || g[c] > g[j])) j = c;
    const double spread = g[j] - g[i];
    if (p2 <= 1e-13 * scale || spread <= 1e-15 * scale) {
      throw NotSeparable(
          fmt::format("data are not linearly separable through the origin (hull residual {:.3g})",
                      std::sqrt(std::max(p2, 0.0))),
          lambda, std::sqrt(std::max(p2, 0.0)));
    }
    const double curv = k(i, i) + k(j, j) - 2.0 * k(i, j);
    const double t = curv > 0.0 ? std::min(lambda[j], spread / curv) : lambda[j];
    lambda[i] += t;
    lambda[j] -= t;
    g += t * (k.col(i) - k.col(j));
  }
  throw ConvergenceError("separability check did not finish within its step budget");
}

}  // namespace

MaxMarginResult max_margin(const LabeledDataset& data, double tol, int max_sweeps) {
  if (data.empty()) throw InvalidArgument("max margin of an empty dataset");
  if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  const RowMat z = data.signed_rows();
  const Mat k = gram_parallel(z);
  const Eigen::Index n = k.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(k(i, i) > 0.0)) {
      Vec e = Vec::Zero(n);
      e[i] = 1.0;
      throw NotSeparable(fmt::format("sample {} is the zero vector", i), e, 0.0);
    }
  }

  Vec lambda = separating_weights(k, 1000L * n + 100000L);
  // Start the dual from w = p / |p|^2, which has margin >= min_i <z_i, p> / |p|^2.
  Vec ka = k * lambda;
  const double p2 = lambda.dot(ka);
  Vec alpha = lambda / p2;
  ka /= p2;

  double gap = 1.0, margin = 0.0;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    margin = ka.minCoeff();
    if (margin > 0.0) {
      const double q = alpha.dot(ka);
      const double primal = 0.5 * q / (margin * margin);
      const double dual = alpha.sum() - 0.5 * q;
      gap = (primal - dual) / primal;
      if (gap <= tol) break;
    }
    // Exact coordinate maximization of sum(alpha) - alpha^T K alpha / 2, alpha >= 0.
    for (Eigen::Index i = 0; i < n; ++i) {
      const double next = std::max(0.0, alpha[i] + (1.0 - ka[i]) / k(i, i));
      const double delta = next - alpha[i];
      if (delta != 0.0) {
        alpha[i] = next;
        ka += delta * k.col(i);
      }
    }
    if (sweep % 64 == 63) ka = k * alpha;
  }
  if (sweep == max_sweeps)
    throw ConvergenceError(fmt::format("max margin stopped at relative gap {:.3g} > {:.3g}", gap, tol));
  alpha /= margin;
  Vec w = z.transpose() * alpha;
  return {LinearModel(std::move(w)), std::move(alpha), std::max(gap, 0.0), sweep};
}

}  // namespace invlab
