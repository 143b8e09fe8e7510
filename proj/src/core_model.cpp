#include "invlab/core_model.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace invlab {

void EnvironmentSpec::validate() const {
  if (mu_c.size() != mu_s.size()) throw InvalidArgument("mu_c and mu_s differ in length");
  if (!(sigma > 0.0)) throw InvalidArgument(fmt::format("sigma must be positive, got {}", sigma));
  if (!(theta >= -1.0 && theta <= 1.0))
    throw InvalidArgument(fmt::format("theta must lie in [-1, 1], got {}", theta));
  const double tol = 1e-9 * mu_c.norm() * mu_s.norm();
  if (std::abs(mu_c.dot(mu_s)) > tol) throw InvalidArgument("mu_c and mu_s are not orthogonal");
}

EnvironmentSpec ProblemInstance::environment(int env) const {
  if (env != 1 && env != 2) throw InvalidArgument(fmt::format("no environment {}", env));
  return {mu_c, mu_s, sigma, env == 1 ? theta_1 : theta_2};
}

void ProblemInstance::validate() const {
  if (mu_c.size() < 1) throw InvalidArgument("empty mean vectors");
  if (!(r_c() > 0.0) || !(r_s() > 0.0)) throw InvalidArgument("mean norms must be positive");
  environment(1).validate();
  environment(2).validate();
  if (n_1 <= 0 || n_2 <= 0)
    throw InvalidArgument(fmt::format("sample sizes must be positive, got {} and {}", n_1, n_2));
}

LabeledDataset::LabeledDataset(RowMat x, Vec y, std::vector<int> env)
    : x_(std::move(x)), y_(std::move(y)), env_(std::move(env)) {
  if (y_.size() != x_.rows() || static_cast<Eigen::Index>(env_.size()) != x_.rows())
    throw InvalidArgument("row count of X must match labels and environment tags");
  for (Eigen::Index i = 0; i < y_.size(); ++i) {
    if (y_[i] != 1.0 && y_[i] != -1.0)
      throw InvalidArgument(fmt::format("label {} at row {} is not +-1", y_[i], i));
    if (env_[i] != 1 && env_[i] != 2)
      throw InvalidArgument(fmt::format("environment tag {} at row {} is not 1 or 2", env_[i], i));
  }
}

int LabeledDataset::count_env(int e) const {
  int n = 0;
  for (int t : env_) n += (t == e);
  return n;
}

RowMat LabeledDataset::signed_rows() const { return y_.asDiagonal() * x_; }

LabeledDataset LabeledDataset::subset(const std::vector<int>& rows) const {
  RowMat x(rows.size(), x_.cols());
  Vec y(rows.size());
  std::vector<int> env(rows.size());
  for (size_t k = 0; k < rows.size(); ++k) {
    x.row(k) = x_.row(rows[k]);
    y[k] = y_[rows[k]];
    env[k] = env_[rows[k]];
  }
  return LabeledDataset(std::move(x), std::move(y), std::move(env));
}

LabeledDataset LabeledDataset::environment(int e) const {
  std::vector<int> rows;
  for (int i = 0; i < size(); ++i)
    if (env_[i] == e) rows.push_back(i);
  return subset(rows);
}

LabeledDataset LabeledDataset::concat(const LabeledDataset& a, const LabeledDataset& b) {
  if (!a.empty() && !b.empty() && a.dim() != b.dim())
    throw InvalidArgument("cannot concatenate datasets of different dimension");
  const int d = a.empty() ? b.dim() : a.dim();
  RowMat x(a.size() + b.size(), d);
  Vec y(a.size() + b.size());
  if (!a.empty()) {
    x.topRows(a.size()) = a.x();
    y.head(a.size()) = a.y();
  }
  if (!b.empty()) {
    x.bottomRows(b.size()) = b.x();
    y.tail(b.size()) = b.y();
  }
  std::vector<int> env = a.env();
  env.insert(env.end(), b.env().begin(), b.env().end());
  return LabeledDataset(std::move(x), std::move(y), std::move(env));
}

LinearModel::LinearModel(Vec w) : w_(std::move(w)), norm_(w_.norm()) {
  if (!(norm_ > 0.0) || !std::isfinite(norm_))
    throw InvalidArgument("a linear model needs a finite nonzero weight vector");
}

MeanPair sample_orthogonal_means(int d, double r_c, double r_s, Rng& rng) {
  if (d < 2) throw InvalidArgument(fmt::format("need d >= 2 for two orthogonal means, got {}", d));
  if (!(r_c > 0.0) || !(r_s > 0.0)) throw InvalidArgument("mean radii must be positive");
  Vec u(d), v(d);
  for (int k = 0; k < d; ++k) u[k] = rng.normal();
  for (int k = 0; k < d; ++k) v[k] = rng.normal();
  u /= u.norm();
  // Two Gram-Schmidt passes keep the residual inner product at rounding level.
  for (int pass = 0; pass < 2; ++pass) v -= v.dot(u) * u;
  v /= v.norm();
  return {r_c * u, r_s * v};
}

ProblemInstance make_instance(int d, double r_c, double r_s, double theta_1, double theta_2,
                              int n_1, int n_2, double sigma, std::uint64_t seed, Rng& rng) {
  MeanPair means = sample_orthogonal_means(d, r_c, r_s, rng);
  ProblemInstance inst{std::move(means.mu_c), std::move(means.mu_s), theta_1, theta_2, n_1, n_2,
                       sigma, seed};
  inst.validate();
  return inst;
}

LabeledDataset sample_dataset(const ProblemInstance& inst, Rng& rng) {
  inst.validate();
  const int d = inst.dim();
  const int n = inst.total();
  RowMat x(n, d);
  Vec y(n);
  std::vector<int> env(n);
  const Vec mean_1 = inst.mu_c + inst.theta_1 * inst.mu_s;
  const Vec mean_2 = inst.mu_c + inst.theta_2 * inst.mu_s;
  for (int i = 0; i < n; ++i) {
    const int e = i < inst.n_1 ? 1 : 2;
    const double label = (rng.next_u64() >> 63) ? 1.0 : -1.0;
    const Vec& mean = e == 1 ? mean_1 : mean_2;
    for (int k = 0; k < d; ++k) x(i, k) = label * mean[k] + inst.sigma * rng.normal();
    y[i] = label;
    env[i] = e;
  }
  return LabeledDataset(std::move(x), std::move(y), std::move(env));
}

double gaussian_tail(double t) { return 0.5 * std::erfc(t / std::sqrt(2.0)); }

double gaussian_tail_inverse(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw InvalidArgument(fmt::format("tail probability must lie in (0, 1), got {}", p));
  double lo = -40.0, hi = 40.0;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (gaussian_tail(mid) > p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

namespace {

double tail_argument(const LinearModel& model, const Vec& mu_c, const Vec& mu_s, double sigma,
                     double theta) {
  const double a = model.w().dot(mu_c);
  const double b = model.w().dot(mu_s);
  return (a + theta * b) / (sigma * model.norm());
}

void check_metric_args(const LinearModel& model, const Vec& mu_c, const Vec& mu_s, double sigma) {
  if (mu_c.size() != model.dim() || mu_s.size() != model.dim())
    throw InvalidArgument("model and mean vectors differ in dimension");
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
}

}  // namespace

double error_at_theta(const LinearModel& model, const Vec& mu_c, const Vec& mu_s, double sigma,
                      double theta) {
  check_metric_args(model, mu_c, mu_s, sigma);
  return gaussian_tail(tail_argument(model, mu_c, mu_s, sigma, theta));
}

RobustError robust_error(const LinearModel& model, const Vec& mu_c, const Vec& mu_s,
                         double sigma) {
  check_metric_args(model, mu_c, mu_s, sigma);
  // The argument is affine in theta, so the worst case sits at an endpoint.
  const double b = model.w().dot(mu_s);
  const double worst = b > 0.0 ? -1.0 : 1.0;
  return {gaussian_tail(tail_argument(model, mu_c, mu_s, sigma, worst)), worst};
}

double normalized_margin(const LinearModel& model, const LabeledDataset& data, double sigma) {
  if (data.empty()) throw InvalidArgument("normalized margin of an empty dataset");
  if (data.dim() != model.dim()) throw InvalidArgument("model and data differ in dimension");
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
  const Vec scores = data.x() * model.w();
  const double m = (scores.array() * data.y().array()).minCoeff();
  return m / (model.norm() * std::sqrt(sigma * sigma * data.dim()));
}

double spurious_core_ratio(const LinearModel& model, const Vec& mu_c, const Vec& mu_s) {
  const double a = model.w().dot(mu_c);
  if (std::abs(a) <= 1e-15 * model.norm() * mu_c.norm())
    throw NumericalError("model has no component along mu_c; ratio undefined");
  return model.w().dot(mu_s) / a;
}

namespace {

std::optional<double> class_mean_score(const Vec& w, const LabeledDataset& data, double label) {
  double sum = 0.0;
  int count = 0;
  for (int i = 0; i < data.size(); ++i) {
    if (data.y()[i] == label) {
      sum += data.x().row(i).dot(w);
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

}  // namespace

double positive_mean_score(const Vec& w, const LabeledDataset& data) {
  auto m = class_mean_score(w, data, 1.0);
  if (!m) throw NoPositiveExamples("no positive-label rows to average over");
  return *m;
}

InvarianceGaps invariance_gaps(const LinearModel& model, const LabeledDataset& data_1,
                               const LabeledDataset& data_2,
                               const std::optional<PopulationTruth>& truth) {
  if (data_1.dim() != model.dim() || data_2.dim() != model.dim())
    throw InvalidArgument("model and data differ in dimension");
  InvarianceGaps gaps;
  gaps.eopp = positive_mean_score(model.w(), data_1) - positive_mean_score(model.w(), data_2);
  gaps.positive_mean_gap = gaps.eopp;
  auto n1 = class_mean_score(model.w(), data_1, -1.0);
  auto n2 = class_mean_score(model.w(), data_2, -1.0);
  if (n1 && n2) gaps.negative_mean_gap = *n1 - *n2;
  if (truth) {
    gaps.population = std::abs(model.w().dot(truth->mu_s)) *
                      std::abs(truth->theta_1 - truth->theta_2) / model.norm();
  }
  return gaps;
}

double cosine_similarity(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine of vectors of different length");
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw InvalidArgument("cosine with a zero vector");
  return a.dot(b) / (na * nb);
}

}  // namespace invlab
