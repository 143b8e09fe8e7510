#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "invlab/rng.hpp"
#include "invlab/types.hpp"

namespace invlab {

// One mixture P_theta(x | y) = N(y mu_c + y theta mu_s, sigma^2 I).
struct EnvironmentSpec {
  Vec mu_c;
  Vec mu_s;
  double sigma = 1.0;
  double theta = 0.0;

  void validate() const;
};

// Two environments sharing mu_c, mu_s and sigma, differing only in theta.
struct ProblemInstance {
  Vec mu_c;
  Vec mu_s;
  double theta_1 = 1.0;
  double theta_2 = 0.0;
  int n_1 = 0;
  int n_2 = 0;
  double sigma = 1.0;
  std::uint64_t seed = 0;

  int dim() const { return static_cast<int>(mu_c.size()); }
  int total() const { return n_1 + n_2; }
  double r_c() const { return mu_c.norm(); }
  double r_s() const { return mu_s.norm(); }
  EnvironmentSpec environment(int env) const;
  void validate() const;
};

// The quantities only a simulator knows. Used by metrics that compare
// against the true means.
struct PopulationTruth {
  Vec mu_c;
  Vec mu_s;
  double sigma = 1.0;
  double theta_1 = 1.0;
  double theta_2 = 0.0;

  static PopulationTruth of(const ProblemInstance& inst) {
    return {inst.mu_c, inst.mu_s, inst.sigma, inst.theta_1, inst.theta_2};
  }
};

class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(RowMat x, Vec y, std::vector<int> env);

  int size() const { return static_cast<int>(x_.rows()); }
  int dim() const { return static_cast<int>(x_.cols()); }
  bool empty() const { return x_.rows() == 0; }
  const RowMat& x() const { return x_; }
  const Vec& y() const { return y_; }
  const std::vector<int>& env() const { return env_; }
  int count_env(int e) const;

  // Rows z_i = y_i x_i.
  RowMat signed_rows() const;
  LabeledDataset subset(const std::vector<int>& rows) const;
  LabeledDataset environment(int e) const;
  // Rows of `a` followed by rows of `b`; tags are kept.
  static LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);

 private:
  RowMat x_;
  Vec y_;
  std::vector<int> env_;
};

// A homogeneous linear classifier sign(<w, x>). Construction rejects w = 0.
class LinearModel {
 public:
  explicit LinearModel(Vec w);

  const Vec& w() const { return w_; }
  double norm() const { return norm_; }
  int dim() const { return static_cast<int>(w_.size()); }

 private:
  Vec w_;
  double norm_;
};

struct MeanPair {
  Vec mu_c;
  Vec mu_s;
};

MeanPair sample_orthogonal_means(int d, double r_c, double r_s, Rng& rng);

ProblemInstance make_instance(int d, double r_c, double r_s, double theta_1, double theta_2,
                              int n_1, int n_2, double sigma, std::uint64_t seed, Rng& rng);

LabeledDataset sample_dataset(const ProblemInstance& inst, Rng& rng);

// Q(t) = P(N(0,1) > t).
double gaussian_tail(double t);
// Inverse of Q on (0, 1), solved by bracketed bisection to 1e-12 in t.
double gaussian_tail_inverse(double p);

double error_at_theta(const LinearModel& model, const Vec& mu_c, const Vec& mu_s, double sigma,
                      double theta);

struct RobustError {
  double error = 0.0;
  double worst_theta = 0.0;
};

RobustError robust_error(const LinearModel& model, const Vec& mu_c, const Vec& mu_s, double sigma);

double normalized_margin(const LinearModel& model, const LabeledDataset& data, double sigma);

double spurious_core_ratio(const LinearModel& model, const Vec& mu_c, const Vec& mu_s);

struct InvarianceGaps {
  double eopp = 0.0;
  double positive_mean_gap = 0.0;
  // Absent when either environment has no negative rows.
  std::optional<double> negative_mean_gap;
  // Present only when the true means were supplied.
  std::optional<double> population;
};

InvarianceGaps invariance_gaps(const LinearModel& model, const LabeledDataset& data_1,
                               const LabeledDataset& data_2,
                               const std::optional<PopulationTruth>& truth = std::nullopt);

// Mean of <w, x> over the y = +1 rows.
double positive_mean_score(const Vec& w, const LabeledDataset& data);

double cosine_similarity(const Vec& a, const Vec& b);

}  // namespace invlab
