#pragma once

#include <string>

#include "invlab/core_model.hpp"

namespace invlab {

// Smallest eigenvalue of Z Z^T accepted before its inverse is used.
inline constexpr double kGramEigenFloor = 0.25;

struct GramData {
  RowMat z;
  Mat gram;
  Vec e1;
  Vec e2;
  double gamma = 0.0;
  double theta_2 = 0.0;

  // u = E_1 + theta_2 E_2, the weights of the objective.
  Vec weights() const { return e1 + theta_2 * e2; }
  int size() const { return static_cast<int>(gram.rows()); }
};

GramData make_gram_data(const LabeledDataset& data, double gamma, double theta_2);

struct BetaSolution {
  double optimum = 0.0;  // u^T beta
  Vec beta;
  Vec lambda;            // dual certificate
  double dual = 0.0;     // dual_value(lambda)
  double gap = 0.0;      // optimum - dual
  bool norm_active = true;
};

// min u^T beta  s.t.  K beta >= gamma 1,  beta^T K beta <= 1,  with K = Z Z^T.
// Solved in N dimensions: for a multiplier nu on the norm constraint the
// margin multipliers solve a box-constrained QP in K, and nu is found by
// bisection so that the norm constraint is tight.
BetaSolution min_weighted_beta(const GramData& gd, double tol = 1e-9,
                               double eigen_floor = kGramEigenFloor);

// L(lambda) = gamma 1^T lambda - sqrt((u - K lambda)^T K^{-1} (u - K lambda)).
double dual_value(const GramData& gd, const Vec& lambda, double eigen_floor = kGramEigenFloor);

// lambda = alpha E_1 with alpha = 1 / (1 + N_1 (r_c^2 + r_s^2)).
Vec canonical_multiplier(const GramData& gd, double r_c, double r_s);

double closed_form_bound(int n_1, int n_2, double gamma, double theta_2, double r_c, double d,
                         double t);

struct SpectralReport {
  double t = 0.0;
  double sv_min = 0.0, sv_max = 0.0, sv_lo = 0.0, sv_hi = 0.0;
  bool sv_ok = false;
  double g_mu_c = 0.0, g_mu_c_bound = 0.0;
  bool g_mu_c_ok = false;
  double g_mu_s = 0.0, g_mu_s_bound = 0.0;
  bool g_mu_s_ok = false;
  double gram_deviation = 0.0, gram_deviation_bound = 0.0;
  bool gram_deviation_ok = false;
  double gram_eig_min = 0.0, gram_eig_max = 0.0;
  bool gram_sandwich_ok = false;
  // (sqrt(N) + t) / sqrt(d) + sqrt(N) (r_c + r_s), required to be <= 1/2.
  double condition = 0.0;
  bool condition_ok = false;
  double failure_budget = 0.0;  // 6 exp(-t^2 / 2)

  // The three noise events, which hold with probability >= 1 - failure_budget.
  bool noise_events_ok() const { return sv_ok && g_mu_c_ok && g_mu_s_ok; }
  bool all_ok() const {
    return noise_events_ok() && condition_ok && gram_deviation_ok && gram_sandwich_ok;
  }
};

// E[Z Z^T] = sigma^2 d I + r_c^2 1 1^T + r_s^2 tau tau^T, tau_i = theta of row i.
Mat expected_gram(const LabeledDataset& data, const PopulationTruth& truth);

// Noise matrix G = Z - 1 mu_c^T - tau mu_s^T.
RowMat noise_matrix(const LabeledDataset& data, const PopulationTruth& truth);

SpectralReport check_spectral_events(const LabeledDataset& data, const PopulationTruth& truth,
                                     double t = 3.0);

struct SpanDecomposition {
  Vec in_span;
  Vec orthogonal;
};

SpanDecomposition span_decomposition(const Vec& w, const LabeledDataset& data);

// |<w_perp, mu>| / (|w| |mu|) with w_perp the part of w orthogonal to span{z_i}.
double orthogonal_complement_stats(const LinearModel& model, const LabeledDataset& data,
                                   const Vec& mu);

struct PresetConstants {
  double c_r = 1.0;
  double C_r = 1.0;
  double C_d = 1.0;
  double C_d_prime = 1.0;
  double C_s = 1.0;
  double C_c = 1.0;
  double c_r_prime = 1.0;

  void validate() const;
};

struct PresetOptions {
  double delta = 0.01;
  // The preset guarantees assume more than 65 samples per environment.
  bool enforce_sample_floor = true;
};

struct PresetParams {
  int n_1 = 0, n_2 = 0;
  double gamma = 0.0, epsilon = 0.0, delta = 0.0;
  double r_c = 0.0, r_s = 0.0, sigma = 0.0;
  long d = 0;
  PresetConstants constants;
  // Normalized-margin floor of w = mu_c holding with probability 1 - delta:
  // r_c - Q^{-1}(delta / N) / sqrt(d).
  double invariant_margin_floor = 0.0;

  std::string to_json() const;
};

PresetParams theorem_preset(int n_1, int n_2, double gamma, double epsilon,
                            const PresetConstants& constants, const PresetOptions& options = {});

}  // namespace invlab
