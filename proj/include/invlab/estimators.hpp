#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "invlab/core_model.hpp"

namespace invlab {

LinearModel mean_estimator(const LabeledDataset& data);
LinearModel per_env_mean(const LabeledDataset& data, int env);

enum class PenaltyKind { none, irmv1, vrex, groupdro, moment_match };

std::string_view to_string(PenaltyKind kind);
PenaltyKind parse_penalty(std::string_view name);

struct TrainConfig {
  double learning_rate = 0.1;
  int max_iters = 10000;
  PenaltyKind penalty = PenaltyKind::none;
  double penalty_weight = 0.0;
  double l2_weight = 0.0;
  double tolerance = 1e-8;
  // When set, the penalty weight is zero before this iteration.
  std::optional<int> anneal_iter;
  // Trace every k-th iteration; 0 records only the first and last.
  int log_every = 0;

  void validate() const;
};

struct TraceRow {
  int iter = 0;
  double loss = 0.0;
  double penalty = 0.0;
  double train_err = 0.0;
  double margin = 0.0;
};

struct TrainResult {
  LinearModel model;
  std::vector<TraceRow> trace;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
  double final_learning_rate = 0.0;
};

// Mean logistic loss on y<w, x> plus weight * penalty plus l2 * |w|^2.
// `penalty_active` = false drops the penalty term (annealing phase).
double objective_value(const LabeledDataset& data, const Vec& w, const TrainConfig& config,
                       bool penalty_active = true);
Vec objective_gradient(const LabeledDataset& data, const Vec& w, const TrainConfig& config,
                       bool penalty_active = true);
double penalty_value(const LabeledDataset& data, const Vec& w, PenaltyKind kind);

// Full-batch gradient descent from w = 0 with step halving whenever the
// objective would increase. When d > N the iterate is kept as Z^T a (plus
// a multiple of the start point), which gives the same iterates at O(N^2)
// per step.
TrainResult gd_train(const LabeledDataset& data, const TrainConfig& config);
TrainResult gd_train_from(const LabeledDataset& data, const TrainConfig& config, const Vec& init);

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

class NotSeparable : public Error {
 public:
  NotSeparable(const std::string& what, Vec weights, double residual)
      : Error(what), weights_(std::move(weights)), residual_(residual) {}
  // Convex weights lambda (sum 1) with |sum_i lambda_i z_i| = residual: the
  // origin is (numerically) in the hull of the signed samples.
  const Vec& weights() const { return weights_; }
  double residual() const { return residual_; }

 private:
  Vec weights_;
  double residual_;
};

struct MaxMarginResult {
  LinearModel model;
  Vec alpha;
  // (primal - dual) / primal at exit.
  double duality_gap = 0.0;
  int iterations = 0;
};

// Hard-margin SVM without bias: min |w|^2 s.t. y_i <w, x_i> >= 1.
MaxMarginResult max_margin(const LabeledDataset& data, double tol = 1e-8,
                           int max_sweeps = 200000);

enum class Stage2 { eopp, vrex };

struct TwoPhaseOptions {
  // Fraction of each environment used for the per-environment means.
  double split_fraction = 0.5;
  Stage2 stage2 = Stage2::eopp;
  // Used only by the VREx stage 2 on the two projected features.
  TrainConfig vrex{0.1, 5000, PenaltyKind::vrex, 100.0, 0.0, 1e-10, std::nullopt, 0};
};

struct TwoPhaseDiagnostics {
  Vec w_1;
  Vec w_2;
  double a_1 = 0.0;
  double a_2 = 0.0;
  Eigen::Vector2d v_pos = Eigen::Vector2d::Zero();
  Eigen::Vector2d v_neg = Eigen::Vector2d::Zero();
  bool chose_pos = true;
  double score_pos = 0.0;
  double score_neg = 0.0;
  std::uint64_t split_seed = 0;
  Stage2 stage2 = Stage2::eopp;
  // Coefficients of the returned model, w = v_1 w_1 + v_2 w_2.
  Eigen::Vector2d v = Eigen::Vector2d::Zero();

  std::string to_json() const;
};

struct TwoPhaseResult {
  LinearModel model;
  TwoPhaseDiagnostics diagnostics;
};

TwoPhaseResult two_phase_learn(const LabeledDataset& s_1, const LabeledDataset& s_2, Rng& rng,
                               const TwoPhaseOptions& options = {});

struct AlignmentCase {
  ProblemInstance instance;
  std::uint64_t seed = 0;
};

struct AlignmentConfig {
  double irm_weight = 1.0;
  // l2 weights applied in turn, each stage warm-started from the last.
  std::vector<double> l2_schedule{1e-2, 1e-3, 1e-4, 1e-5, 0.0};
  int iters_per_stage = 20000;
  int erm_iters = 100000;
  double tolerance = 1e-10;
  double max_margin_tol = 1e-8;
};

struct AlignmentRow {
  int d = 0;
  std::uint64_t seed = 0;
  double cosine_irm = 0.0;
  double cosine_erm = 0.0;
  std::string error;
};

std::vector<AlignmentRow> irm_margin_alignment(const std::vector<AlignmentCase>& grid,
                                               const AlignmentConfig& config);

}  // namespace invlab
