#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <tuple>

#include "invlab/experiments.hpp"

namespace invlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct CellData {
  ProblemInstance instance;
  LabeledDataset data;
};

CellData sample_cell(const ExperimentConfig& c, const SweepCell& cell) {
  const double sigma = resolve_sigma(c.sigma_rule, cell.d, c.n_1 + c.n_2, c.r_c);
  Rng mean_rng = Rng::stream(cell.seed, cell.d, "instance", 0);
  ProblemInstance inst = make_instance(cell.d, c.r_c, c.r_s, c.theta_1, c.theta_2, c.n_1, c.n_2,
                                       sigma, cell.seed, mean_rng);
  Rng data_rng = Rng::stream(cell.seed, cell.d, "data", 0);
  LabeledDataset data = sample_dataset(inst, data_rng);
  return {std::move(inst), std::move(data)};
}

// x_i - theta_e mu_s: the spurious mean removed using the true parameters.
LabeledDataset remove_spurious(const LabeledDataset& data, const ProblemInstance& inst) {
  RowMat x = data.x();
  for (int i = 0; i < data.size(); ++i) {
    const double theta = data.env()[i] == 1 ? inst.theta_1 : inst.theta_2;
    x.row(i) -= theta * data.y()[i] * inst.mu_s.transpose();
  }
  return LabeledDataset(std::move(x), data.y(), data.env());
}

TrainConfig penalized(const ExperimentConfig& c, PenaltyKind kind, double weight) {
  TrainConfig t = c.train;
  t.penalty = kind;
  t.penalty_weight = weight;
  return t;
}

// Fits one method. Returns the model and the data it was fitted on (the
// oracle sees the spurious-free features).
std::pair<LinearModel, LabeledDataset> fit(const ExperimentConfig& c, const std::string& method,
                                           const CellData& cd, const SweepCell& cell) {
  const LabeledDataset& data = cd.data;
  if (method == "erm") return {gd_train(data, penalized(c, PenaltyKind::none, 0.0)).model, data};
  if (method == "irmv1")
    return {gd_train(data, penalized(c, PenaltyKind::irmv1, c.irmv1_weight)).model, data};
  if (method == "vrex")
    return {gd_train(data, penalized(c, PenaltyKind::vrex, c.vrex_weight)).model, data};
  if (method == "groupdro")
    return {gd_train(data, penalized(c, PenaltyKind::groupdro, c.groupdro_weight)).model, data};
  if (method == "moment_match")
    return {gd_train(data, penalized(c, PenaltyKind::moment_match, c.moment_match_weight)).model,
            data};
  if (method == "mean") return {mean_estimator(data), data};
  if (method == "max_margin") return {max_margin(data, c.max_margin_tol).model, data};
  if (method == "two_phase") {
    Rng rng = Rng::stream(cell.seed, cell.d, "two_phase", 0);
    TwoPhaseOptions opt;
    opt.stage2 = c.two_phase_stage2;
    return {two_phase_learn(data.environment(1), data.environment(2), rng, opt).model, data};
  }
  if (method == "oracle_no_spurious") {
    LabeledDataset clean = remove_spurious(data, cd.instance);
    LinearModel m = gd_train(clean, penalized(c, PenaltyKind::none, 0.0)).model;
    return {std::move(m), std::move(clean)};
  }
  throw InvalidArgument("unknown method '" + method + "'");
}

RunRecord evaluate(const std::string& method, const SweepCell& cell, const LinearModel& model,
                   const LabeledDataset& fitted, const ProblemInstance& inst) {
  RunRecord r;
  r.method = method;
  r.d = cell.d;
  r.seed = cell.seed;
  const Vec scores = fitted.y().cwiseProduct(fitted.x() * model.w());
  r.train_accuracy = static_cast<double>((scores.array() > 0.0).count()) / fitted.size();
  r.robust_accuracy = 1.0 - robust_error(model, inst.mu_c, inst.mu_s, inst.sigma).error;
  r.normalized_margin = normalized_margin(model, fitted, inst.sigma);
  try {
    r.spurious_core_ratio = spurious_core_ratio(model, inst.mu_c, inst.mu_s);
  } catch (const NumericalError&) {
    r.spurious_core_ratio = kNaN;
  }
  try {
    r.eopp_gap = invariance_gaps(model, fitted.environment(1), fitted.environment(2)).eopp;
  } catch (const Error&) {
    r.eopp_gap = kNaN;
  }
  r.interpolating = r.train_accuracy == 1.0 && r.normalized_margin > 0.0;
  return r;
}

RunRecord error_record(const std::string& method, const SweepCell& cell, const std::string& why) {
  RunRecord r;
  r.method = method;
  r.d = cell.d;
  r.seed = cell.seed;
  r.train_accuracy = r.robust_accuracy = r.normalized_margin = kNaN;
  r.spurious_core_ratio = r.eopp_gap = r.wall_time_ms = kNaN;
  r.error = why.empty() ? "unknown failure" : why;
  return r;
}

std::vector<SweepCell> cells_of(const ExperimentConfig& c) {
  std::vector<SweepCell> cells;
  for (int d : c.d_grid)
    for (int s = 0; s < c.seeds; ++s) cells.push_back({d, c.seed_offset + s});
  return cells;
}

}  // namespace

std::vector<RunRecord> run_cell(const ExperimentConfig& config, const SweepCell& cell) {
  std::vector<RunRecord> out;
  CellData cd;
  try {
    cd = sample_cell(config, cell);
  } catch (const std::exception& e) {
    for (const auto& m : config.methods) out.push_back(error_record(m, cell, e.what()));
    return out;
  }
  for (const auto& method : config.methods) {
    try {
      const auto start = std::chrono::steady_clock::now();
      auto [model, fitted] = fit(config, method, cd, cell);
      RunRecord r = evaluate(method, cell, model, fitted, cd.instance);
      if (config.timing)
        r.wall_time_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.push_back(error_record(method, cell, e.what()));
    }
  }
  return out;
}

void sort_records(std::vector<RunRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.method, a.d, a.seed) < std::tie(b.method, b.d, b.seed);
  });
}

std::vector<RunRecord> run_sweep(const ExperimentConfig& config) {
  config.validate();
  const std::vector<SweepCell> cells = cells_of(config);
  std::vector<std::vector<RunRecord>> per_cell(cells.size());
#pragma omp parallel for schedule(dynamic)
  for (size_t k = 0; k < cells.size(); ++k) per_cell[k] = run_cell(config, cells[k]);
  std::vector<RunRecord> all;
  for (auto& v : per_cell) all.insert(all.end(), v.begin(), v.end());
  sort_records(all);
  return all;
}

std::vector<RunRecord> run_sweep_serial(const ExperimentConfig& config) {
  config.validate();
  std::vector<RunRecord> all;
  for (const SweepCell& cell : cells_of(config)) {
    auto v = run_cell(config, cell);
    all.insert(all.end(), v.begin(), v.end());
  }
  sort_records(all);
  return all;
}

}  // namespace invlab
