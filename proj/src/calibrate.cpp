#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "invlab/experiments.hpp"

namespace invlab {

double interpolation_rate(const std::vector<RunRecord>& records, const std::string& method, int d) {
  int n = 0, hit = 0;
  for (const auto& r : records)
    if (r.method == method && r.d == d && r.error.empty()) {
      ++n;
      hit += r.interpolating;
    }
  return n ? static_cast<double>(hit) / n : 0.0;
}

std::string SimulationVerdict::describe() const {
  return fmt::format(
      "d={}: vrex {:.3f} vs erm {:.3f} ({}); d={}: mean interp {:.2f}, erm/irmv1/vrex {:.3f}/{:.3f}/{:.3f} "
      "interp={} ({}); two_phase {:.3f} interp={} ({}); oracle {:.3f} interp={} ({})",
      d_min, vrex_small, erm_small, small_d_ok ? "ok" : "fail", d_max, mean_interp_rate, erm_large,
      irmv1_large, vrex_large, all_interpolate, collapse_ok ? "ok" : "fail", two_phase_large,
      two_phase_interpolates, two_phase_ok ? "ok" : "fail", oracle_large, oracle_interpolates,
      oracle_ok ? "ok" : "fail");
}

SimulationVerdict judge_simulation(const std::vector<RunRecord>& records,
                                   const ExperimentConfig& config) {
  SimulationVerdict v;
  v.d_min = config.d_grid.front();
  v.d_max = config.d_grid.back();
  auto med = [&](const char* m, int d) {
    return median_of(records, m, d, &RunRecord::robust_accuracy).value_or(std::nan(""));
  };
  v.mean_interp_rate = interpolation_rate(records, "mean", v.d_max);
  v.erm_small = med("erm", v.d_min);
  v.vrex_small = med("vrex", v.d_min);
  v.small_d_ok = v.vrex_small >= v.erm_small + 0.05;

  v.erm_large = med("erm", v.d_max);
  v.irmv1_large = med("irmv1", v.d_max);
  v.vrex_large = med("vrex", v.d_max);
  v.all_interpolate = interpolation_rate(records, "erm", v.d_max) == 1.0 &&
                      interpolation_rate(records, "irmv1", v.d_max) == 1.0 &&
                      interpolation_rate(records, "vrex", v.d_max) == 1.0;
  const double hi = std::max({v.erm_large, v.irmv1_large, v.vrex_large});
  const double lo = std::min({v.erm_large, v.irmv1_large, v.vrex_large});
  v.collapse_ok = v.all_interpolate && hi - lo <= 0.05;

  v.two_phase_large = med("two_phase", v.d_max);
  v.two_phase_interpolates = interpolation_rate(records, "two_phase", v.d_max) > 0.0;
  v.two_phase_ok = !v.two_phase_interpolates && v.two_phase_large >= v.erm_large + 0.15;

  v.oracle_large = med("oracle_no_spurious", v.d_max);
  v.oracle_interpolates = interpolation_rate(records, "oracle_no_spurious", v.d_max) == 1.0;
  v.oracle_ok = v.oracle_interpolates && v.oracle_large >= 0.9;
  return v;
}

PresetRates preset_rates(const PresetParams& p, int seeds, std::uint64_t seed_offset,
                         double epsilon) {
  const int n = p.n_1 + p.n_2;
  const double gamma = 1.0 / (4.0 * std::sqrt(static_cast<double>(n)));
  PresetRates rates;
  rates.seeds = seeds;
  const int d = static_cast<int>(p.d);
  for (int k = 0; k < seeds; ++k) {
    const std::uint64_t seed = seed_offset + k;
    try {
      Rng mean_rng = Rng::stream(seed, d, "preset", 0);
      const ProblemInstance inst =
          make_instance(d, p.r_c, p.r_s, 1.0, 0.0, p.n_1, p.n_2, p.sigma, seed, mean_rng);
      Rng data_rng = Rng::stream(seed, d, "preset_data", 0);
      const LabeledDataset data = sample_dataset(inst, data_rng);

      rates.mean_margin_ok += normalized_margin(mean_estimator(data), data, p.sigma) >= gamma;

      const LinearModel mm = max_margin(data).model;
      rates.max_margin_ok += spurious_core_ratio(mm, inst.mu_c, inst.mu_s) >= 1.0 &&
                             robust_error(mm, inst.mu_c, inst.mu_s, p.sigma).error >= 0.5;

      Rng split_rng = Rng::stream(seed, d, "two_phase", 0);
      const LinearModel tp =
          two_phase_learn(data.environment(1), data.environment(2), split_rng).model;
      rates.two_phase_ok += robust_error(tp, inst.mu_c, inst.mu_s, p.sigma).error <= epsilon;
    } catch (const Error&) {
      ++rates.failures;
    }
  }
  return rates;
}

namespace {

PresetConstants constants_of(double c_r, double C_r, double C_d) {
  // C_s and C_c enter the dimension only through their squares next to C_d.
  return {c_r, C_r, C_d, C_d, std::sqrt(C_d), std::sqrt(C_d), c_r};
}

bool rates_pass(const PresetRates& r) {
  return r.mean_margin_ok >= 0.95 * r.seeds && r.max_margin_ok >= 0.90 * r.seeds &&
         r.two_phase_ok >= 0.95 * r.seeds;
}

PresetParams preset_for(int n_env, double epsilon, const PresetConstants& c) {
  const double gamma = 1.0 / (4.0 * std::sqrt(2.0 * n_env));
  return theorem_preset(n_env, n_env, gamma, epsilon, c, {0.01, false});
}

}  // namespace

CalibrationFile calibrate(const CalibrationOptions& o, std::ostream& log) {
  if (o.env_sizes.empty()) throw InvalidArgument("calibration needs at least one sample size");
  const int n_big = *std::max_element(o.env_sizes.begin(), o.env_sizes.end());

  struct Candidate {
    PresetConstants c;
    long d;
  };
  std::vector<Candidate> candidates;
  for (double c_r : o.c_r_grid)
    for (double C_r : o.C_r_grid)
      for (double C_d : o.C_d_grid) {
        const PresetConstants c = constants_of(c_r, C_r, C_d);
        try {
          candidates.push_back({c, preset_for(n_big, o.epsilon, c).d});
        } catch (const InvalidArgument&) {
        }
      }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.d < b.d; });

  CalibrationFile out;
  bool found = false;
  for (const Candidate& cand : candidates) {
    bool ok = true;
    for (int n_env : o.env_sizes) {
      const PresetParams p = preset_for(n_env, o.epsilon, cand.c);
      const PresetRates r = preset_rates(p, o.seeds, o.seed_offset, o.epsilon);
      if (o.verbose)
        log << fmt::format(
            "c_r={} C_r={} C_d={} N_e={} d={}: mean {}/{} max_margin {}/{} two_phase {}/{} errors {}\n",
            cand.c.c_r, cand.c.C_r, cand.c.C_d, n_env, p.d, r.mean_margin_ok, r.seeds,
            r.max_margin_ok, r.seeds, r.two_phase_ok, r.seeds, r.failures);
      if (!rates_pass(r)) {
        ok = false;
        break;
      }
    }
    if (ok) {
      out.preset = cand.c;
      found = true;
      break;
    }
  }
  if (!found) throw Error("no preset constants on the grid reach the required rates");
  log << fmt::format("preset constants: c_r={} C_r={} C_d={}\n", out.preset.c_r, out.preset.C_r,
                     out.preset.C_d);

  ExperimentConfig sweep = o.sweep;
  sweep.methods = {"erm", "irmv1", "vrex", "two_phase", "mean", "oracle_no_spurious"};
  out.irmv1_weight = sweep.irmv1_weight;
  out.vrex_weight = sweep.vrex_weight;
  out.groupdro_weight = sweep.groupdro_weight;
  out.moment_match_weight = sweep.moment_match_weight;
  std::optional<double> first_interp, first_full;
  for (double kappa : o.kappa_grid) {
    sweep.sigma_rule = {SigmaRule::Kind::scaling, kappa};
    const SimulationVerdict v = judge_simulation(run_sweep(sweep), sweep);
    if (o.verbose) log << fmt::format("kappa={}: {}\n", kappa, v.describe());
    if (v.mean_interp_rate >= 0.95) {
      if (!first_interp) first_interp = kappa;
      if (v.small_d_ok && v.collapse_ok && v.two_phase_ok && v.oracle_ok) {
        first_full = kappa;
        break;
      }
    }
  }
  if (!first_interp) throw Error("no kappa on the grid makes the mean estimator interpolate");
  out.kappa = first_full.value_or(*first_interp);
  log << fmt::format("kappa={}{}\n", out.kappa,
                     first_full ? "" : " (simulation checks not all met on the grid)");
  return out;
}

std::vector<ChainRow> duality_chain_study(const ChainOptions& o) {
  if (o.instances < 1 || o.max_n < 4) throw InvalidArgument("chain study needs instances >= 1 and max_n >= 4");
  std::vector<ChainRow> rows;
  int passed = 0;
  const int max_attempts = 10 * o.instances;
  for (int attempt = 0; attempt < max_attempts && passed < o.instances; ++attempt) {
    const std::uint64_t seed = o.seed_offset + attempt;
    Rng rng = Rng::stream(seed, 0, "chain", 0);
    const int half = o.max_n / 2;
    const int n_1 = 2 + static_cast<int>(rng.uniform() * (half - 1));
    const int n_2 = 2 + static_cast<int>(rng.uniform() * (half - 1));
    const int n = n_1 + n_2;
    const double root_n = std::sqrt(static_cast<double>(n));
    const int d = std::max(20 * n, static_cast<int>(std::ceil(16.0 * std::pow(root_n + o.t, 2))));
    // Keeps sqrt(N) (r_c + r_s) <= 1/4, so the conditioning assumption can hold.
    const double budget = 0.25 / root_n;
    const double r_c = budget * (0.05 + 0.45 * rng.uniform());
    const double r_s = budget * (0.05 + 0.45 * rng.uniform());
    const double theta_2 = -rng.uniform();
    const double gamma = 1.0 / (4.0 * root_n);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(d));

    ChainRow row;
    row.n = n;
    row.d = d;
    row.seed = seed;
    try {
      Rng mean_rng = rng.split(1);
      const ProblemInstance inst =
          make_instance(d, r_c, r_s, 1.0, theta_2, n_1, n_2, sigma, seed, mean_rng);
      Rng data_rng = rng.split(2);
      const LabeledDataset data = sample_dataset(inst, data_rng);
      row.events_ok = check_spectral_events(data, PopulationTruth::of(inst), o.t).all_ok();
      if (row.events_ok) {
        ++passed;
        const GramData gd = make_gram_data(data, gamma, theta_2);
        row.primal = min_weighted_beta(gd).optimum;
        row.dual_canonical = dual_value(gd, canonical_multiplier(gd, r_c, r_s));
        row.bound = closed_form_bound(n_1, n_2, gamma, theta_2, r_c, d, o.t);
        row.weak_duality_ok = row.dual_canonical <= row.primal + 1e-6;
        row.bound_ok = row.bound <= row.dual_canonical + 1e-9;
      }
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string chain_rows_json(const std::vector<ChainRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json o;
    o["n"] = r.n;
    o["d"] = r.d;
    o["seed"] = r.seed;
    o["events_ok"] = r.events_ok;
    if (r.events_ok) {
      o["primal"] = r.primal;
      o["dual_canonical"] = r.dual_canonical;
      o["bound"] = r.bound;
      o["weak_duality_ok"] = r.weak_duality_ok;
      o["bound_ok"] = r.bound_ok;
    }
    if (!r.error.empty()) o["error"] = r.error;
    arr.push_back(std::move(o));
  }
  return arr.dump(1);
}

}  // namespace invlab
