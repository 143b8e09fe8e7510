#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "invlab/estimators.hpp"
#include "invlab/verifier.hpp"

namespace invlab {

struct SigmaRule {
  enum class Kind { fixed, scaling } kind = Kind::scaling;
  // sigma for `fixed`, kappa for `scaling`.
  double value = 1.0;
};

// scaling(kappa): sigma = r_c / (kappa (d / N)^{1/4}); fixed: sigma itself.
double resolve_sigma(const SigmaRule& rule, int d, int n, double r_c);

inline const std::vector<std::string>& all_methods() {
  static const std::vector<std::string> m{"erm",  "irmv1", "vrex",       "groupdro",          "moment_match",
                                          "two_phase", "mean", "max_margin", "oracle_no_spurious"};
  return m;
}

struct ExperimentConfig {
  std::vector<int> d_grid{64};
  int seeds = 1;
  std::uint64_t seed_offset = 0;
  int n_1 = 800;
  int n_2 = 100;
  double theta_1 = 1.0;
  double theta_2 = 0.0;
  double r_c = 1.0;
  double r_s = 2.0;
  SigmaRule sigma_rule;
  std::vector<std::string> methods{"erm"};
  TrainConfig train;
  double irmv1_weight = 10.0;
  double vrex_weight = 10.0;
  double groupdro_weight = 1.0;
  double moment_match_weight = 1.0;
  Stage2 two_phase_stage2 = Stage2::eopp;
  double max_margin_tol = 1e-8;
  std::string output_path = "results.csv";
  // Wall times make output differ between runs, so they are off by default.
  bool timing = false;

  void validate() const;
};

// Built-in defaults with kappa and the penalty weights taken from the
// constants file when it has them.
ExperimentConfig default_experiment_config();

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Flat "key = value" lines; '#' starts a comment. Unknown keys and bad values
// raise ConfigError naming the line and key.
void apply_config_text(ExperimentConfig& config, const std::string& text,
                       const std::string& source = "<config>");
void apply_config_file(ExperimentConfig& config, const std::string& path);
// One assignment, as used by the CLI overrides.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

struct RunRecord {
  std::string method;
  int d = 0;
  std::uint64_t seed = 0;
  double train_accuracy = 0.0;
  double robust_accuracy = 0.0;
  double normalized_margin = 0.0;
  double spurious_core_ratio = 0.0;
  double eopp_gap = 0.0;
  bool interpolating = false;
  double wall_time_ms = 0.0;
  // Nonempty for a failed run; the metric fields are then NaN.
  std::string error;
};

struct SweepCell {
  int d = 0;
  std::uint64_t seed = 0;
};

// Records for one (d, seed) cell, one per configured method.
std::vector<RunRecord> run_cell(const ExperimentConfig& config, const SweepCell& cell);

// All cells; cells run concurrently. Records come back sorted by (method, d, seed).
std::vector<RunRecord> run_sweep(const ExperimentConfig& config);
// Same records computed one cell at a time.
std::vector<RunRecord> run_sweep_serial(const ExperimentConfig& config);

void sort_records(std::vector<RunRecord>& records);

enum class RecordFormat { csv, json };

inline constexpr const char* kCsvHeader =
    "method,d,seed,train_acc,robust_acc,margin,ratio,eopp_gap,interpolating,wall_ms";

void write_records(std::ostream& out, const std::vector<RunRecord>& records, RecordFormat format);
// Refuses an empty list without touching the file system.
void emit(const std::vector<RunRecord>& records, RecordFormat format, const std::string& path);
std::vector<RunRecord> parse_records_csv(const std::string& text);
std::vector<RunRecord> parse_records_json(const std::string& text);

// Median of a metric over the successful records matching (method, d).
std::optional<double> median_of(const std::vector<RunRecord>& records, const std::string& method,
                                int d, double RunRecord::*field);

// Checks of the simulation sweep: invariance penalties help at the smallest
// d, the interpolating methods collapse together at the largest d, the
// two-phase model stays non-interpolating and robust, and the spurious-free
// oracle interpolates while staying robust.
struct SimulationVerdict {
  int d_min = 0, d_max = 0;
  double mean_interp_rate = 0.0;  // at d_max
  double erm_small = 0.0, vrex_small = 0.0;
  bool small_d_ok = false;
  double erm_large = 0.0, irmv1_large = 0.0, vrex_large = 0.0;
  bool all_interpolate = false;
  bool collapse_ok = false;
  double two_phase_large = 0.0;
  bool two_phase_interpolates = true;
  bool two_phase_ok = false;
  double oracle_large = 0.0;
  bool oracle_interpolates = false;
  bool oracle_ok = false;

  std::string describe() const;
};

SimulationVerdict judge_simulation(const std::vector<RunRecord>& records,
                                   const ExperimentConfig& config);

// Fraction of successful records for (method, d) with the interpolation flag set.
double interpolation_rate(const std::vector<RunRecord>& records, const std::string& method, int d);

struct CalibrationFile {
  PresetConstants preset;
  double kappa = 1.0;
  double irmv1_weight = 10.0;
  double vrex_weight = 10.0;
  double groupdro_weight = 1.0;
  double moment_match_weight = 1.0;
};

std::string default_constants_path();
CalibrationFile load_calibration(const std::string& path);
void save_calibration(const CalibrationFile& file, const std::string& path);

struct CalibrationOptions {
  int seeds = 100;
  std::uint64_t seed_offset = 100000;
  double epsilon = 0.1;
  std::vector<int> env_sizes{20, 40};
  std::vector<double> c_r_grid{0.25, 0.5, 1.0};
  std::vector<double> C_r_grid{0.5, 1.0, 2.0};
  std::vector<double> C_d_grid{0.25, 0.5, 1.0, 2.0};
  std::vector<double> kappa_grid{0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0};
  ExperimentConfig sweep;  // grid and sizes used for the kappa search
  bool verbose = true;
};

// Grid search for the preset constants (smallest preset dimension at which
// the three reproduction rates hold) and for kappa.
CalibrationFile calibrate(const CalibrationOptions& options, std::ostream& log);

struct PresetRates {
  int seeds = 0;
  int mean_margin_ok = 0;
  int max_margin_ok = 0;
  int two_phase_ok = 0;
  int failures = 0;
};

// Runs the three preset checks on `seeds` draws of the preset with
// theta = (1, 0).
PresetRates preset_rates(const PresetParams& preset, int seeds, std::uint64_t seed_offset,
                         double epsilon);

struct ChainRow {
  int n = 0;
  int d = 0;
  std::uint64_t seed = 0;
  bool events_ok = false;
  double primal = 0.0;
  double dual_canonical = 0.0;
  double bound = 0.0;
  bool weak_duality_ok = false;
  bool bound_ok = false;
  std::string error;
};

struct ChainOptions {
  int instances = 100;
  int max_n = 60;
  std::uint64_t seed_offset = 0;
  double t = 3.0;
};

// Random Gram instances in the valid regime; keeps sampling until
// `instances` rows pass the spectral events (bounded number of attempts).
std::vector<ChainRow> duality_chain_study(const ChainOptions& options);
std::string chain_rows_json(const std::vector<ChainRow>& rows);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace invlab
