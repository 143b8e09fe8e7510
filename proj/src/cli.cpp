#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "invlab/experiments.hpp"

namespace invlab {

namespace {

RecordFormat format_for(const std::string& fmt_name, const std::string& path) {
  if (fmt_name == "csv") return RecordFormat::csv;
  if (fmt_name == "json") return RecordFormat::json;
  if (!fmt_name.empty()) throw ConfigError(fmt::format("unknown format '{}'", fmt_name));
  const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  return json ? RecordFormat::json : RecordFormat::csv;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"invlab: invariance and interpolation experiments for linear classifiers"};
  app.require_subcommand(1);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a configured sweep and write records");
  std::string config_path, format_name;
  // Flag name -> config key; values go through the same parser as the file.
  const std::vector<std::pair<std::string, std::string>> flag_keys{
      {"d-grid", "d_grid"}, {"seeds", "seeds"},   {"seed-offset", "seed_offset"},
      {"n1", "n1"},         {"n2", "n2"},         {"theta1", "theta1"},
      {"theta2", "theta2"}, {"rc", "rc"},         {"rs", "rs"},
      {"kappa", "kappa"},   {"sigma", "sigma"},   {"methods", "methods"},
      {"out", "out"},       {"timing", "timing"}, {"stage2", "two_phase_stage2"}};
  std::map<std::string, std::string> flag_values;
  sweep->add_option("config,--config", config_path, "config file (key = value lines)");
  for (const auto& [flag, key] : flag_keys)
    sweep->add_option("--" + flag, flag_values[flag], "overrides '" + key + "'");
  sweep->add_option("--format", format_name, "csv or json (default: from the output extension)");
  bool serial = false;
  sweep->add_flag("--serial", serial, "run cells one at a time");

  // verify
  auto* verify = app.add_subcommand("verify", "duality bound-chain study on random Gram instances");
  ChainOptions chain;
  std::string verify_out;
  verify->add_option("--instances", chain.instances, "instances passing the spectral events");
  verify->add_option("--max-n", chain.max_n, "largest total sample size");
  verify->add_option("--seed-offset", chain.seed_offset, "first seed");
  verify->add_option("-t", chain.t, "event parameter t");
  verify->add_option("--out", verify_out, "write the JSON report here instead of stdout");

  // preset
  auto* preset = app.add_subcommand("preset", "print the parameter preset");
  int n1 = 100, n2 = 100;
  double gamma = 0.0, epsilon = 0.1;
  PresetOptions popt;
  std::string constants_path = default_constants_path();
  bool no_floor = false;
  preset->add_option("--n1", n1, "samples in environment 1");
  preset->add_option("--n2", n2, "samples in environment 2");
  preset->add_option("--gamma", gamma, "target margin (default 1/(4 sqrt(N)))");
  preset->add_option("--epsilon", epsilon, "target robust error");
  preset->add_option("--delta", popt.delta, "failure probability");
  preset->add_option("--constants", constants_path, "constants file");
  preset->add_flag("--no-sample-floor", no_floor, "allow environments with 65 or fewer samples");

  // calibrate
  auto* calib = app.add_subcommand("calibrate", "search preset constants and kappa, write constants file");
  CalibrationOptions copt;
  std::string calib_out = default_constants_path(), calib_config;
  calib->add_option("--out", calib_out, "constants file to write");
  calib->add_option("--seeds", copt.seeds, "seeds per preset rate");
  calib->add_option("--seed-offset", copt.seed_offset, "first seed");
  calib->add_option("--config", calib_config, "sweep config used for the kappa search");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*sweep) {
      ExperimentConfig config = default_experiment_config();
      if (!config_path.empty()) apply_config_file(config, config_path);
      for (const auto& [flag, key] : flag_keys)
        if (sweep->count("--" + flag)) set_config_value(config, key, flag_values[flag]);
      config.validate();
      const RecordFormat format = format_for(format_name, config.output_path);
      const auto records = serial ? run_sweep_serial(config) : run_sweep(config);
      emit(records, format, config.output_path);
      int failed = 0;
      for (const auto& r : records) failed += !r.error.empty();
      out << fmt::format("wrote {} records to {}\n", records.size(), config.output_path);
      if (failed) {
        err << fmt::format("{} runs failed; see the error rows\n", failed);
        return 2;
      }
      return 0;
    }
    if (*verify) {
      const auto rows = duality_chain_study(chain);
      const std::string json = chain_rows_json(rows);
      if (verify_out.empty()) {
        out << json << '\n';
      } else {
        std::ofstream f(verify_out);
        if (!f) throw Error(fmt::format("cannot write '{}'", verify_out));
        f << json << '\n';
      }
      int passed = 0, bad = 0;
      for (const auto& r : rows) {
        passed += r.events_ok;
        bad += r.events_ok && (!r.weak_duality_ok || !r.bound_ok || !r.error.empty());
      }
      err << fmt::format("{} of {} instances passed the events; {} violated the chain\n", passed,
                         rows.size(), bad);
      return bad || passed < chain.instances ? 2 : 0;
    }
    if (*preset) {
      const PresetConstants constants = load_calibration(constants_path).preset;
      if (!preset->count("--gamma")) gamma = 1.0 / (4.0 * std::sqrt(static_cast<double>(n1 + n2)));
      popt.enforce_sample_floor = !no_floor;
      out << theorem_preset(n1, n2, gamma, epsilon, constants, popt).to_json() << '\n';
      return 0;
    }
    if (*calib) {
      copt.sweep = default_experiment_config();
      copt.sweep.n_1 = 160;
      copt.sweep.n_2 = 20;
      copt.sweep.seeds = 15;
      copt.sweep.d_grid = {20, 50, 100, 200, 500, 1000, 2000, 5000, 10000, 30000};
      copt.sweep.vrex_weight = 100.0;
      if (!calib_config.empty()) apply_config_file(copt.sweep, calib_config);
      copt.sweep.validate();
      const CalibrationFile result = calibrate(copt, err);
      save_calibration(result, calib_out);
      out << fmt::format("wrote {}\n", calib_out);
      return 0;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace invlab
