#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "invlab/experiments.hpp"

namespace invlab {

double resolve_sigma(const SigmaRule& rule, int d, int n, double r_c) {
  if (d < 1 || n < 1) throw InvalidArgument("d and N must be at least 1");
  if (!(rule.value > 0.0))
    throw InvalidArgument(rule.kind == SigmaRule::Kind::scaling ? "kappa must be positive"
                                                                : "sigma must be positive");
  if (rule.kind == SigmaRule::Kind::fixed) return rule.value;
  return r_c / (rule.value * std::pow(static_cast<double>(d) / n, 0.25));
}

void ExperimentConfig::validate() const {
  if (d_grid.empty()) throw ConfigError("d_grid must not be empty");
  for (size_t i = 0; i < d_grid.size(); ++i) {
    if (d_grid[i] < 2) throw ConfigError("every d in d_grid must be at least 2");
    if (i > 0 && d_grid[i] <= d_grid[i - 1]) throw ConfigError("d_grid must be strictly increasing");
  }
  if (seeds < 1) throw ConfigError("seeds must be at least 1");
  if (n_1 < 1 || n_2 < 1) throw ConfigError("n1 and n2 must be positive");
  if (!(theta_1 >= -1 && theta_1 <= 1) || !(theta_2 >= -1 && theta_2 <= 1))
    throw ConfigError("theta values must lie in [-1, 1]");
  if (!(r_c > 0) || !(r_s > 0)) throw ConfigError("rc and rs must be positive");
  if (!(sigma_rule.value > 0)) throw ConfigError("kappa / sigma must be positive");
  if (methods.empty()) throw ConfigError("methods must not be empty");
  for (const auto& m : methods)
    if (std::find(all_methods().begin(), all_methods().end(), m) == all_methods().end())
      throw ConfigError(fmt::format("unknown method '{}'", m));
  try {
    train.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  for (double w : {irmv1_weight, vrex_weight, groupdro_weight, moment_match_weight})
    if (!(w >= 0)) throw ConfigError("penalty weights must be nonnegative");
}

std::string default_constants_path() { return std::string(INVLAB_DATA_DIR) + "/constants.json"; }

CalibrationFile load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument(fmt::format("cannot read constants file '{}'", path));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(fmt::format("constants file '{}': {}", path, e.what()));
  }
  CalibrationFile f;
  const auto& p = j.at("preset");
  f.preset.c_r = p.at("c_r");
  f.preset.C_r = p.at("C_r");
  f.preset.C_d = p.at("C_d");
  f.preset.C_d_prime = p.at("C_d_prime");
  f.preset.C_s = p.at("C_s");
  f.preset.C_c = p.at("C_c");
  f.preset.c_r_prime = p.at("c_r_prime");
  const auto& s = j.at("sweep");
  f.kappa = s.at("kappa");
  f.irmv1_weight = s.value("irmv1_weight", f.irmv1_weight);
  f.vrex_weight = s.value("vrex_weight", f.vrex_weight);
  f.groupdro_weight = s.value("groupdro_weight", f.groupdro_weight);
  f.moment_match_weight = s.value("moment_match_weight", f.moment_match_weight);
  f.preset.validate();
  return f;
}

void save_calibration(const CalibrationFile& f, const std::string& path) {
  nlohmann::ordered_json j;
  j["preset"] = {{"c_r", f.preset.c_r},       {"C_r", f.preset.C_r},
                 {"C_d", f.preset.C_d},       {"C_d_prime", f.preset.C_d_prime},
                 {"C_s", f.preset.C_s},       {"C_c", f.preset.C_c},
                 {"c_r_prime", f.preset.c_r_prime}};
  j["sweep"] = {{"kappa", f.kappa},
                {"irmv1_weight", f.irmv1_weight},
                {"vrex_weight", f.vrex_weight},
                {"groupdro_weight", f.groupdro_weight},
                {"moment_match_weight", f.moment_match_weight}};
  std::ofstream out(path);
  if (!out) throw InvalidArgument(fmt::format("cannot write '{}'", path));
  out << j.dump(2) << '\n';
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig c;
  std::ifstream probe(default_constants_path());
  if (probe) {
    const CalibrationFile f = load_calibration(default_constants_path());
    c.sigma_rule = {SigmaRule::Kind::scaling, f.kappa};
    c.irmv1_weight = f.irmv1_weight;
    c.vrex_weight = f.vrex_weight;
    c.groupdro_weight = f.groupdro_weight;
    c.moment_match_weight = f.moment_match_weight;
  }
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, v));
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError(fmt::format("{}: '{}' is not on/off", key, v));
}

}  // namespace

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "d_grid") {
    c.d_grid.clear();
    for (const auto& s : split_list(v)) c.d_grid.push_back(static_cast<int>(to_int(key, s)));
  } else if (key == "seeds") {
    c.seeds = static_cast<int>(to_int(key, v));
  } else if (key == "seed_offset") {
    c.seed_offset = static_cast<std::uint64_t>(to_int(key, v));
  } else if (key == "n1") {
    c.n_1 = static_cast<int>(to_int(key, v));
  } else if (key == "n2") {
    c.n_2 = static_cast<int>(to_int(key, v));
  } else if (key == "theta1") {
    c.theta_1 = to_double(key, v);
  } else if (key == "theta2") {
    c.theta_2 = to_double(key, v);
  } else if (key == "rc") {
    c.r_c = to_double(key, v);
  } else if (key == "rs") {
    c.r_s = to_double(key, v);
  } else if (key == "kappa") {
    c.sigma_rule = {SigmaRule::Kind::scaling, to_double(key, v)};
  } else if (key == "sigma") {
    c.sigma_rule = {SigmaRule::Kind::fixed, to_double(key, v)};
  } else if (key == "methods") {
    c.methods = split_list(v);
  } else if (key == "lr") {
    c.train.learning_rate = to_double(key, v);
  } else if (key == "max_iters") {
    c.train.max_iters = static_cast<int>(to_int(key, v));
  } else if (key == "tolerance") {
    c.train.tolerance = to_double(key, v);
  } else if (key == "l2") {
    c.train.l2_weight = to_double(key, v);
  } else if (key == "anneal_iter") {
    c.train.anneal_iter = static_cast<int>(to_int(key, v));
  } else if (key == "irmv1_weight") {
    c.irmv1_weight = to_double(key, v);
  } else if (key == "vrex_weight") {
    c.vrex_weight = to_double(key, v);
  } else if (key == "groupdro_weight") {
    c.groupdro_weight = to_double(key, v);
  } else if (key == "moment_match_weight") {
    c.moment_match_weight = to_double(key, v);
  } else if (key == "two_phase_stage2") {
    if (v == "eopp") {
      c.two_phase_stage2 = Stage2::eopp;
    } else if (v == "vrex") {
      c.two_phase_stage2 = Stage2::vrex;
    } else {
      throw ConfigError(fmt::format("{}: '{}' is not eopp or vrex", key, v));
    }
  } else if (key == "max_margin_tol") {
    c.max_margin_tol = to_double(key, v);
  } else if (key == "out") {
    c.output_path = v;
  } else if (key == "timing") {
    c.timing = to_bool(key, v);
  } else {
    throw ConfigError(fmt::format("unknown key '{}'", key));
  }
}

void apply_config_text(ExperimentConfig& config, const std::string& text, const std::string& source) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(fmt::format("{}:{}: expected 'key = value', got '{}'", source, lineno, line));
    const std::string key = trim(line.substr(0, eq));
    try {
      set_config_value(config, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", source, lineno, e.what()));
    }
  }
}

void apply_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(config, buf.str(), path);
}

}  // namespace invlab
