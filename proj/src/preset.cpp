#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "invlab/verifier.hpp"

namespace invlab {

void PresetConstants::validate() const {
  for (double v : {c_r, C_r, C_d, C_d_prime, C_s, C_c, c_r_prime})
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("preset constants must be positive");
}

std::string PresetParams::to_json() const {
  nlohmann::json j;
  j["n_1"] = n_1;
  j["n_2"] = n_2;
  j["gamma"] = gamma;
  j["epsilon"] = epsilon;
  j["delta"] = delta;
  j["r_c"] = r_c;
  j["r_s"] = r_s;
  j["d"] = d;
  j["sigma"] = sigma;
  j["invariant_margin_floor"] = invariant_margin_floor;
  j["constants"] = {{"c_r", constants.c_r},         {"C_r", constants.C_r},
                    {"C_d", constants.C_d},         {"C_d_prime", constants.C_d_prime},
                    {"C_s", constants.C_s},         {"C_c", constants.C_c},
                    {"c_r_prime", constants.c_r_prime}};
  return j.dump(2);
}

PresetParams theorem_preset(int n_1, int n_2, double gamma, double epsilon,
                            const PresetConstants& constants, const PresetOptions& options) {
  constants.validate();
  if (n_1 < 1 || n_2 < 1) throw InvalidArgument("sample sizes must be positive");
  if (options.enforce_sample_floor && (n_1 <= 65 || n_2 <= 65))
    throw InvalidArgument(
        fmt::format("each environment needs more than 65 samples, got {} and {}", n_1, n_2));
  const double n = n_1 + n_2;
  if (!(gamma > 0.0) || gamma > 1.0 / (4.0 * std::sqrt(n)))
    throw InvalidArgument(fmt::format("gamma must lie in (0, 1/(4 sqrt(N))] = (0, {:.6g}], got {}",
                                      1.0 / (4.0 * std::sqrt(n)), gamma));
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw InvalidArgument("epsilon must lie in (0, 1/2)");
  if (!(options.delta > 0.0 && options.delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");

  PresetParams p;
  p.n_1 = n_1;
  p.n_2 = n_2;
  p.gamma = gamma;
  p.epsilon = epsilon;
  p.delta = options.delta;
  p.constants = constants;

  const double rs2 = std::min(constants.c_r, constants.c_r_prime) / n;
  const double rc2 = rs2 / (constants.C_r * (1.0 + std::sqrt(static_cast<double>(n_2)) / (n_1 * gamma)));
  const double n_min = std::min(n_1, n_2);
  const double qe = gaussian_tail_inverse(epsilon);
  const double scale = std::max({constants.C_d, constants.C_d_prime, constants.C_s * constants.C_s,
                                 constants.C_c * constants.C_c});
  const double base = std::max({n * n, n / (gamma * gamma * n_1 * n_1 * rc2),
                                qe * qe / (n_min * rc2 * rc2), 1.0 / (n_min * n_min * rc2 * rc2)});
  const double d = std::ceil(scale * base * std::log(1.0 / options.delta));
  if (d > 2e9) throw InvalidArgument(fmt::format("preset dimension {:.3g} is too large", d));
  p.d = static_cast<long>(d);
  p.r_s = std::sqrt(rs2);
  p.r_c = std::sqrt(rc2);
  p.sigma = 1.0 / std::sqrt(static_cast<double>(p.d));
  p.invariant_margin_floor =
      p.r_c - gaussian_tail_inverse(options.delta / n) / std::sqrt(static_cast<double>(p.d));
  return p;
}

}  // namespace invlab
