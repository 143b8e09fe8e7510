#pragma once

#include <cstdint>

#include "invlab/types.hpp"

namespace invlab {

// Dense kernels used by the solvers and the sweep. Each has a serial
// reference used by the tests and the benchmark; the parallel versions use
// OpenMP and must agree with the reference (bit-exactly for the Monte-Carlo
// counts, to rounding for floating-point reductions).

// K = Z Z^T.
Mat gram_serial(const RowMat& z);
Mat gram_parallel(const RowMat& z);

struct MonteCarloError {
  std::int64_t errors = 0;
  std::int64_t samples = 0;
  double rate() const { return samples ? static_cast<double>(errors) / samples : 0.0; }
};

// Fresh samples (x, y) from N(y mu_c + y theta mu_s, sigma^2 I) classified by
// sign(<w, x>). Samples are drawn in fixed-size chunks, chunk k from its own
// stream keyed on (seed, k), so the count does not depend on thread count.
MonteCarloError monte_carlo_error_serial(const Vec& w, const Vec& mu_c, const Vec& mu_s,
                                         double sigma, double theta, std::int64_t samples,
                                         std::uint64_t seed);
MonteCarloError monte_carlo_error_parallel(const Vec& w, const Vec& mu_c, const Vec& mu_s,
                                           double sigma, double theta, std::int64_t samples,
                                           std::uint64_t seed);

inline constexpr std::int64_t kMonteCarloChunk = 1 << 14;

// Number of OpenMP workers the parallel kernels will use.
int worker_count();

}  // namespace invlab
