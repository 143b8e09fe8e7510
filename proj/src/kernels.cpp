#include "invlab/kernels.hpp"

#include <algorithm>

#include <omp.h>

#include "invlab/rng.hpp"

namespace invlab {

Mat gram_serial(const RowMat& z) {
  const Eigen::Index n = z.rows(), d = z.cols();
  Mat k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < d; ++c) s += z(i, c) * z(j, c);
      k(i, j) = s;
      k(j, i) = s;
    }
  }
  return k;
}

Mat gram_parallel(const RowMat& z) {
  const Eigen::Index n = z.rows();
  Mat k(n, n);
  constexpr Eigen::Index kBlock = 16;
  const Eigen::Index blocks = (n + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index lo = b * kBlock;
    const Eigen::Index rows = std::min(kBlock, n - lo);
    // Lower-triangular block row: rows [lo, lo+rows) against rows [0, lo+rows).
    const Eigen::Index cols = lo + rows;
    Mat part = z.middleRows(lo, rows) * z.topRows(cols).transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j <= lo + i; ++j) {
        k(lo + i, j) = part(i, j);
        k(j, lo + i) = part(i, j);
      }
    }
  }
  return k;
}

namespace {

std::int64_t chunk_errors(const Vec& w, const Vec& mu_c, const Vec& mu_s, double sigma,
                          double theta, std::int64_t count, std::uint64_t seed, std::int64_t chunk) {
  Rng rng(derive_seed({seed, static_cast<std::uint64_t>(chunk)}));
  const Vec mean = mu_c + theta * mu_s;
  const Eigen::Index d = w.size();
  Vec x(d);
  std::int64_t errors = 0;
  for (std::int64_t s = 0; s < count; ++s) {
    const double y = (rng.next_u64() >> 63) ? 1.0 : -1.0;
    for (Eigen::Index c = 0; c < d; ++c) x[c] = y * mean[c] + sigma * rng.normal();
    // A zero score counts as an error.
    if (y * x.dot(w) <= 0.0) ++errors;
  }
  return errors;
}

std::int64_t chunk_size(std::int64_t samples, std::int64_t chunk) {
  return std::min(kMonteCarloChunk, samples - chunk * kMonteCarloChunk);
}

}  // namespace

MonteCarloError monte_carlo_error_serial(const Vec& w, const Vec& mu_c, const Vec& mu_s,
                                         double sigma, double theta, std::int64_t samples,
                                         std::uint64_t seed) {
  const std::int64_t chunks = (samples + kMonteCarloChunk - 1) / kMonteCarloChunk;
  MonteCarloError out{0, samples};
  for (std::int64_t c = 0; c < chunks; ++c)
    out.errors += chunk_errors(w, mu_c, mu_s, sigma, theta, chunk_size(samples, c), seed, c);
  return out;
}

MonteCarloError monte_carlo_error_parallel(const Vec& w, const Vec& mu_c, const Vec& mu_s,
                                           double sigma, double theta, std::int64_t samples,
                                           std::uint64_t seed) {
  const std::int64_t chunks = (samples + kMonteCarloChunk - 1) / kMonteCarloChunk;
  std::int64_t errors = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : errors)
  for (std::int64_t c = 0; c < chunks; ++c)
    errors += chunk_errors(w, mu_c, mu_s, sigma, theta, chunk_size(samples, c), seed, c);
  return {errors, samples};
}

int worker_count() { return omp_get_max_threads(); }

}  // namespace invlab
