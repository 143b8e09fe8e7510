#include <doctest.h>

#include "helpers.hpp"
#include "invlab/kernels.hpp"

using namespace invlab;

TEST_CASE("parallel Gram matches the serial reference") {
  Rng rng(1);
  for (int n : {1, 15, 16, 17, 50}) {
    RowMat z(n, 37);
    for (int i = 0; i < n; ++i) z.row(i) = testing::random_vec(37, rng).transpose();
    const Mat a = gram_serial(z), b = gram_parallel(z);
    CHECK((a - b).norm() <= 1e-12 * a.norm());
    CHECK((a - a.transpose()).norm() == 0.0);
    CHECK((b - b.transpose()).norm() == 0.0);
    CHECK((a - z * z.transpose()).norm() <= 1e-12 * a.norm());
  }
}

TEST_CASE("parallel Monte-Carlo counts equal the serial reference") {
  Rng rng(2);
  const Vec w = testing::random_vec(6, rng);
  const Vec mu_c = testing::unit(6, 0), mu_s = testing::unit(6, 1, 2.0);
  for (std::int64_t samples : {std::int64_t{1}, std::int64_t{1000}, std::int64_t{kMonteCarloChunk + 5}, std::int64_t{3 * kMonteCarloChunk}}) {
    const auto a = monte_carlo_error_serial(w, mu_c, mu_s, 1.1, -0.4, samples, 9);
    const auto b = monte_carlo_error_parallel(w, mu_c, mu_s, 1.1, -0.4, samples, 9);
    CHECK(a.errors == b.errors);
    CHECK(a.samples == samples);
    CHECK(b.samples == samples);
  }
  CHECK(worker_count() >= 1);
}

TEST_CASE("Monte-Carlo error of a perfect noiseless classifier is zero") {
  const Vec mu_c = testing::unit(3, 0), mu_s = testing::unit(3, 1);
  CHECK(monte_carlo_error_serial(mu_c, mu_c, mu_s, 1e-9, 0.5, 5000, 1).errors == 0);
  CHECK(monte_carlo_error_serial(-mu_c, mu_c, mu_s, 1e-9, 0.5, 5000, 1).errors == 5000);
}
