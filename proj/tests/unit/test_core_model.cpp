#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "helpers.hpp"
#include "invlab/kernels.hpp"
#include "invlab/serialize.hpp"

using namespace invlab;
using testing::axis_instance;
using testing::random_vec;
using testing::unit;

namespace {

// Q(t) by adaptive Gauss-Kronrod integration of the normal density over [t, inf).
double tail_by_quadrature(double t) {
  auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      phi, t, std::numeric_limits<double>::infinity(), 20, 1e-15);
}

}  // namespace

TEST_CASE("orthogonal means in the plane are a quarter turn apart") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const MeanPair m = sample_orthogonal_means(2, 1.0, 2.0, rng);
    const Vec rot(Eigen::Vector2d(-m.mu_c[1], m.mu_c[0]));
    const double sign = m.mu_s.dot(rot) > 0 ? 1.0 : -1.0;
    CHECK((m.mu_s - sign * 2.0 * rot).norm() < 1e-12);
  }
}

TEST_CASE("orthogonal means have the requested norms") {
  Rng rng(7);
  const MeanPair m = sample_orthogonal_means(100, 1.0, 2.0, rng);
  CHECK(std::abs(m.mu_c.norm() - 1.0) < 1e-12);
  CHECK(std::abs(m.mu_s.norm() - 2.0) < 2e-12);
  CHECK(std::abs(m.mu_c.dot(m.mu_s)) <= 2e-9);
}

TEST_CASE("orthogonality holds over many seeds and dimensions") {
  for (int d : {2, 10, 1000})
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      Rng rng(derive_seed({seed, static_cast<std::uint64_t>(d)}));
      const MeanPair m = sample_orthogonal_means(d, 1.5, 0.5, rng);
      REQUIRE(std::abs(m.mu_c.dot(m.mu_s)) <= 1e-9 * 1.5 * 0.5);
    }
}

TEST_CASE("mean direction has the spherical marginal moments") {
  // <u, e_1> for u uniform on S^{d-1}: mean 0, variance 1/d.
  const int d = 50, draws = 10000;
  double s = 0.0, s2 = 0.0;
  for (int k = 0; k < draws; ++k) {
    Rng rng(derive_seed({99, static_cast<std::uint64_t>(k)}));
    const double c = sample_orthogonal_means(d, 1.0, 1.0, rng).mu_c[0];
    s += c;
    s2 += c * c;
  }
  const double mean = s / draws, var = s2 / draws - mean * mean;
  CHECK(std::abs(mean) <= 3.0 * std::sqrt(1.0 / d / draws));
  CHECK(std::abs(var - 1.0 / d) <= 0.1 / d);
}

TEST_CASE("orthogonal means reject bad arguments") {
  Rng rng(1);
  CHECK_THROWS_AS(sample_orthogonal_means(1, 1.0, 1.0, rng), InvalidArgument);
  CHECK_THROWS_AS(sample_orthogonal_means(5, 0.0, 1.0, rng), InvalidArgument);
  CHECK_THROWS_AS(sample_orthogonal_means(5, 1.0, -1.0, rng), InvalidArgument);
}

TEST_CASE("noiseless samples sit on the class means") {
  const auto inst = axis_instance(6, 1.0, 2.0, 1.0, 0.0, 5, 5, 1e-30);
  const LabeledDataset data = testing::sample(inst, 3);
  for (int i = 0; i < data.size(); ++i) {
    const double theta = data.env()[i] == 1 ? 1.0 : 0.0;
    const Vec expect = data.y()[i] * (inst.mu_c + theta * inst.mu_s);
    CHECK((data.x().row(i).transpose() - expect).norm() <= 1e-15);
  }
  CHECK(data.count_env(1) == 5);
  CHECK(data.count_env(2) == 5);
}

TEST_CASE("signed sample mean concentrates on mu_c") {
  const int n = 100000;
  const double sigma = 0.7;
  const auto inst = axis_instance(5, 1.0, 2.0, 0.0, 0.0, n, 1, sigma);
  const LabeledDataset data = testing::sample(inst, 8);
  Vec mean = Vec::Zero(5);
  for (int i = 0; i < n; ++i) mean += data.y()[i] * data.x().row(i).transpose();
  mean /= n;
  for (int j = 0; j < 5; ++j) CHECK(std::abs(mean[j] - inst.mu_c[j]) <= 4.0 * sigma / std::sqrt(n));
}

TEST_CASE("sampling is a pure function of the seed") {
  Rng r1(17), r2(17);
  const auto inst = make_instance(30, 1.0, 2.0, 1.0, -0.5, 10, 7, 0.3, 17, r1);
  const auto inst2 = make_instance(30, 1.0, 2.0, 1.0, -0.5, 10, 7, 0.3, 17, r2);
  std::ostringstream a, b;
  write_dataset(a, sample_dataset(inst, r1));
  write_dataset(b, sample_dataset(inst2, r2));
  CHECK(a.str() == b.str());
}

TEST_CASE("labels are balanced in distribution") {
  const auto inst = axis_instance(3, 1.0, 1.0, 1.0, 0.0, 20000, 20000, 1.0);
  const LabeledDataset data = testing::sample(inst, 5);
  const double frac = (data.y().array() > 0).count() / 40000.0;
  CHECK(std::abs(frac - 0.5) <= 4.0 * 0.5 / std::sqrt(40000.0));
}

TEST_CASE("empty environments are rejected") {
  auto inst = axis_instance(3, 1.0, 1.0, 1.0, 0.0, 0, 5, 1.0);
  CHECK_THROWS_AS(testing::sample(inst, 1), InvalidArgument);
  inst.n_1 = 5;
  inst.n_2 = 0;
  CHECK_THROWS_AS(testing::sample(inst, 1), InvalidArgument);
}

TEST_CASE("instances validate their invariants") {
  auto inst = axis_instance(3, 1.0, 1.0, 1.0, 0.0, 2, 2, 1.0);
  CHECK_NOTHROW(inst.validate());
  inst.mu_s[0] = 0.5;
  CHECK_THROWS_AS(inst.validate(), InvalidArgument);
  inst = axis_instance(3, 1.0, 1.0, 1.5, 0.0, 2, 2, 1.0);
  CHECK_THROWS_AS(inst.validate(), InvalidArgument);
  inst = axis_instance(3, 1.0, 1.0, 1.0, 0.0, 2, 2, 0.0);
  CHECK_THROWS_AS(inst.validate(), InvalidArgument);
}

TEST_CASE("datasets validate labels, tags and shapes") {
  RowMat x = RowMat::Zero(2, 3);
  CHECK_THROWS_AS(LabeledDataset(x, Vec::Ones(3), {1, 2}), InvalidArgument);
  CHECK_THROWS_AS(LabeledDataset(x, Vec::Zero(2), {1, 2}), InvalidArgument);
  CHECK_THROWS_AS(LabeledDataset(x, Vec::Ones(2), {1, 3}), InvalidArgument);
  CHECK_NOTHROW(LabeledDataset(x, Vec::Ones(2), {1, 2}));
}

TEST_CASE("Q at zero and by quadrature") {
  CHECK(gaussian_tail(0.0) == 0.5);
  for (double t : {-6.0, -1.0, 0.5, 3.0}) CHECK(std::abs(gaussian_tail(t) - tail_by_quadrature(t)) <= 1e-12);
}

TEST_CASE("Q is symmetric and decreasing") {
  double prev = 1.0;
  for (double t = -8.0; t <= 8.0; t += 0.01) {
    CHECK(std::abs(gaussian_tail(t) + gaussian_tail(-t) - 1.0) <= 1e-15);
    CHECK(gaussian_tail(t) <= prev);
    prev = gaussian_tail(t);
  }
}

TEST_CASE("Q inverse round trip") {
  for (double p : {0.01, 0.3, 0.5}) CHECK(std::abs(gaussian_tail(gaussian_tail_inverse(p)) - p) <= 1e-10);
  CHECK(std::abs(gaussian_tail_inverse(0.5)) <= 1e-12);
  CHECK_THROWS_AS(gaussian_tail_inverse(0.0), InvalidArgument);
  CHECK_THROWS_AS(gaussian_tail_inverse(1.0), InvalidArgument);
}

TEST_CASE("error of the core direction ignores theta") {
  const Vec mu_c = unit(4, 0), mu_s = unit(4, 1, 2.0);
  const LinearModel w(mu_c);
  for (double theta : {-1.0, 0.0, 0.4, 1.0})
    CHECK(error_at_theta(w, mu_c, mu_s, 0.5, theta) == doctest::Approx(gaussian_tail(2.0)).epsilon(1e-14));
}

TEST_CASE("a direction orthogonal to both means is a coin flip") {
  const Vec mu_c = unit(4, 0), mu_s = unit(4, 1, 2.0);
  const LinearModel w(unit(4, 2) + unit(4, 3));
  for (double theta : {-1.0, 0.0, 1.0}) CHECK(error_at_theta(w, mu_c, mu_s, 0.9, theta) == 0.5);
}

TEST_CASE("closed-form error matches fresh samples") {
  Rng rng(23);
  const MeanPair m = sample_orthogonal_means(20, 1.0, 2.0, rng);
  const LinearModel w(random_vec(20, rng) + 2.0 * m.mu_c);
  const double sigma = 1.3, theta = 0.3;
  const auto mc = monte_carlo_error_serial(w.w(), m.mu_c, m.mu_s, sigma, theta, 1000000, 4);
  const double p = error_at_theta(w, m.mu_c, m.mu_s, sigma, theta);
  CHECK(std::abs(mc.rate() - p) <= 0.002);
  CHECK(std::abs(mc.rate() - p) <= 4.0 * std::sqrt(p * (1 - p) / 1e6));
}

TEST_CASE("zero weight vectors are rejected") {
  CHECK_THROWS_AS(LinearModel(Vec::Zero(3)), InvalidArgument);
  Vec bad = Vec::Ones(3);
  bad[1] = std::nan("");
  CHECK_THROWS_AS(LinearModel{bad}, InvalidArgument);
}

TEST_CASE("robust error at the pure directions") {
  const Vec mu_c = unit(5, 0, 1.0), mu_s = unit(5, 1, 2.0);
  const double sigma = 0.8;
  CHECK(robust_error(LinearModel(mu_c), mu_c, mu_s, sigma).error ==
        doctest::Approx(gaussian_tail(1.0 / sigma)).epsilon(1e-14));
  const RobustError spur = robust_error(LinearModel(mu_s), mu_c, mu_s, sigma);
  CHECK(spur.error == doctest::Approx(gaussian_tail(-2.0 / sigma)).epsilon(1e-14));
  CHECK(spur.error >= 0.5);
  CHECK(spur.worst_theta == -1.0);
  CHECK(robust_error(LinearModel(mu_c - mu_s), mu_c, mu_s, sigma).worst_theta == 1.0);
}

TEST_CASE("robust error equals the theta-grid maximum") {
  Rng rng(31);
  for (int k = 0; k < 200; ++k) {
    const int d = 2 + k % 30;
    const MeanPair m = sample_orthogonal_means(d, 0.5 + rng.uniform(), 0.5 + 2 * rng.uniform(), rng);
    const LinearModel w(random_vec(d, rng));
    const double sigma = 0.2 + rng.uniform();
    const double robust = robust_error(w, m.mu_c, m.mu_s, sigma).error;
    double grid_max = 0.0;
    for (int g = 0; g <= 40; ++g)
      grid_max = std::max(grid_max, error_at_theta(w, m.mu_c, m.mu_s, sigma, -1.0 + 0.05 * g));
    CHECK(std::abs(robust - grid_max) <= 1e-12);
    for (int g = 0; g <= 200; ++g)
      REQUIRE(robust >= error_at_theta(w, m.mu_c, m.mu_s, sigma, -1.0 + 0.01 * g));
  }
}

TEST_CASE("normalized margin plug-in value") {
  const int d = 9;
  const Vec mu_c = unit(d, 0, 1.3);
  const auto data = testing::rows({mu_c}, {1.0}, {1});
  CHECK(normalized_margin(LinearModel(mu_c), data, 1.0 / std::sqrt(d)) == doctest::Approx(1.3).epsilon(1e-14));
}

TEST_CASE("normalized margin is scale invariant and matches enumeration") {
  Rng rng(41);
  const auto inst = axis_instance(12, 1.0, 2.0, 1.0, 0.0, 3, 2, 0.7);
  const LabeledDataset data = testing::sample(inst, 41);
  const Vec w = random_vec(12, rng);
  const double base = normalized_margin(LinearModel(w), data, 0.7);
  for (double c : {1e-6, 1.0, 1e6}) CHECK(std::abs(normalized_margin(LinearModel(c * w), data, 0.7) - base) <= 1e-12);
  double brute = std::numeric_limits<double>::infinity();
  for (int i = 0; i < data.size(); ++i) {
    double s = 0.0;
    for (int j = 0; j < 12; ++j) s += data.x()(i, j) * w[j];
    brute = std::min(brute, data.y()[i] * s);
  }
  brute /= w.norm() * std::sqrt(0.49 * 12);
  CHECK(std::abs(base - brute) <= 1e-12);
}

TEST_CASE("normalized margin of an empty dataset is an error") {
  const LabeledDataset empty(RowMat(0, 3), Vec(0), {});
  CHECK_THROWS_AS(normalized_margin(LinearModel(Vec::Ones(3)), empty, 1.0), InvalidArgument);
}

TEST_CASE("spurious to core ratio") {
  const Vec mu_c = unit(4, 0, 1.0), mu_s = unit(4, 1, 2.0);
  CHECK(spurious_core_ratio(LinearModel(mu_c + mu_s), mu_c, mu_s) == doctest::Approx(4.0));
  CHECK(spurious_core_ratio(LinearModel(mu_c), mu_c, mu_s) == 0.0);
  CHECK_THROWS_AS(spurious_core_ratio(LinearModel(mu_s), mu_c, mu_s), NumericalError);
}

TEST_CASE("a ratio of at least one forces robust error of at least one half") {
  Rng rng(43);
  int checked = 0;
  for (int k = 0; k < 2000; ++k) {
    const int d = 3 + k % 20;
    const MeanPair m = sample_orthogonal_means(d, 0.2 + rng.uniform(), 0.2 + rng.uniform(), rng);
    const LinearModel w(random_vec(d, rng));
    if (w.w().dot(m.mu_c) <= 0.0) continue;
    if (std::abs(spurious_core_ratio(w, m.mu_c, m.mu_s)) < 1.0) continue;
    ++checked;
    REQUIRE(robust_error(w, m.mu_c, m.mu_s, 0.1 + rng.uniform()).error >= 0.5 - 1e-12);
  }
  CHECK(checked > 100);
}

TEST_CASE("invariance gaps vanish without a spurious component") {
  const auto inst = axis_instance(5, 1.0, 2.0, 1.0, 0.0, 6, 6, 1e-30);
  const LabeledDataset data = testing::sample(inst, 2);
  const LinearModel w(unit(5, 0) + unit(5, 3));
  const auto gaps = invariance_gaps(w, data.environment(1), data.environment(2), PopulationTruth::of(inst));
  CHECK(std::abs(gaps.eopp) <= 1e-15);
  CHECK(std::abs(gaps.positive_mean_gap) <= 1e-15);
  REQUIRE(gaps.negative_mean_gap);
  CHECK(std::abs(*gaps.negative_mean_gap) <= 1e-15);
  CHECK(*gaps.population == 0.0);
}

TEST_CASE("EOpp gap of the spurious direction is r_s squared") {
  auto inst = axis_instance(5, 1.0, 2.0, 1.0, 0.0, 8, 8, 1e-30);
  const LabeledDataset data = testing::sample(inst, 4);
  const LinearModel w(inst.mu_s);
  const auto gaps = invariance_gaps(w, data.environment(1), data.environment(2), PopulationTruth::of(inst));
  CHECK(gaps.eopp == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(*gaps.population == doctest::Approx(2.0));
}

TEST_CASE("EOpp gap matches per-row summation") {
  Rng rng(3);
  const auto inst = axis_instance(7, 1.0, 2.0, 1.0, -0.5, 11, 9, 0.8);
  const LabeledDataset data = testing::sample(inst, 12);
  const Vec w = random_vec(7, rng);
  const LabeledDataset d1 = data.environment(1), d2 = data.environment(2);
  auto pos_mean = [&](const LabeledDataset& s) {
    double sum = 0.0;
    int n = 0;
    for (int i = 0; i < s.size(); ++i)
      if (s.y()[i] > 0) {
        for (int j = 0; j < 7; ++j) sum += s.x()(i, j) * w[j];
        ++n;
      }
    return sum / n;
  };
  CHECK(std::abs(invariance_gaps(LinearModel(w), d1, d2).eopp - (pos_mean(d1) - pos_mean(d2))) <= 1e-12);
}

TEST_CASE("EOpp needs positive examples") {
  const auto data = testing::rows({unit(3, 0), unit(3, 1)}, {-1.0, -1.0}, {1, 1});
  const auto other = testing::rows({unit(3, 0)}, {1.0}, {2});
  CHECK_THROWS_AS(invariance_gaps(LinearModel(Vec::Ones(3)), data, other), NoPositiveExamples);
  // Metric operations still accept one-class data.
  CHECK_NOTHROW(normalized_margin(LinearModel(Vec::Ones(3)), data, 1.0));
}

TEST_CASE("cosine similarity") {
  Rng rng(4);
  const Vec a = random_vec(8, rng), b = random_vec(8, rng);
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(3.0 * a, 0.5 * b) == doctest::Approx(cosine_similarity(a, b)).epsilon(1e-14));
  CHECK_THROWS_AS(cosine_similarity(a, Vec::Zero(8)), InvalidArgument);
}
