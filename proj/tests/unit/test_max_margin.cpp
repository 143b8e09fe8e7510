#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "invlab/estimators.hpp"

using namespace invlab;
using testing::unit;

namespace {

// Minimum-norm w with <w, z_i> >= 1 in the plane, found by trying every
// support set of one or two constraints held with equality.
Vec brute_force_plane(const RowMat& z) {
  const int n = static_cast<int>(z.rows());
  Vec best;
  double best_norm = std::numeric_limits<double>::infinity();
  auto consider = [&](const Eigen::Vector2d& w) {
    for (int i = 0; i < n; ++i)
      if (z.row(i).dot(w) < 1.0 - 1e-12) return;
    if (w.norm() < best_norm) {
      best_norm = w.norm();
      best = w;
    }
  };
  for (int a = 0; a < n; ++a) {
    const Eigen::Vector2d za = z.row(a).transpose();
    consider(za / za.squaredNorm());
    for (int b = a + 1; b < n; ++b) {
      Eigen::Matrix2d m;
      m.row(0) = z.row(a);
      m.row(1) = z.row(b);
      if (std::abs(m.determinant()) < 1e-12) continue;
      consider(m.inverse() * Eigen::Vector2d::Ones());
    }
  }
  return best;
}

}  // namespace

TEST_CASE("two symmetric points give the textbook solution") {
  const auto data = testing::rows({unit(2, 0), -unit(2, 0)}, {1.0, -1.0}, {1, 2});
  const MaxMarginResult r = max_margin(data);
  CHECK((r.model.w() - unit(2, 0)).norm() <= 1e-8);
  CHECK(r.duality_gap <= 1e-8);
}

TEST_CASE("max margin matches a support-set search in the plane") {
  Rng rng(12);
  int solved = 0;
  for (int trial = 0; trial < 300 && solved < 60; ++trial) {
    const int n = 2 + trial % 5;
    RowMat x(n, 2);
    Vec y(n);
    // Points in a cone around a random direction, so the set is separable.
    const double phi = 2 * M_PI * rng.uniform();
    for (int i = 0; i < n; ++i) {
      const double a = phi + (rng.uniform() - 0.5) * 2.5;
      const double r = 0.3 + 2.0 * rng.uniform();
      y[i] = rng.uniform() < 0.5 ? 1.0 : -1.0;
      x(i, 0) = y[i] * r * std::cos(a);
      x(i, 1) = y[i] * r * std::sin(a);
    }
    const LabeledDataset data(x, y, std::vector<int>(n, 1));
    const Vec ref = brute_force_plane(data.signed_rows());
    REQUIRE(ref.size() == 2);
    const Vec w = max_margin(data, 1e-10).model.w();
    CHECK((w - ref).norm() <= 1e-6 * std::max(1.0, ref.norm()));
    ++solved;
  }
  CHECK(solved == 60);
}

TEST_CASE("constraints hold with the smallest margin in [1, 1 + tol]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = testing::axis_instance(60, 1.0, 2.0, 1.0, 0.0, 15, 10, 0.3);
    const LabeledDataset data = testing::sample(inst, seed);
    const double tol = 1e-8;
    const MaxMarginResult r = max_margin(data, tol);
    const Vec m = data.signed_rows() * r.model.w();
    CHECK(m.minCoeff() >= 1.0 - 1e-12);
    CHECK(m.minCoeff() <= 1.0 + tol);
    CHECK(r.duality_gap <= tol);
    CHECK((r.alpha.array() >= 0.0).all());
  }
}

TEST_CASE("max margin beats the mean estimator's normalized margin") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int d = 30 + static_cast<int>(seed % 40);
    const auto inst = testing::axis_instance(d, 1.0, 2.0, 1.0, 0.0, 8, 6, 0.5);
    const LabeledDataset data = testing::sample(inst, 500 + seed);
    const double mm = normalized_margin(max_margin(data).model, data, 0.5);
    const double mean = normalized_margin(mean_estimator(data), data, 0.5);
    REQUIRE(mm >= mean - 1e-9);
  }
}

TEST_CASE("non-separable data come with a hull certificate") {
  const auto data = testing::rows({unit(2, 0), unit(2, 0)}, {1.0, -1.0}, {1, 2});
  try {
    max_margin(data);
    FAIL("expected NotSeparable");
  } catch (const NotSeparable& e) {
    const Vec& lam = e.weights();
    CHECK(lam.sum() == doctest::Approx(1.0));
    CHECK((lam.array() >= 0.0).all());
    const Vec p = data.signed_rows().transpose() * lam;
    CHECK(p.norm() <= 1e-6);
    CHECK(e.residual() == doctest::Approx(p.norm()).epsilon(1e-6));
  }
  // More samples than dimensions with heavy noise.
  const auto inst = testing::axis_instance(2, 0.1, 0.1, 1.0, 0.0, 40, 40, 1.0);
  CHECK_THROWS_AS(max_margin(testing::sample(inst, 3)), NotSeparable);
  const auto zero = testing::rows({Vec::Zero(3)}, {1.0}, {1});
  CHECK_THROWS_AS(max_margin(zero), NotSeparable);
}
