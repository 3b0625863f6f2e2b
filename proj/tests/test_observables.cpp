#include <doctest.h>

#include "lace/observables.hpp"

#include <cmath>

using namespace lace;

TEST_CASE("speed series") {
  const ModelSpec flat = make_once_reinforced_1d(2, 1, 0.0);
  const PiTable p0 = pi_from_recurrence(flat, 6);
  CHECK(theta_truncated(p0, 6)[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const double beta = 0.5;
  const PiTable p = pi_from_recurrence(make_excited(1, beta), 8);
  CHECK(std::abs(theta_truncated(p, 3)[0] - 0.3125) <= 1e-12);
  CHECK(std::abs(theta_truncated(p, 3)[0] - (beta - beta * (1 - beta * beta) / 2)) <= 1e-12);
  const SpeedSeries s = speed_series(p);
  CHECK(s.theta_n.at(1) == s.theta_null);
  for (int m = 2; m <= 8; ++m) CHECK((s.theta_n.at(m) - s.theta_n.at(m - 1) - s.a.at(m)).norm() <= 1e-15);
}

TEST_CASE("speed identity on every model") {
  const std::vector<std::pair<ModelSpec, int>> cases = {{make_excited(1, 0.5), 8},
                                                       {make_excited(2, 0.2), 6},
                                                       {make_once_reinforced_1d(2, 1, 0.3), 8},
                                                       {make_two_point_environment(0.1), 6},
                                                       {make_excited(1, 0.0), 8}};
  for (const auto& [m, n] : cases) {
    CAPTURE(m.name);
    const auto r = speed_identity_check(m, pi_from_recurrence(m, n + 1), n);
    CHECK(r.per_n.size() == static_cast<std::size_t>(n + 1));
    CHECK(r.max <= 1e-10);
  }
}

TEST_CASE("covariance identity on every model") {
  const std::vector<std::pair<ModelSpec, int>> cases = {{make_excited(1, 0.5), 8},
                                                       {make_excited(2, 0.2), 6},
                                                       {make_once_reinforced_1d(2, 1, 0.3), 8},
                                                       {make_two_point_environment(0.1), 6}};
  for (const auto& [m, n] : cases) {
    CAPTURE(m.name);
    CHECK(covariance_increment_check(m, pi_from_recurrence(m, n), n).max <= 1e-10);
  }
  // Without interaction the increment is the one-step covariance at every n.
  const ModelSpec flat = make_once_reinforced_1d(2, 1, 0.0);
  const auto em = exact_moments(flat, 6);
  for (int n = 0; n < 6; ++n) {
    const Eigen::MatrixXd inc = em.covariance[n + 1] - em.covariance[n];
    CHECK(inc(0, 0) == doctest::Approx(1.0 - 1.0 / 9.0).epsilon(1e-13));
  }
}

TEST_CASE("covariance series") {
  const ModelSpec flat = make_once_reinforced_1d(2, 1, 0.0);
  const PiTable p0 = pi_from_recurrence(flat, 5);
  const Eigen::VectorXd th0 = theta_truncated(p0, 5);
  CHECK(sigma_truncated(p0, th0, 5)(0, 0) == doctest::Approx(1.0 - 1.0 / 9.0).epsilon(1e-14));

  for (const auto& m : {make_excited(2, 0.2), make_two_point_environment(0.1), make_once_reinforced_1d(2, 1, 0.3)}) {
    const PiTable p = pi_from_recurrence(m, 7);
    for (int M = 2; M <= 7; ++M) {
      const Eigen::VectorXd th = theta_truncated(p, M);
      const Eigen::MatrixXd s = sigma_truncated(p, th, M);
      CHECK((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
      CHECK((s - sigma_truncated_fourier(p, th, M)).cwiseAbs().maxCoeff() <= 1e-10);
    }
    const VarianceSeries vs = variance_series(p);
    for (const auto& [M, s] : vs.sigma_n) CHECK((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("variance slope against the truncated covariance") {
  const ModelSpec m = make_excited(1, 0.5);
  const PiTable p = pi_from_recurrence(m, 6);
  const Eigen::VectorXd th = theta_truncated(p, 6);
  const Eigen::MatrixXd s = sigma_truncated(p, th, 6);
  const auto cmp = variance_slope(exact_moments(m, 12), s, 8, 12);
  CHECK(cmp.discrepancy <= cmp.bound);
  CHECK(cmp.bound > 0.0);
}

TEST_CASE("symmetry zeros and reflections") {
  const PiTable p = pi_from_recurrence(make_excited(3, 0.3), 6);
  const Eigen::VectorXd th = theta_truncated(p, 6);
  CHECK(std::abs(th[1]) <= 1e-10);
  CHECK(std::abs(th[2]) <= 1e-10);

  const PiTable right = pi_from_recurrence(make_once_reinforced_1d(2, 1, 0.3), 8);
  const PiTable left = pi_from_recurrence(make_once_reinforced_1d(1, 2, 0.3), 8);
  for (int M = 1; M <= 8; ++M)
    CHECK(theta_truncated(left, M)[0] == doctest::Approx(-theta_truncated(right, M)[0]).epsilon(1e-13));
}
