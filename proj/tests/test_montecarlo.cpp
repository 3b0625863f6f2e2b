#include <doctest.h>

#include "lace/errors.hpp"
#include "lace/montecarlo.hpp"
#include "lace/observables.hpp"

#include <cmath>
#include <algorithm>

using namespace lace;

namespace {

McConfig config(int n, long samples, std::uint64_t seed, int threads = 0) {
  McConfig c;
  c.n = n;
  c.samples = samples;
  c.seed = seed;
  c.threads = threads;
  return c;
}

std::string bytes(const McEstimate& e) {
  std::string s;
  auto put = [&](const double* p, std::size_t n) { s.append(reinterpret_cast<const char*>(p), n * sizeof(double)); };
  put(e.mean.data(), e.mean.size());
  put(e.covariance.data(), e.covariance.size());
  put(e.mean_se.data(), e.mean_se.size());
  put(e.covariance_se.data(), e.covariance_se.size());
  for (const auto& z : e.cf) put(reinterpret_cast<const double*>(&z), 2);
  for (const auto& x : e.endpoints) s += x.str();
  return s;
}

}  // namespace

TEST_CASE("sample streams") {
  auto a = sample_stream(1, 0), b = sample_stream(1, 0), c = sample_stream(1, 1), d = sample_stream(2, 0);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(a);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("symmetric walk is centred") {
  const auto e = estimate(make_simple_walk(1), config(1000, 20000, 5));
  CHECK(std::abs(e.mean[0]) <= 3 * e.mean_se[0]);
  CHECK(std::abs(e.covariance(0, 0) / 1000 - 1.0) <= 3 * e.covariance_se(0, 0) / 1000);
  const auto clt = clt_diagnostic(e, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  CHECK(clt.passes);
}

TEST_CASE("first step of the excited walk") {
  const double beta = 0.4;
  const auto e = estimate(make_excited(1, beta), config(1, 40000, 9));
  // mean = 2 P(+1) - 1
  const double p_hat = (e.mean[0] + 1) / 2, se = e.mean_se[0] / 2;
  CHECK(std::abs(p_hat - (1 + beta) / 2) <= 3 * se);
}

TEST_CASE("simulation agrees with exact enumeration at small n") {
  for (const auto& m : {make_excited(2, 0.5), make_once_reinforced_1d(2, 1, 0.3), make_two_point_environment(0.1)}) {
    const int n = 8;
    const auto em = exact_moments(m, n);
    const auto e = estimate(m, config(n, 20000, 13));
    CAPTURE(m.name);
    for (int a = 0; a < m.dim; ++a) {
      CHECK(std::abs(e.mean[a] - em.mean[n][a]) <= 4 * e.mean_se[a]);
      CHECK(std::abs(e.covariance(a, a) - em.covariance[n](a, a)) <= 4 * e.covariance_se(a, a));
    }
  }
}

TEST_CASE("no interaction: covariance per step matches the one-step covariance") {
  const ModelSpec m = make_once_reinforced_1d(2, 1, 0.0);
  const int n = 400;
  const auto e = estimate(m, config(n, 20000, 21));
  const double theta0 = 1.0 / 3.0, var = 1.0 - theta0 * theta0;
  CHECK(std::abs(e.mean[0] / n - theta0) <= 3 * e.mean_se[0] / n);
  CHECK(std::abs(e.covariance(0, 0) / n - var) <= 3 * e.covariance_se(0, 0) / n);
}

TEST_CASE("standard errors scale like one over root N") {
  const ModelSpec m = make_excited(2, 0.2);
  const auto a = estimate(m, config(100, 10000, 3));
  const auto b = estimate(m, config(100, 20000, 3));
  for (int i = 0; i < 2; ++i) CHECK(a.mean_se[i] / b.mean_se[i] == doctest::Approx(std::sqrt(2.0)).epsilon(0.3));
}

TEST_CASE("estimates are reproducible and independent of the worker count") {
  const ModelSpec m = make_two_point_environment(0.1);
  McConfig c = config(200, 3000, 77, 1);
  c.k_set = {Eigen::Vector2d(0.5, 0.0), Eigen::Vector2d(0.3, 0.4)};
  const auto one = bytes(estimate(m, c));
  c.threads = 4;
  const auto four = bytes(estimate(m, c));
  c.threads = 1;
  const auto again = bytes(estimate(m, c));
  CHECK(one == four);
  CHECK(one == again);
}

TEST_CASE("covariance estimates are symmetric positive semidefinite") {
  const auto e = estimate(make_excited(3, 0.3), config(50, 2000, 8));
  CHECK((e.covariance - e.covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(e.covariance).eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("truncated speeds approach the simulated speed") {
  // |mean/n - theta_M| shrinks as M grows, for both drifting models.
  const std::vector<std::pair<ModelSpec, int>> cases = {{make_excited(2, 0.2), 2000},
                                                       {make_once_reinforced_1d(2, 1, 0.3), 5000}};
  for (const auto& [m, n] : cases) {
    const auto e = estimate(m, config(n, 4000, 19));
    const PiTable p = pi_from_recurrence(m, 8);
    const double mc = e.mean[0] / n, se = e.mean_se[0] / n;
    double prev = std::abs(mc - theta_truncated(p, 3)[0]);
    for (int M : {5, 8}) {
      const double gap = std::abs(mc - theta_truncated(p, M)[0]);
      CAPTURE(m.name);
      CHECK(gap <= prev + se);
      prev = gap;
    }
  }
}

TEST_CASE("characteristic-function diagnostic handles degenerate directions") {
  const auto e = estimate(make_simple_walk(2), [] {
    McConfig c = config(100, 2000, 4);
    c.k_set = {Eigen::Vector2d(0.5, 0.0), Eigen::Vector2d(0.0, 0.5)};
    return c;
  }());
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(2, 2);
  sigma(0, 0) = 0.5;
  const auto rep = clt_diagnostic(e, Eigen::VectorXd::Zero(2), sigma);
  CHECK(rep.rows[1].skipped);
  CHECK_FALSE(rep.notes.empty());
}

TEST_CASE("plot-ready output") {
  McConfig c = config(100, 1000, 2);
  c.checkpoints = 10;
  const auto e = estimate(make_excited(1, 0.3), c);
  const std::string rm = running_mean_csv(e);
  CHECK(rm.rfind("step,", 0) == 0);
  CHECK(std::count(rm.begin(), rm.end(), '\n') == 11);
  const std::string qq = qq_csv(e, 100);
  CHECK(qq.find("normal_quantile") != std::string::npos);
  CHECK_THROWS_AS(estimate(make_excited(1, 0.3), config(10, 50, 1)), ConfigError);
}
