#include <doctest.h>

#include "lace/enumeration.hpp"
#include "lace/errors.hpp"
#include "lace/lattice.hpp"
#include "lace/models.hpp"
#include "oracle/reference_kernel.hpp"

#include <cmath>
#include <random>

using namespace lace;
using Cx = std::complex<double>;

namespace {

SignedField random_field(std::mt19937_64& rng, int dim, int entries, int radius) {
  std::uniform_int_distribution<int> coord(-radius, radius);
  std::uniform_real_distribution<double> weight(-1.0, 1.0);
  SignedField f(dim);
  for (int i = 0; i < entries; ++i) {
    LatticePoint x(dim);
    for (int a = 0; a < dim; ++a) x[a] = coord(rng);
    f.add(x, weight(rng));
  }
  return f;
}

SignedField two_sided(double p, double q) {
  SignedField f(1);
  f.set({1}, p);
  f.set({-1}, q);
  return f;
}

}  // namespace

TEST_CASE("lattice points: arithmetic, norms and ordering") {
  LatticePoint a{1, -2, 3}, b{0, 5, -1};
  CHECK(a + b == LatticePoint{1, 3, 2});
  CHECK(a - b == LatticePoint{1, -7, 4});
  CHECK(-a == LatticePoint{-1, 2, -3});
  CHECK(a.sup_norm() == 3);
  CHECK(a.l1_norm() == 6);
  CHECK(a.norm() == doctest::Approx(std::sqrt(14.0)));
  CHECK(LatticePoint::unit(3, 1, -1) == LatticePoint{0, -1, 0});
  CHECK(LatticePoint::origin(2) == LatticePoint{0, 0});
  CHECK(LatticePoint{0, 5} < LatticePoint{1, -9});
  CHECK(LatticePoint{1, -9} < LatticePoint{1, 0});
  const LatticePoint j = a.join(b);
  CHECK(j.dim() == 6);
  CHECK(j.head(3) == a);
  CHECK(j.tail(3) == b);
  CHECK(a.str() == "(1,-2,3)");
}

TEST_CASE("signed fields keep signed cancellations until normalized") {
  SignedField f(1);
  f.add({2}, 0.5);
  f.add({2}, -0.5);
  f.add({0}, 1e-17);
  CHECK(f.size() == 2);
  f.normalize();
  CHECK(f.empty());
  CHECK_THROWS_AS(f.add({1, 1}, 1.0), ConfigError);
}

TEST_CASE("convolution examples") {
  std::mt19937_64 rng(11);
  const SignedField g = random_field(rng, 2, 12, 3);
  CHECK(max_abs_difference(convolve(SignedField::delta(LatticePoint::origin(2)), g), g) == 0.0);

  const double p = 0.7, q = 0.3;
  const SignedField sq = convolve(two_sided(p, q), two_sided(p, q));
  CHECK(sq.at({2}) == doctest::Approx(p * p).epsilon(1e-15));
  CHECK(sq.at({0}) == doctest::Approx(2 * p * q).epsilon(1e-15));
  CHECK(sq.at({-2}) == doctest::Approx(q * q).epsilon(1e-15));

  // D^{*3} against listing every path of the non-interacting walk.
  const ModelSpec m = make_excited(1, 0.0);
  const SignedField D = first_step_field(m);
  const SignedField d3 = convolve(convolve(D, D), D);
  CHECK(oracle::max_diff(oracle::endpoint_law(m, {{0}}, 3), d3) <= 1e-15);
  CHECK(max_abs_difference(two_point(m, 3), d3) <= 1e-15);

  CHECK_THROWS_AS(convolve(SignedField(1), SignedField(2)), ConfigError);
}

TEST_CASE("convolution is commutative and associative on random sparse fields") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 1 + trial % 3;
    auto f = random_field(rng, dim, 8, 3), g = random_field(rng, dim, 7, 2), h = random_field(rng, dim, 5, 4);
    CHECK(max_abs_difference(convolve(f, g), convolve(g, f)) <= 1e-12);
    CHECK(max_abs_difference(convolve(convolve(f, g), h), convolve(f, convolve(g, h))) <= 1e-12);
    const long r = convolve(f, g).support_radius();
    CHECK(r <= f.support_radius() + g.support_radius());
  }
}

TEST_CASE("Fourier evaluation") {
  Eigen::VectorXd k(2);
  k << 0.3, -1.1;
  CHECK(std::abs(fourier_eval(SignedField::delta(LatticePoint::origin(2)), k).value - Cx(1.0, 0.0)) == 0.0);

  for (double beta : {0.2, 0.5}) {
    const SignedField D = first_step_field(make_excited(1, beta));
    for (double kk : {-2.0, -0.4, 0.0, 0.9, 3.0}) {
      const auto v = fourier_eval(D, Eigen::VectorXd::Constant(1, kk)).value;
      CHECK(std::abs(v - Cx(std::cos(kk), beta * std::sin(kk))) <= 1e-15);
    }
  }
  CHECK(fourier_eval(SignedField::delta({0}), Eigen::VectorXd::Constant(1, 3.5)).outside_zone);
  CHECK_FALSE(fourier_eval(SignedField::delta({0}), Eigen::VectorXd::Constant(1, 3.0)).outside_zone);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(-M_PI, M_PI);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = random_field(rng, 2, 9, 3), g = random_field(rng, 2, 6, 3);
    Eigen::VectorXd kt(2);
    kt << unif(rng), unif(rng);
    const auto lhs = fourier_eval(convolve(f, g), kt).value;
    const auto rhs = fourier_eval(f, kt).value * fourier_eval(g, kt).value;
    CHECK(std::abs(lhs - rhs) <= 1e-12);
    CHECK(std::abs(fourier_eval(f, kt).value) <= f.total_abs() + 1e-12);
    CHECK(std::abs(fourier_eval(f, Eigen::VectorXd::Zero(2)).value - moments(f).mass) <= 1e-12);
  }
}

TEST_CASE("moments") {
  const Moments m = moments(first_step_field(make_excited(2, 0.5)));
  CHECK(m.mass == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.first[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(m.first[1] == 0.0);
  CHECK((m.second - 0.5 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-15);

  const LatticePoint x{2, -3};
  const Moments md = moments(SignedField::delta(x));
  CHECK(md.mass == 1.0);
  CHECK(md.first == x.to_vector());
  CHECK(md.second == x.to_vector() * x.to_vector().transpose());
}

TEST_CASE("finite differences of the transform reproduce the moments") {
  std::mt19937_64 rng(3);
  const double h = 1e-4;
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 1 + trial % 2;
    const SignedField f = random_field(rng, dim, 10, 3);
    const Moments mo = moments(f);
    auto F = [&](const Eigen::VectorXd& k) { return fourier_eval(f, k).value; };
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(dim);
    for (int a = 0; a < dim; ++a) {
      const Eigen::VectorXd ea = Eigen::VectorXd::Unit(dim, a) * h;
      const Cx grad = (F(ea) - F(-ea)) / (2 * h);
      const double scale = std::max(1.0, std::abs(mo.first[a]));
      CHECK(std::abs(grad - Cx(0.0, mo.first[a])) / scale <= 1e-6);
      for (int b = 0; b < dim; ++b) {
        const Eigen::VectorXd eb = Eigen::VectorXd::Unit(dim, b) * h;
        const Cx hess = (F(ea + eb) - F(ea - eb) - F(-ea + eb) + F(-ea - eb)) / (4 * h * h);
        const double s2 = std::max(1.0, std::abs(mo.second(a, b)));
        CHECK(std::abs(hess + mo.second(a, b)) / s2 <= 1e-6);
      }
    }
    CHECK(std::abs(F(z) - mo.mass) <= 1e-12);
  }
}

TEST_CASE("serialization") {
  SignedField f(2);
  f.set({1, 0}, 0.25);
  f.set({-1, 2}, -0.5);
  const auto j = f.to_json();
  CHECK(j["dim"] == 2);
  CHECK(j["entries"][0][0] == std::vector<int>{-1, 2});  // lexicographic
  CHECK(j["entries"][1][1] == 0.25);
  const SignedField back = SignedField::from_json(j);
  CHECK(max_abs_difference(back, f) == 0.0);
  const std::string csv = f.to_csv();
  CHECK(csv.rfind("x1,x2,weight\n", 0) == 0);
  CHECK(csv.find("-1,2,-0.5") != std::string::npos);
}
