#include "lace/observables.hpp"

#include "lace/errors.hpp"

#include <algorithm>
#include <cmath>

namespace lace {

SpeedSeries speed_series(const PiTable& pi) {
  SpeedSeries s;
  s.theta_null = moments(pi.D).first;
  Eigen::VectorXd acc = s.theta_null;
  s.theta_n.emplace(1, acc);
  for (int m = 2; m <= pi.M; ++m) {
    Eigen::VectorXd a = moments(pi.marginal(m)).first;
    acc += a;
    s.a.emplace(m, a);
    s.theta_n.emplace(m, acc);
  }
  return s;
}

VarianceSeries variance_series(const PiTable& pi) {
  VarianceSeries v;
  const SpeedSeries sp = speed_series(pi);
  v.sigma_null = moments(pi.D).second;
  for (int m = 2; m <= pi.M; ++m) v.second.emplace(m, moments(pi.marginal(m)).second);
  for (int n = 1; n <= pi.M; ++n) v.sigma_n.emplace(n, sigma_truncated(pi, sp.theta_n.at(n), n));
  return v;
}

Eigen::VectorXd theta_truncated(const PiTable& pi, int M) {
  if (M > pi.M) throw ConfigError("expansion table does not reach lag M");
  Eigen::VectorXd th = moments(pi.D).first;
  for (int m = 2; m <= M; ++m) th += moments(pi.marginal(m)).first;
  return th;
}

Eigen::MatrixXd sigma_truncated(const PiTable& pi, const Eigen::VectorXd& theta, int M) {
  if (M > pi.M) throw ConfigError("expansion table does not reach lag M");
  Eigen::MatrixXd s = moments(pi.D).second - theta * theta.transpose();
  for (int m = 2; m <= M; ++m) {
    const Moments mo = moments(pi.marginal(m));
    s -= (m - 1) * (theta * mo.first.transpose() + mo.first * theta.transpose()) - mo.second;
  }
  return s;
}

Eigen::MatrixXd sigma_truncated_fourier(const PiTable& pi, const Eigen::VectorXd& theta, int M) {
  if (M > pi.M) throw ConfigError("expansion table does not reach lag M");
  const int d = pi.dim;
  Eigen::MatrixXd s = moments(pi.D).second - theta * theta.transpose();
  for (int m = 2; m <= M; ++m) {
    // Hessian at 0 of sum_y exp(i k.(y - (m-1) theta)) pi_m(y).
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d, d);
    const SignedField pm = pi.marginal(m);
    for (const auto& [y, w] : pm.entries()) {
      const Eigen::VectorXd u = y.to_vector() - (m - 1) * theta;
      hess -= w * u * u.transpose();
    }
    s -= hess;
  }
  return s;
}

IdentityResidual speed_identity_check(const PiTable& pi, const ExactMoments& em, int n_max) {
  if (static_cast<int>(em.mean.size()) < n_max + 2 || pi.M < n_max + 1)
    throw ConfigError("speed identity needs moments to n_max + 1 and expansion lags to n_max + 1");
  const SpeedSeries sp = speed_series(pi);
  IdentityResidual r;
  for (int n = 0; n <= n_max; ++n) {
    const Eigen::VectorXd lhs = em.mean[n + 1] - em.mean[n];
    const Eigen::VectorXd rhs = sp.theta_n.at(std::max(1, n + 1));
    const double v = (lhs - rhs).cwiseAbs().maxCoeff();
    r.per_n.push_back(v);
    r.max = std::max(r.max, v);
  }
  return r;
}

IdentityResidual speed_identity_check(const ModelSpec& model, const PiTable& pi, int n_max,
                                      const EnumerationOptions& opts) {
  return speed_identity_check(pi, exact_moments(model, n_max + 1, opts), n_max);
}

Eigen::MatrixXd covariance_increment_rhs(const PiTable& pi, const ExactMoments& em, int n) {
  const Moments dm = moments(pi.D);
  const auto& mu = em.mean;
  Eigen::MatrixXd rhs = dm.second + dm.first * mu[n].transpose() + mu[n] * dm.first.transpose() -
                        mu[n + 1] * mu[n + 1].transpose() + mu[n] * mu[n].transpose();
  for (int m = 2; m <= n + 1; ++m) {
    const Moments pm = moments(pi.marginal(m));
    rhs += pm.second + pm.first * mu[n + 1 - m].transpose() + mu[n + 1 - m] * pm.first.transpose();
  }
  return rhs;
}

IdentityResidual covariance_increment_check(const PiTable& pi, const ExactMoments& em, int n_max) {
  if (static_cast<int>(em.mean.size()) < n_max + 1 || pi.M < n_max)
    throw ConfigError("covariance identity needs moments and expansion lags to n_max");
  IdentityResidual r;
  for (int n = 0; n < n_max; ++n) {
    const Eigen::MatrixXd lhs = em.covariance[n + 1] - em.covariance[n];
    const double v = (lhs - covariance_increment_rhs(pi, em, n)).cwiseAbs().maxCoeff();
    r.per_n.push_back(v);
    r.max = std::max(r.max, v);
  }
  return r;
}

IdentityResidual covariance_increment_check(const ModelSpec& model, const PiTable& pi, int n_max,
                                            const EnumerationOptions& opts) {
  return covariance_increment_check(pi, exact_moments(model, n_max, opts), n_max);
}

SlopeComparison variance_slope(const ExactMoments& em, const Eigen::MatrixXd& sigma, int n_lo, int n_hi) {
  if (n_hi <= n_lo || static_cast<int>(em.covariance.size()) <= n_hi)
    throw ConfigError("slope window is empty or beyond the exact moments");
  double nbar = 0;
  for (int n = n_lo; n <= n_hi; ++n) nbar += n;
  nbar /= (n_hi - n_lo + 1);
  Eigen::MatrixXd num = Eigen::MatrixXd::Zero(sigma.rows(), sigma.cols());
  double den = 0;
  for (int n = n_lo; n <= n_hi; ++n) {
    num += (n - nbar) * em.covariance[n];
    den += (n - nbar) * (n - nbar);
  }
  SlopeComparison out;
  out.slope = num / den;
  out.sigma = sigma;
  out.discrepancy = (out.slope - sigma).cwiseAbs().maxCoeff();
  for (int n = n_lo; n < n_hi; ++n)
    out.bound = std::max(out.bound, (em.covariance[n + 1] - em.covariance[n] - sigma).cwiseAbs().maxCoeff());
  return out;
}

}  // namespace lace
