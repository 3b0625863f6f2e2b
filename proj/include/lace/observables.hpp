#pragma once

#include "lace/enumeration.hpp"
#include "lace/expansion.hpp"

#include <Eigen/Dense>

#include <map>
#include <vector>

namespace lace {

struct SpeedSeries {
  Eigen::VectorXd theta_null;              // first moment of D
  std::map<int, Eigen::VectorXd> a;        // m -> sum_y y pi_m(y)
  std::map<int, Eigen::VectorXd> theta_n;  // n -> theta_null + sum_{m=2}^n a[m]; theta_n[1] = theta_null
};

struct VarianceSeries {
  Eigen::MatrixXd sigma_null;              // second moment of D
  std::map<int, Eigen::MatrixXd> second;   // m -> sum_y y y^T pi_m(y)
  std::map<int, Eigen::MatrixXd> sigma_n;  // n -> truncated covariance with theta_n inside
};

SpeedSeries speed_series(const PiTable& pi);
VarianceSeries variance_series(const PiTable& pi);

Eigen::VectorXd theta_truncated(const PiTable& pi, int M);
// Moment form.
Eigen::MatrixXd sigma_truncated(const PiTable& pi, const Eigen::VectorXd& theta, int M);
// Fourier form: Hessians of exp(-i theta.k (m-1)) pi_hat_m(k) at k = 0, summed exactly.
Eigen::MatrixXd sigma_truncated_fourier(const PiTable& pi, const Eigen::VectorXd& theta, int M);

struct IdentityResidual {
  std::vector<double> per_n;
  double max = 0.0;
};

// max_{n <= n_max} |E[w_{n+1} - w_n] - theta_null - sum_{m=2}^{n+1} a_m|
IdentityResidual speed_identity_check(const PiTable& pi, const ExactMoments& em, int n_max);
IdentityResidual speed_identity_check(const ModelSpec& model, const PiTable& pi, int n_max,
                                      const EnumerationOptions& opts = {});

// Right side of the covariance increment C_{n+1} - C_n assembled from the
// one-step moments, expansion moments and exact means.
Eigen::MatrixXd covariance_increment_rhs(const PiTable& pi, const ExactMoments& em, int n);
// max over n < n_max and all (i, j) of |C_{n+1} - C_n - rhs|.
IdentityResidual covariance_increment_check(const PiTable& pi, const ExactMoments& em, int n_max);
IdentityResidual covariance_increment_check(const ModelSpec& model, const PiTable& pi, int n_max,
                                            const EnumerationOptions& opts = {});

struct SlopeComparison {
  Eigen::MatrixXd slope;      // least-squares slope of Var(w_n) over the window
  Eigen::MatrixXd sigma;      // truncated covariance
  double discrepancy = 0.0;   // max entry |slope - sigma|
  double bound = 0.0;         // max over the window of |increment - sigma|
};

// Least squares over n in [n_lo, n_hi] of exact Var(w_n).
SlopeComparison variance_slope(const ExactMoments& em, const Eigen::MatrixXd& sigma, int n_lo, int n_hi);

}  // namespace lace
