#pragma once

#include "lace/expansion.hpp"
#include "lace/models.hpp"

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace lace {

// Largest admissible |k| for the LLN and CLT decompositions at walk length n.
double lln_radius(int n, double delta);
double clt_radius(int n, double delta);

// Rays for the small-k fits: +/-e_i and +/-(1,...,1)/sqrt(d).
std::vector<Eigen::VectorXd> default_directions(int dim);

struct InductionOptions {
  double delta = 0.25;
  int radii = 6;  // radius R * 2^-s for s = 0 .. radii-1
  std::vector<Eigen::VectorXd> directions;  // empty: default_directions
  double gradient_step = 1e-4;
};

struct KPoint {
  Eigen::VectorXd k;
  int direction = 0;
  int radius = 0;
};

// Table of one remainder family over j = 1..n_max and the k-points.
struct RemainderTable {
  std::string kind;  // "lln" or "clt"
  double radius = 0.0;
  std::vector<KPoint> points;
  std::vector<std::vector<std::complex<double>>> value;  // [j][point], j = 0 unused
  std::vector<int> flagged;                              // point indices with |ratio| < 1/2
  std::vector<double> min_exponent;                      // [j]: smallest fitted ray exponent
  std::vector<double> k2_coefficient;                    // [j]: |value|/|k|^2 at the smallest radius (max over rays)
};

struct InductionReport {
  int n_max = 0;
  double delta = 0.25;
  std::vector<Eigen::VectorXd> theta;  // [j]
  std::vector<Eigen::MatrixXd> sigma;  // [j]
  RemainderTable lln;
  RemainderTable clt;
  std::vector<double> e_at_zero;        // [j] |e_j(0)|
  std::vector<double> r_gradient;       // [j] max_i |numerical d r_j / d k_i (0)|
  double telescoping_error = 0.0;       // max |exp(sum_l (i k.theta_l + e_l)) - c_hat_j|
  double r_minus_e_error = 0.0;         // max |r_j - e_j - k^T Sigma_j k / 2|
  double min_exponent_e = 0.0;
  double min_exponent_r = 0.0;
};

// c must hold c_0..c_{n_max}; pi must reach lag n_max.
RemainderTable extract_lln_terms(const std::vector<SignedField>& c, const PiTable& pi, int n_max,
                                 const InductionOptions& opts = {});
RemainderTable extract_clt_terms(const std::vector<SignedField>& c, const PiTable& pi, int n_max,
                                 const InductionOptions& opts = {});
InductionReport induction_report(const std::vector<SignedField>& c, const PiTable& pi, int n_max,
                                 const InductionOptions& opts = {});

// Least-squares slope of log|v| against log|k| (v = 0 everywhere gives +inf).
double fit_exponent(const std::vector<double>& k_abs, const std::vector<double>& v_abs);

enum class DecayTemplate { Exponential, Power };

struct AuditOptions {
  double gamma = 0.1;
  int n_eval = 0;           // n for B_n, a_n, d_n, A_n, D_n, E_n; 0 means the table's M
  long horizon = 1000000;   // terms used for infinite sums
  double zero_tol = 1e-14;  // S_m at or below this is structurally zero
};

struct AuditReport {
  DecayTemplate shape = DecayTemplate::Exponential;
  std::string template_name;
  double power = 0.0;  // fixed exponent of the power template
  bool from_pairs = false;
  std::vector<int> m;
  std::vector<double> S;
  std::vector<int> used;  // lags entering the fit
  double epsilon = 0.0;
  double J = 0.0;         // exponential template only
  double r2 = 0.0;
  std::vector<double> residuals;  // log-space, per used lag
  // Assumption quantities for b_m = template(m); nullopt when divergent.
  std::optional<double> B, B_prime, B_star, E_n;
  int n_eval = 0;
  double B_n = 0.0, a_n = 0.0, d_n = 0.0, A_n = 0.0, D_n = 0.0;
  double gamma = 0.1;
};

// Template by model class: exponential (reinforced, base), (m+1)^{-(d-3)/2}
// (excited), (m+1)^{-(d1-2)/2} (environment).
AuditReport assumption_audit(const PiTable& pi, const ModelSpec& model, const AuditOptions& opts = {});

}  // namespace lace
