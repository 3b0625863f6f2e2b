#pragma once

#include "lace/enumeration.hpp"
#include "lace/lattice.hpp"
#include "lace/models.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <map>
#include <vector>

namespace lace {

// Expansion coefficients for lags 2..M. Pair fields pi(x, y) live on Z^{2d}
// with coordinates (x, y); they exist only for directly computed tables.
struct PiTable {
  int dim = 1;
  int M = 1;
  SignedField D{1};                                  // first-step law
  std::map<int, SignedField> pi;                     // m -> pi_m(y)
  std::map<int, SignedField> pi_xy;                  // m -> pi_m(x, y)
  std::map<int, std::map<int, SignedField>> pi_N;    // m -> N -> pi_m^{(N)}(x, y)

  bool has_pairs() const { return !pi_xy.empty(); }
  // pi_m(y); the zero field when m is outside the table.
  SignedField marginal(int m) const;
  // sum_{x,y} |pi_m(x, y)|, falling back to sum_y |pi_m(y)| without pairs.
  double abs_mass(int m) const;
  // Copy restricted to lags <= M.
  PiTable truncated(int M) const;
};

// Inverts the expansion recurrence from exact two-point functions c_0..c_M.
PiTable pi_from_recurrence(const SignedField& D, const std::vector<SignedField>& c, int M);
PiTable pi_from_recurrence(const ModelSpec& model, int M, const EnumerationOptions& opts = {});

struct DirectOptions {
  int cap = 6;      // largest lag accepted without raising it explicitly
  int threads = 0;
};

// Nested sub-walk sums with delta factors, for every lag 2..M and every
// number of sub-walks N <= N_max (N_max <= 0 means all).
PiTable pi_direct(const ModelSpec& model, int M, int N_max = 0, const DirectOptions& opts = {});

// k-grid: points_per_axis points per axis on [-half_width, half_width]^d.
std::vector<Eigen::VectorXd> k_grid(int dim, int points_per_axis = 11, double half_width = 1.5707963267948966);

struct RecurrenceResidual {
  std::vector<double> x_residual;  // index n: residual of the step n -> n+1
  std::vector<double> k_residual;
  double max_x = 0.0;
  double max_k = 0.0;
};

RecurrenceResidual verify_recurrence(const PiTable& pi, const std::vector<SignedField>& c, int n_max,
                                     const std::vector<Eigen::VectorXd>& grid);
RecurrenceResidual verify_recurrence(const ModelSpec& model, const PiTable& pi, int n_max,
                                     const std::vector<Eigen::VectorXd>& grid, const EnumerationOptions& opts = {});

struct PiHat {
  std::complex<double> value;
  Eigen::VectorXcd gradient;  // at k = 0
  Eigen::MatrixXcd hessian;   // at k = 0
};

PiHat pi_hat(const PiTable& pi, int m, const Eigen::VectorXd& k);

// Reduction-bound suite with S_m from pair fields.
struct BoundRow {
  int m = 0;
  double S = 0.0;
  double mass = 0.0;          // |pi_hat(0)|
  double row_sum = 0.0;       // max_x |sum_y pi(x, y)|
  double grad = 0.0, grad_bound = 0.0;
  double hess = 0.0, hess_bound = 0.0;  // L1 matrix norm
  double worst_ratio[3] = {0.0, 0.0, 0.0};  // max lhs/rhs of the three k-dependent bounds
  bool holds = true;
};

struct BoundReport {
  std::vector<BoundRow> rows;
  int samples_per_m = 0;
  bool holds = true;
};

BoundReport check_reduction_bounds(const PiTable& pairs, double L, int samples_per_m, std::uint64_t seed,
                                   double tol = 1e-10);

}  // namespace lace
