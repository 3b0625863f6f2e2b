#include "lace/expansion.hpp"

#include "lace/errors.hpp"
#include "lace/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <unordered_map>

namespace lace {

SignedField PiTable::marginal(int m) const {
  auto it = pi.find(m);
  return it == pi.end() ? SignedField(dim) : it->second;
}

double PiTable::abs_mass(int m) const {
  if (auto it = pi_xy.find(m); it != pi_xy.end()) return it->second.total_abs();
  if (auto it = pi.find(m); it != pi.end()) return it->second.total_abs();
  return 0.0;
}

PiTable PiTable::truncated(int cut) const {
  PiTable out;
  out.dim = dim;
  out.M = std::min(M, cut);
  out.D = D;
  for (const auto& [m, f] : pi)
    if (m <= cut) out.pi.emplace(m, f);
  for (const auto& [m, f] : pi_xy)
    if (m <= cut) out.pi_xy.emplace(m, f);
  for (const auto& [m, f] : pi_N)
    if (m <= cut) out.pi_N.emplace(m, f);
  return out;
}

PiTable pi_from_recurrence(const SignedField& D, const std::vector<SignedField>& c, int M) {
  if (M < 1) throw ConfigError("expansion order M must be >= 1");
  if (static_cast<int>(c.size()) < M + 1) throw ConfigError("two-point functions do not reach lag M");
  PiTable t;
  t.dim = D.dim();
  t.M = M;
  t.D = D;
  for (int m = 2; m <= M; ++m) {
    SignedField r = c[m] - convolve(D, c[m - 1]);
    for (int l = 2; l < m; ++l) r -= convolve(t.pi.at(l), c[m - l]);
    t.pi.emplace(m, std::move(r));
  }
  return t;
}

PiTable pi_from_recurrence(const ModelSpec& model, int M, const EnumerationOptions& opts) {
  return pi_from_recurrence(first_step_field(model), two_point_sequence(model, M, opts), M);
}

namespace {

using Acc = std::unordered_map<LatticePoint, double, LatticePointHash>;

struct DirectWalker {
  const ModelSpec& model;
  int M;
  int N_max;
  // acc[m][N] for this task
  std::vector<std::vector<Acc>>& acc;

  void subwalk(const std::vector<LatticePoint>& prev, int t, int N, double w) {
    PathHistory combined(model, prev);
    PathHistory inner(model, prev.back());
    walk(combined, inner, t, N, w);
  }

  void walk(PathHistory& combined, PathHistory& inner, int t, int N, double w) {
    const int ns = model.num_steps();
    std::vector<double> lc(ns), li(ns);
    step_law_into(model, combined, lc);
    step_law_into(model, inner, li);
    const LatticePoint x = inner.current();
    // The step that closes sub-walk N carries the delta factor.
    for (int s = 0; s < ns; ++s) {
      const double delta = lc[s] - li[s];
      if (delta == 0.0) continue;
      const LatticePoint y = x + model.steps[s];
      const double v = w * delta;
      acc[t + 1][N][x.join(y)] += v;
      if (N < N_max && t + 2 <= M) {
        std::vector<LatticePoint> next = inner.sites();
        next.push_back(y);
        subwalk(next, t + 1, N + 1, v);
      }
    }
    if (t + 2 > M) return;
    for (int s = 0; s < ns; ++s) {
      if (lc[s] == 0.0) continue;
      combined.push_step(s);
      inner.push_step(s);
      walk(combined, inner, t + 1, N, w * lc[s]);
      inner.pop();
      combined.pop();
    }
  }
};

}  // namespace

PiTable pi_direct(const ModelSpec& model, int M, int N_max, const DirectOptions& opts) {
  if (M > opts.cap)
    throw ResourceError("n-cap", "direct expansion lag " + std::to_string(M) + " exceeds the cap of " +
                                     std::to_string(opts.cap) + " (raise --n-cap)");
  if (M < 1) throw ConfigError("expansion order M must be >= 1");
  if (N_max <= 0) N_max = std::max(1, M - 1);
  const int d = model.dim;
  const StepLaw first = first_step_law(model);
  const int ns = model.num_steps();

  std::vector<std::vector<std::vector<Acc>>> parts(ns);
  parallel_for(ns, opts.threads, [&](std::size_t s) {
    parts[s].assign(M + 1, std::vector<Acc>(N_max + 1));
    if (first.prob[s] == 0.0 || M < 2) return;
    DirectWalker w{model, M, N_max, parts[s]};
    const LatticePoint o = LatticePoint::origin(d);
    w.subwalk({o, o + model.steps[s]}, 1, 1, first.prob[s]);
  });

  PiTable t;
  t.dim = d;
  t.M = M;
  t.D = first.as_field(LatticePoint::origin(d));
  for (int m = 2; m <= M; ++m) {
    SignedField total(2 * d);
    for (int N = 1; N <= std::min(N_max, m - 1); ++N) {
      SignedField::Map entries;
      for (const auto& part : parts)
        for (const auto& [xy, v] : part[m][N]) entries[xy] += v;
      SignedField slice(2 * d, std::move(entries));
      total += slice;
      t.pi_N[m].emplace(N, std::move(slice));
    }
    t.pi.emplace(m, total.pair_marginal());
    t.pi_xy.emplace(m, std::move(total));
  }
  return t;
}

std::vector<Eigen::VectorXd> k_grid(int dim, int points_per_axis, double half_width) {
  if (points_per_axis < 1) throw ConfigError("k-grid needs at least one point per axis");
  std::vector<double> axis;
  for (int i = 0; i < points_per_axis; ++i)
    axis.push_back(points_per_axis == 1 ? 0.0
                                        : -half_width + 2.0 * half_width * i / (points_per_axis - 1));
  std::vector<Eigen::VectorXd> out;
  std::vector<int> idx(dim, 0);
  bool has_zero = false;
  for (;;) {
    Eigen::VectorXd k(dim);
    for (int a = 0; a < dim; ++a) k[a] = axis[idx[a]];
    if (k.isZero(0.0)) has_zero = true;
    out.push_back(k);
    int a = 0;
    while (a < dim && ++idx[a] == points_per_axis) idx[a++] = 0;
    if (a == dim) break;
  }
  if (!has_zero) out.push_back(Eigen::VectorXd::Zero(dim));
  return out;
}

RecurrenceResidual verify_recurrence(const PiTable& pi, const std::vector<SignedField>& c, int n_max,
                                     const std::vector<Eigen::VectorXd>& grid) {
  if (static_cast<int>(c.size()) < n_max + 2) throw ConfigError("two-point functions do not reach n_max + 1");
  RecurrenceResidual r;
  for (int n = 0; n <= n_max; ++n) {
    SignedField res = c[n + 1] - convolve(pi.D, c[n]);
    for (int m = 2; m <= n + 1; ++m) res -= convolve(pi.marginal(m), c[n + 1 - m]);
    r.x_residual.push_back(res.max_abs());
  }

  std::vector<std::vector<double>> per_k(grid.size());
  parallel_for(grid.size(), 1, [&](std::size_t g) {
    const auto& k = grid[g];
    std::vector<std::complex<double>> ch(n_max + 2), ph(n_max + 2, 0.0);
    for (int j = 0; j <= n_max + 1; ++j) ch[j] = fourier_eval(c[j], k).value;
    for (int m = 2; m <= n_max + 1; ++m)
      if (pi.pi.count(m)) ph[m] = fourier_eval(pi.pi.at(m), k).value;
    const auto dh = fourier_eval(pi.D, k).value;
    per_k[g].resize(n_max + 1);
    for (int n = 0; n <= n_max; ++n) {
      std::complex<double> v = ch[n + 1] - dh * ch[n];
      for (int m = 2; m <= n + 1; ++m) v -= ph[m] * ch[n + 1 - m];
      per_k[g][n] = std::abs(v);
    }
  });
  r.k_residual.assign(n_max + 1, 0.0);
  for (const auto& row : per_k)
    for (int n = 0; n <= n_max; ++n) r.k_residual[n] = std::max(r.k_residual[n], row[n]);
  for (double v : r.x_residual) r.max_x = std::max(r.max_x, v);
  for (double v : r.k_residual) r.max_k = std::max(r.max_k, v);
  return r;
}

RecurrenceResidual verify_recurrence(const ModelSpec& model, const PiTable& pi, int n_max,
                                     const std::vector<Eigen::VectorXd>& grid, const EnumerationOptions& opts) {
  return verify_recurrence(pi, two_point_sequence(model, n_max + 1, opts), n_max, grid);
}

PiHat pi_hat(const PiTable& pi, int m, const Eigen::VectorXd& k) {
  const SignedField f = pi.marginal(m);
  const Moments mo = moments(f);
  PiHat h;
  h.value = fourier_eval(f, k).value;
  h.gradient = std::complex<double>(0.0, 1.0) * mo.first.cast<std::complex<double>>();
  h.hessian = -mo.second.cast<std::complex<double>>();
  return h;
}

BoundReport check_reduction_bounds(const PiTable& pairs, double L, int samples_per_m, std::uint64_t seed,
                                   double tol) {
  if (!pairs.has_pairs()) throw ConfigError("reduction bounds need pair coefficients from the direct expansion");
  const int d = pairs.dim;
  BoundReport rep;
  rep.samples_per_m = samples_per_m;
  for (const auto& [m, xy] : pairs.pi_xy) {
    BoundRow row;
    row.m = m;
    row.S = xy.total_abs();
    const PiHat h0 = pi_hat(pairs, m, Eigen::VectorXd::Zero(d));
    row.mass = std::abs(h0.value);
    row.row_sum = xy.pair_row_sums().max_abs();
    row.grad = h0.gradient.norm();
    row.grad_bound = std::sqrt(double(d)) * L * row.S;
    row.hess = h0.hessian.cwiseAbs().sum();
    row.hess_bound = (d * L) * (d * L) * (2 * m - 1) * row.S;
    row.holds = row.mass <= tol && row.row_sum <= tol && row.grad <= row.grad_bound + tol &&
                row.hess <= row.hess_bound + tol;

    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(m)));
    for (int i = 0; i < samples_per_m; ++i) {
      Eigen::VectorXd k(d);
      for (int a = 0; a < d; ++a) k[a] = std::numbers::pi * (2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0);
      const PiHat h = pi_hat(pairs, m, k);
      const double kn = k.norm();
      const Eigen::VectorXcd kc = k.cast<std::complex<double>>();
      const std::complex<double> lin = (kc.array() * h0.gradient.array()).sum();
      const std::complex<double> quad =
          0.5 * (kc.transpose() * h0.hessian * kc)(0, 0);
      const double lhs[3] = {std::abs(h.value), std::abs(h.value - lin), std::abs(h.value - lin - quad)};
      const double rhs[3] = {kn * L * row.S, kn * kn * m * L * L * row.S, kn * kn * kn * m * m * L * L * L * row.S};
      for (int b = 0; b < 3; ++b) {
        if (lhs[b] > rhs[b] + tol) row.holds = false;
        const double ratio = rhs[b] > 0 ? lhs[b] / rhs[b] : (lhs[b] > tol ? INFINITY : 0.0);
        row.worst_ratio[b] = std::max(row.worst_ratio[b], ratio);
      }
    }
    rep.holds = rep.holds && row.holds;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace lace
