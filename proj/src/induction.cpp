#include "lace/induction.hpp"

#include "lace/errors.hpp"
#include "lace/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lace {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};

struct Context {
  const std::vector<SignedField>& c;
  std::vector<Eigen::VectorXd> theta;  // [j], j >= 1
  std::vector<Eigen::MatrixXd> sigma;

  Context(const std::vector<SignedField>& cs, const PiTable& pi, int n_max) : c(cs) {
    if (static_cast<int>(cs.size()) < n_max + 1) throw ConfigError("two-point functions do not reach n_max");
    if (pi.M < n_max) throw ConfigError("expansion table does not reach lag n_max");
    const SpeedSeries sp = speed_series(pi);
    theta.assign(n_max + 1, Eigen::VectorXd::Zero(pi.dim));
    sigma.assign(n_max + 1, Eigen::MatrixXd::Zero(pi.dim, pi.dim));
    for (int j = 1; j <= n_max; ++j) {
      theta[j] = sp.theta_n.at(j);
      sigma[j] = sigma_truncated(pi, theta[j], j);
    }
  }

  std::complex<double> ratio(int j, const Eigen::VectorXd& k) const {
    return fourier_eval(c[j], k).value / fourier_eval(c[j - 1], k).value;
  }
  std::complex<double> e(int j, const Eigen::VectorXd& k) const {
    return std::log(ratio(j, k)) - kI * k.dot(theta[j]);
  }
  std::complex<double> r(int j, const Eigen::VectorXd& k) const {
    return std::log(ratio(j, k)) - kI * k.dot(theta[j]) + 0.5 * k.dot(sigma[j] * k);
  }
};

RemainderTable build_table(const Context& ctx, bool clt, int n_max, const InductionOptions& opts, int dim) {
  RemainderTable t;
  t.kind = clt ? "clt" : "lln";
  t.radius = clt ? clt_radius(n_max, opts.delta) : lln_radius(n_max, opts.delta);
  const auto dirs = opts.directions.empty() ? default_directions(dim) : opts.directions;
  for (int di = 0; di < static_cast<int>(dirs.size()); ++di)
    for (int s = 0; s < opts.radii; ++s)
      t.points.push_back({dirs[di].normalized() * t.radius * std::ldexp(1.0, -s), di, s});

  const std::size_t P = t.points.size();
  t.value.assign(n_max + 1, std::vector<std::complex<double>>(P));
  std::vector<bool> bad(P, false);
  for (int j = 1; j <= n_max; ++j)
    for (std::size_t p = 0; p < P; ++p) {
      const auto& k = t.points[p].k;
      if (std::abs(ctx.ratio(j, k)) < 0.5) bad[p] = true;
      t.value[j][p] = clt ? ctx.r(j, k) : ctx.e(j, k);
    }
  for (std::size_t p = 0; p < P; ++p)
    if (bad[p]) t.flagged.push_back(static_cast<int>(p));

  t.min_exponent.assign(n_max + 1, std::numeric_limits<double>::infinity());
  t.k2_coefficient.assign(n_max + 1, 0.0);
  for (int j = 1; j <= n_max; ++j) {
    for (int di = 0; di < static_cast<int>(dirs.size()); ++di) {
      std::vector<double> ks, vs;
      double smallest = std::numeric_limits<double>::infinity(), coeff = 0.0;
      for (std::size_t p = 0; p < P; ++p) {
        if (t.points[p].direction != di || bad[p]) continue;
        const double kn = t.points[p].k.norm();
        ks.push_back(kn);
        vs.push_back(std::abs(t.value[j][p]));
        if (kn < smallest) {
          smallest = kn;
          coeff = std::abs(t.value[j][p]) / (kn * kn);
        }
      }
      if (ks.size() >= 2) t.min_exponent[j] = std::min(t.min_exponent[j], fit_exponent(ks, vs));
      t.k2_coefficient[j] = std::max(t.k2_coefficient[j], coeff);
    }
  }
  return t;
}

}  // namespace

double lln_radius(int n, double delta) { return delta * std::log(std::max(n, 3)) / n; }
double clt_radius(int n, double delta) { return std::sqrt(delta * std::log(std::max(n, 3)) / n); }

std::vector<Eigen::VectorXd> default_directions(int dim) {
  std::vector<Eigen::VectorXd> out;
  for (int a = 0; a < dim; ++a)
    for (int s : {+1, -1}) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
      v[a] = s;
      out.push_back(v);
    }
  if (dim > 1)
    for (int s : {+1, -1}) out.push_back(Eigen::VectorXd::Constant(dim, s / std::sqrt(double(dim))));
  return out;
}

double fit_exponent(const std::vector<double>& k_abs, const std::vector<double>& v_abs) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < k_abs.size(); ++i)
    if (v_abs[i] > 0.0 && k_abs[i] > 0.0) {
      x.push_back(std::log(k_abs[i]));
      y.push_back(std::log(v_abs[i]));
    }
  if (x.size() < 2) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

RemainderTable extract_lln_terms(const std::vector<SignedField>& c, const PiTable& pi, int n_max,
                                 const InductionOptions& opts) {
  return build_table(Context(c, pi, n_max), false, n_max, opts, pi.dim);
}

RemainderTable extract_clt_terms(const std::vector<SignedField>& c, const PiTable& pi, int n_max,
                                 const InductionOptions& opts) {
  return build_table(Context(c, pi, n_max), true, n_max, opts, pi.dim);
}

InductionReport induction_report(const std::vector<SignedField>& c, const PiTable& pi, int n_max,
                                 const InductionOptions& opts) {
  const Context ctx(c, pi, n_max);
  const int d = pi.dim;
  InductionReport rep;
  rep.n_max = n_max;
  rep.delta = opts.delta;
  rep.theta = ctx.theta;
  rep.sigma = ctx.sigma;
  rep.lln = build_table(ctx, false, n_max, opts, d);
  rep.clt = build_table(ctx, true, n_max, opts, d);

  rep.e_at_zero.assign(n_max + 1, 0.0);
  rep.r_gradient.assign(n_max + 1, 0.0);
  const double h = opts.gradient_step;
  for (int j = 1; j <= n_max; ++j) {
    rep.e_at_zero[j] = std::abs(ctx.e(j, Eigen::VectorXd::Zero(d)));
    for (int a = 0; a < d; ++a) {
      Eigen::VectorXd k = Eigen::VectorXd::Zero(d);
      k[a] = h;
      const std::complex<double> g = (ctx.r(j, k) - ctx.r(j, -k)) / (2 * h);
      rep.r_gradient[j] = std::max(rep.r_gradient[j], std::abs(g));
    }
  }

  for (const auto& pt : rep.lln.points) {
    std::complex<double> acc = 0.0;
    for (int j = 1; j <= n_max; ++j) {
      acc += kI * pt.k.dot(ctx.theta[j]) + ctx.e(j, pt.k);
      rep.telescoping_error = std::max(rep.telescoping_error, std::abs(std::exp(acc) - fourier_eval(c[j], pt.k).value));
    }
  }
  for (const auto& pt : rep.clt.points)
    for (int j = 1; j <= n_max; ++j) {
      const auto diff = ctx.r(j, pt.k) - ctx.e(j, pt.k) - 0.5 * pt.k.dot(ctx.sigma[j] * pt.k);
      rep.r_minus_e_error = std::max(rep.r_minus_e_error, std::abs(diff));
    }

  rep.min_exponent_e = rep.min_exponent_r = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= n_max; ++j) {
    rep.min_exponent_e = std::min(rep.min_exponent_e, rep.lln.min_exponent[j]);
    rep.min_exponent_r = std::min(rep.min_exponent_r, rep.clt.min_exponent[j]);
  }
  return rep;
}

AuditReport assumption_audit(const PiTable& pi, const ModelSpec& model, const AuditOptions& opts) {
  AuditReport a;
  a.gamma = opts.gamma;
  a.from_pairs = pi.has_pairs();
  switch (model.kind()) {
    case ModelKind::Excited:
      a.shape = DecayTemplate::Power;
      a.power = (model.dim - 3) / 2.0;
      a.template_name = "(m+1)^-(d-3)/2";
      break;
    case ModelKind::Environment:
      a.shape = DecayTemplate::Power;
      a.power = (std::get<RandomEnvironmentWalk>(model.params).d1 - 2) / 2.0;
      a.template_name = "(m+1)^-(d1-2)/2";
      break;
    default:
      a.shape = DecayTemplate::Exponential;
      a.template_name = "exp(-J m)";
      break;
  }

  for (int m = 2; m <= pi.M; ++m) {
    a.m.push_back(m);
    a.S.push_back(pi.abs_mass(m));
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < a.m.size(); ++i)
    if (a.S[i] > opts.zero_tol) {
      a.used.push_back(a.m[i]);
      x.push_back(a.m[i]);
      y.push_back(std::log(a.S[i]));
    }

  // b_m normalized to b_1 = 1.
  auto b = [&](double m) {
    return a.shape == DecayTemplate::Exponential ? std::exp(-a.J * (m - 1)) : std::pow((m + 1) / 2.0, -a.power);
  };

  if (a.used.empty()) {
    a.epsilon = 0.0;
    a.r2 = 1.0;
  } else {
    if (a.used.size() < 3)
      throw InsufficientDataError("decay fit needs at least 3 lags with nonzero S_m, got " +
                                  std::to_string(a.used.size()));
    const double n = static_cast<double>(x.size());
    double my = 0;
    for (double v : y) my += v;
    my /= n;
    std::vector<double> fitted(x.size());
    if (a.shape == DecayTemplate::Exponential) {
      double mx = 0;
      for (double v : x) mx += v;
      mx /= n;
      double sxy = 0, sxx = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
      }
      const double slope = sxy / sxx;
      a.J = -slope;
      const double intercept = my - slope * mx;  // log S at m = 0
      a.epsilon = std::exp(intercept + slope);   // value at m = 1
      for (std::size_t i = 0; i < x.size(); ++i) fitted[i] = intercept + slope * x[i];
    } else {
      double shift = 0;
      for (std::size_t i = 0; i < x.size(); ++i) shift += y[i] - std::log(b(x[i]));
      shift /= n;
      a.epsilon = std::exp(shift);
      for (std::size_t i = 0; i < x.size(); ++i) fitted[i] = shift + std::log(b(x[i]));
    }
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      a.residuals.push_back(y[i] - fitted[i]);
      ss_res += (y[i] - fitted[i]) * (y[i] - fitted[i]);
      ss_tot += (y[i] - my) * (y[i] - my);
    }
    a.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  }

  const bool exp_decays = a.shape == DecayTemplate::Exponential && a.J > 0;
  const bool sum_b = exp_decays || (a.shape == DecayTemplate::Power && a.power > 1);
  const bool sum_mb = exp_decays || (a.shape == DecayTemplate::Power && a.power > 2);
  double B = 0, Bstar = 0, Bprime = 0, partial_mb = 0;
  for (long m = 1; m <= opts.horizon; ++m) {
    const double bm = b(double(m));
    B += bm;
    Bstar += m * bm;
    partial_mb += m * bm;
    const double lg = std::log(std::max<double>(m, 3));
    Bprime = std::max(Bprime, lg * lg / m * partial_mb);
  }
  if (sum_b) {
    a.B = B;
    a.B_prime = Bprime;
  }
  if (sum_mb) a.B_star = Bstar;

  a.n_eval = opts.n_eval > 0 ? opts.n_eval : pi.M;
  const int N = a.n_eval;
  auto d_of = [&](int n) {
    double s = 0;
    for (int m = 2; m <= n; ++m) {
      double inner = 0;
      for (int l = n + 1 - m; l <= n; ++l) inner += b(l + 1);
      s += m * b(m) * inner;
    }
    return s;
  };
  auto a_of = [&](int n) {
    double s = 0;
    for (int m = 1; m <= n; ++m) s += std::pow(double(m), 2 + a.gamma) * b(m);
    return s;
  };
  for (int m = 1; m <= N; ++m) a.B_n += m * b(m);
  a.a_n = a_of(N);
  a.d_n = d_of(N);
  for (int j = 1; j <= N; ++j) {
    a.A_n += a_of(j);
    a.D_n += d_of(j);
  }
  if (sum_mb) {
    double E = 0;
    for (long m = 1; m <= opts.horizon; ++m) E += std::min<long>(m, N) * m * b(double(m));
    a.E_n = E;
  }
  return a;
}

}  // namespace lace
