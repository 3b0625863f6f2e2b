#include "lace/report.hpp"

#include "lace/enumeration.hpp"
#include "lace/errors.hpp"
#include "lace/expansion.hpp"
#include "lace/induction.hpp"
#include "lace/observables.hpp"
#include "lace/parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace lace {

using nlohmann::json;

namespace {

json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json complex_json(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

json field_map(const std::map<int, SignedField>& m) {
  json j = json::object();
  for (const auto& [key, f] : m) j[std::to_string(key)] = f.to_json();
  return j;
}

json header(const std::string& kind, const ModelSpec& model) {
  json j;
  j["report"] = kind;
  j["schema_version"] = kReportSchemaVersion;
  j["model"] = model_to_json(model);
  j["config_hash"] = config_hash(model);
  return j;
}

void finish(json& j, const CheckList& checks) {
  j["checks"] = checks.to_json();
  j["pass"] = checks.pass();
}

EnumerationOptions enum_opts(const RunContext& ctx) { return {ctx.budget, ctx.threads}; }

json tags_for(std::initializer_list<const char*> keys) {
  static const std::map<std::string, std::string> all = {
      {"c", "two-point function: law of the position after n steps"},
      {"D", "first-step law"},
      {"pi", "expansion coefficient pi_m(y): marginal correction at lag m"},
      {"pi_xy", "expansion coefficient pi_m(x, y): pair form, x the site before the last step"},
      {"pi_N", "N-loop contribution to pi_m(x, y)"},
      {"residual", "recurrence residual c_{n+1} - D*c_n - sum_m pi_m*c_{n+1-m}, x-space and Fourier"},
      {"theta", "speed: theta_null + sum_m a_m with a_m = sum_y y pi_m(y)"},
      {"sigma", "asymptotic covariance: moment series evaluated with theta_M"},
      {"speed_identity", "mean increment E[w_{n+1} - w_n] = theta_null + sum_{m<=n+1} a_m"},
      {"covariance_identity", "covariance increment C_{n+1} - C_n from one-step and expansion moments"},
      {"slope", "least-squares slope of exact Var(w_n) against the truncated covariance"},
      {"bounds", "reduction bounds on pi_hat_m in terms of S_m"},
      {"delta_bound", "|Delta| <= C beta 1{endpoint in the prior footprint}"},
      {"S", "S_m = sum_{x,y} |pi_m(x, y)|"},
      {"decay", "decay template fit of S_m and the assumption sums built from it"},
      {"e", "LLN remainder e_j(k) from consecutive characteristic-function ratios"},
      {"r", "CLT remainder r_j(k) from consecutive characteristic-function ratios"},
      {"mc", "simulated endpoint statistics against theta_M and Sigma_M"},
      {"cf", "characteristic function of (w_n - n theta)/sqrt(n) against exp(-k.Sigma k/2)"},
  };
  json j = json::object();
  for (const char* k : keys) j[k] = all.at(k);
  return j;
}

}  // namespace

std::string dump_report(const json& report) { return report.dump(2) + "\n"; }

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ModelSpec& model) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(model_to_json(model).dump())));
  return buf;
}

json vector_json(const Eigen::VectorXd& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(number(v[i]));
  return j;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json j = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(vector_json(m.row(r).transpose()));
  return j;
}

void CheckList::le(const std::string& name, double value, double tolerance) {
  const bool ok = value <= tolerance;
  items_.push_back({{"name", name}, {"value", number(value)}, {"tolerance", tolerance}, {"relation", "<="}, {"pass", ok}});
  pass_ = pass_ && ok;
}

void CheckList::ge(const std::string& name, double value, double threshold) {
  const bool ok = value >= threshold;
  items_.push_back({{"name", name}, {"value", number(value)}, {"tolerance", threshold}, {"relation", ">="}, {"pass", ok}});
  pass_ = pass_ && ok;
}

void CheckList::flag(const std::string& name, bool ok, const std::string& detail) {
  nlohmann::json item = {{"name", name}, {"pass", ok}};
  if (!detail.empty()) item["detail"] = detail;
  items_.push_back(item);
  pass_ = pass_ && ok;
}

int default_identity_range(int dim) { return dim == 1 ? 8 : 6; }
int default_verify_range(int dim) { return dim == 1 ? 10 : 8; }
int default_direct_lag(int dim) { return dim == 1 ? 6 : 5; }

json enumerate_report(const ModelSpec& model, int n, const RunContext& ctx) {
  auto c = two_point_sequence(model, n, enum_opts(ctx));
  auto em = exact_moments(c);
  json j = header("enumerate", model);
  j["parameters"] = {{"n", n}};
  j["tags"] = tags_for({"c"});
  json cj = json::object();
  json mean = json::array(), cov = json::array();
  for (int k = 0; k <= n; ++k) {
    cj[std::to_string(k)] = c[k].to_json();
    mean.push_back(vector_json(em.mean[k]));
    cov.push_back(matrix_json(em.covariance[k]));
  }
  j["c"] = cj;
  j["mean"] = mean;
  j["covariance"] = cov;
  return j;
}

json pi_report(const ModelSpec& model, int m_max, bool direct, int n_cap, const RunContext& ctx) {
  PiTable pi = direct ? pi_direct(model, m_max, 0, DirectOptions{n_cap, ctx.threads})
                      : pi_from_recurrence(model, m_max, enum_opts(ctx));
  json j = header("pi", model);
  j["parameters"] = {{"m_max", m_max}, {"method", direct ? "direct" : "recurrence"}};
  j["tags"] = direct ? tags_for({"D", "pi", "pi_xy", "pi_N", "S"}) : tags_for({"D", "pi"});
  j["M"] = pi.M;
  j["D"] = pi.D.to_json();
  j["pi"] = field_map(pi.pi);
  CheckList checks;
  double mass = 0.0;
  for (const auto& [m, f] : pi.pi) mass = std::max(mass, std::abs(moments(f).mass));
  checks.le("max_m |pi_hat_m(0)|", mass, 1e-10);
  if (direct) {
    j["pi_xy"] = field_map(pi.pi_xy);
    json slices = json::object();
    for (const auto& [m, byN] : pi.pi_N) slices[std::to_string(m)] = field_map(byN);
    j["pi_N"] = slices;
    json S = json::object();
    double row = 0.0;
    for (const auto& [m, f] : pi.pi_xy) {
      S[std::to_string(m)] = pi.abs_mass(m);
      row = std::max(row, f.pair_row_sums().max_abs());
    }
    j["S"] = S;
    checks.le("max_{m,x} |sum_y pi_m(x, y)|", row, 1e-10);
  }
  finish(j, checks);
  return j;
}

json verify_report(const ModelSpec& model, int n, int k_points, const RunContext& ctx) {
  const auto opts = enum_opts(ctx);
  auto c = two_point_sequence(model, n + 1, opts);
  PiTable rec = pi_from_recurrence(first_step_field(model), c, n + 1);
  auto grid = k_grid(model.dim, k_points);
  auto r_rec = verify_recurrence(rec, c, n, grid);

  // Independent check: coefficients from the nested sub-walk sums.
  const int m_dir = std::min(n + 1, default_direct_lag(model.dim));
  PiTable dir = pi_direct(model, m_dir, 0, DirectOptions{6, ctx.threads});
  auto r_dir = verify_recurrence(dir, c, m_dir - 1, grid);
  double diff = 0.0;
  for (int m = 2; m <= m_dir; ++m) diff = std::max(diff, max_abs_difference(dir.marginal(m), rec.marginal(m)));

  json j = header("verify", model);
  j["parameters"] = {{"n", n}, {"k_points_per_axis", k_points}, {"grid_size", grid.size()}, {"direct_lag", m_dir}};
  j["tags"] = tags_for({"residual", "pi"});
  auto res_json = [](const RecurrenceResidual& r) {
    return json{{"x_residual", r.x_residual}, {"k_residual", r.k_residual}, {"max_x", r.max_x}, {"max_k", r.max_k}};
  };
  j["recurrence"] = res_json(r_rec);
  j["direct"] = res_json(r_dir);
  j["direct_vs_recurrence"] = diff;
  CheckList checks;
  checks.le("recurrence coefficients: x-space residual", r_rec.max_x, 1e-10);
  checks.le("recurrence coefficients: Fourier residual", r_rec.max_k, 1e-10);
  checks.le("direct coefficients: x-space residual", r_dir.max_x, 1e-10);
  checks.le("direct coefficients: Fourier residual", r_dir.max_k, 1e-10);
  checks.le("direct vs recurrence marginals", diff, 1e-10);
  finish(j, checks);
  return j;
}

json speed_report(const ModelSpec& model, int m_max, int n_max, const RunContext& ctx) {
  const auto opts = enum_opts(ctx);
  const int depth = std::max(m_max, n_max + 1);
  auto c = two_point_sequence(model, depth, opts);
  PiTable pi = pi_from_recurrence(first_step_field(model), c, depth);
  auto em = exact_moments(c);
  auto series = speed_series(pi);
  auto id = speed_identity_check(pi, em, n_max);

  json j = header("speed", model);
  j["parameters"] = {{"m_max", m_max}, {"n_max", n_max}};
  j["tags"] = tags_for({"theta", "speed_identity"});
  j["theta_null"] = vector_json(series.theta_null);
  json a = json::object(), th = json::object(), inc = json::object();
  for (const auto& [m, v] : series.a) a[std::to_string(m)] = vector_json(v);
  for (const auto& [m, v] : series.theta_n) th[std::to_string(m)] = vector_json(v);
  for (int k = 0; k < depth; ++k) inc[std::to_string(k)] = vector_json(em.mean[k + 1] - em.mean[k]);
  j["a"] = a;
  j["theta_n"] = th;
  j["theta"] = vector_json(theta_truncated(pi, m_max));
  j["mean_increment"] = inc;
  j["identity_residual"] = id.per_n;
  CheckList checks;
  checks.le("speed identity residual", id.max, 1e-10);
  finish(j, checks);
  return j;
}

json variance_report(const ModelSpec& model, int m_max, int n_max, const RunContext& ctx) {
  const auto opts = enum_opts(ctx);
  const int depth = std::max(m_max, n_max + 1);
  auto c = two_point_sequence(model, depth, opts);
  PiTable pi = pi_from_recurrence(first_step_field(model), c, depth);
  auto em = exact_moments(c);
  auto series = variance_series(pi);
  auto id = covariance_increment_check(pi, em, n_max);
  const Eigen::VectorXd theta = theta_truncated(pi, m_max);
  const Eigen::MatrixXd sigma = sigma_truncated(pi, theta, m_max);
  const Eigen::MatrixXd sigma_f = sigma_truncated_fourier(pi, theta, m_max);
  const int lo = std::max(1, depth - 4);  // largest five n
  auto slope = variance_slope(em, sigma, lo, depth);

  json j = header("variance", model);
  j["parameters"] = {{"m_max", m_max}, {"n_max", n_max}, {"slope_window", {lo, depth}}};
  j["tags"] = tags_for({"sigma", "covariance_identity", "slope"});
  json sn = json::object(), cov = json::object();
  for (const auto& [m, s] : series.sigma_n) sn[std::to_string(m)] = matrix_json(s);
  for (int k = 0; k <= depth; ++k) cov[std::to_string(k)] = matrix_json(em.covariance[k]);
  j["sigma_n"] = sn;
  j["sigma"] = matrix_json(sigma);
  j["sigma_fourier"] = matrix_json(sigma_f);
  j["exact_covariance"] = cov;
  j["identity_residual"] = id.per_n;
  j["slope"] = {{"slope", matrix_json(slope.slope)}, {"discrepancy", slope.discrepancy}, {"bound", slope.bound}};
  CheckList checks;
  checks.le("covariance increment identity residual", id.max, 1e-10);
  checks.le("moment vs Fourier covariance form", (sigma - sigma_f).cwiseAbs().maxCoeff(), 1e-10);
  checks.le("variance slope vs truncated covariance", slope.discrepancy, slope.bound + 1e-12);
  finish(j, checks);
  return j;
}

json induction_json(const ModelSpec& model, int n, double delta, const RunContext& ctx) {
  auto c = two_point_sequence(model, n, enum_opts(ctx));
  PiTable pi = pi_from_recurrence(first_step_field(model), c, n);
  InductionOptions io;
  io.delta = delta;
  auto rep = induction_report(c, pi, n, io);

  json j = header("induction", model);
  j["parameters"] = {{"n", n}, {"delta", delta}, {"radii", io.radii}, {"gradient_step", io.gradient_step}};
  j["tags"] = tags_for({"e", "r", "theta", "sigma"});
  auto table = [](const RemainderTable& t) {
    json pts = json::array();
    for (const auto& p : t.points) pts.push_back({{"k", vector_json(p.k)}, {"direction", p.direction}, {"radius", p.radius}});
    json vals = json::array();
    for (std::size_t jj = 1; jj < t.value.size(); ++jj) {
      json row = json::array();
      for (auto z : t.value[jj]) row.push_back(complex_json(z));
      vals.push_back(row);
    }
    json expo = json::array(), k2 = json::array();
    for (std::size_t jj = 1; jj < t.min_exponent.size(); ++jj) {
      expo.push_back(number(t.min_exponent[jj]));
      k2.push_back(number(t.k2_coefficient[jj]));
    }
    return json{{"kind", t.kind},          {"radius", t.radius},      {"points", pts},
                {"value", vals},           {"flagged", t.flagged},    {"min_exponent", expo},
                {"k2_coefficient", k2}};
  };
  j["lln"] = table(rep.lln);
  j["clt"] = table(rep.clt);
  json theta = json::array(), sigma = json::array();
  for (int jj = 1; jj <= n; ++jj) {
    theta.push_back(vector_json(rep.theta[jj]));
    sigma.push_back(matrix_json(rep.sigma[jj]));
  }
  j["theta_j"] = theta;
  j["sigma_j"] = sigma;
  j["e_at_zero"] = std::vector<double>(rep.e_at_zero.begin() + 1, rep.e_at_zero.end());
  j["r_gradient"] = std::vector<double>(rep.r_gradient.begin() + 1, rep.r_gradient.end());
  j["telescoping_error"] = rep.telescoping_error;
  j["r_minus_e_error"] = rep.r_minus_e_error;

  CheckList checks;
  checks.le("max_j |e_j(0)|", *std::max_element(rep.e_at_zero.begin() + 1, rep.e_at_zero.end()), 1e-12);
  checks.le("max_j |grad r_j(0)|", *std::max_element(rep.r_gradient.begin() + 1, rep.r_gradient.end()), 1e-6);
  checks.ge("min small-k exponent of e_j", rep.min_exponent_e, 2.0 - kExponentSlack);
  checks.ge("min small-k exponent of r_j", rep.min_exponent_r, 2.0 - kExponentSlack);
  checks.le("telescoping product vs c_hat_j", rep.telescoping_error, 1e-10);
  finish(j, checks);
  return j;
}

json mc_report(const ModelSpec& model, const McConfig& config, int m_max, int m_ext, const RunContext& ctx,
               McEstimate* estimate_out) {
  m_ext = std::max(m_ext, m_max);
  PiTable pi = pi_from_recurrence(model, m_ext, enum_opts(ctx));
  auto series = speed_series(pi);
  const Eigen::VectorXd theta = theta_truncated(pi, m_max);
  const Eigen::MatrixXd sigma = sigma_truncated(pi, theta, m_max);
  const Eigen::VectorXd theta_ext = theta_truncated(pi, m_ext);
  const Eigen::MatrixXd sigma_ext = sigma_truncated(pi, theta_ext, m_ext);
  double theta_res = 0.0;
  for (int m = m_max + 1; m <= m_ext; ++m) theta_res += series.a.at(m).norm();
  const double sigma_res = (sigma_ext - sigma).cwiseAbs().maxCoeff();

  McConfig cfg = config;
  if (cfg.k_set.empty()) cfg.k_set = default_k_set(model.dim);
  if (ctx.threads > 0) cfg.threads = ctx.threads;
  McEstimate est = estimate(model, cfg);
  auto clt = clt_diagnostic(est, theta, sigma, theta_res, sigma_res);

  const double n = cfg.n;
  const int d = model.dim;
  json j = header("mc", model);
  j["parameters"] = {{"n", cfg.n},         {"samples", cfg.samples}, {"seed", cfg.seed},
                     {"batches", cfg.batches}, {"m_max", m_max},   {"m_ext", m_ext}};
  j["tags"] = tags_for({"mc", "theta", "sigma", "cf"});
  j["theta"] = vector_json(theta);
  j["sigma"] = matrix_json(sigma);
  j["theta_ext"] = vector_json(theta_ext);
  j["sigma_ext"] = matrix_json(sigma_ext);
  j["truncation_residual"] = {{"theta", theta_res}, {"sigma", sigma_res}};
  j["mean_over_n"] = vector_json(est.mean / n);
  j["mean_over_n_se"] = vector_json(est.mean_se / n);
  j["covariance_over_n"] = matrix_json(est.covariance / n);
  j["covariance_over_n_se"] = matrix_json(est.covariance_se / n);
  j["skewness"] = vector_json(est.skewness);
  j["excess_kurtosis"] = vector_json(est.excess_kurtosis);
  json rows = json::array();
  for (const auto& r : clt.rows) {
    rows.push_back({{"k", vector_json(r.k)},
                    {"empirical", complex_json(r.empirical)},
                    {"target", r.target},
                    {"discrepancy", r.discrepancy},
                    {"se", r.se},
                    {"truncation", r.truncation},
                    {"band", r.band},
                    {"skipped", r.skipped},
                    {"pass", r.passes}});
  }
  j["cf"] = rows;
  auto notes = clt.notes;
  if (model.kind() == ModelKind::Environment)
    notes.push_back("diagnostic only: the identities hold in any dimension, the limit theorem needs many fair coordinates");
  j["notes"] = notes;

  CheckList checks;
  for (int i = 0; i < d; ++i) {
    const double dev = std::abs(est.mean[i] / n - theta[i]);
    const double band = 3.0 * est.mean_se[i] / n + theta_res;
    checks.le("mean/n - theta_M, coordinate " + std::to_string(i + 1) + " (band " + std::to_string(band) + ")",
              dev - band, 0.0);
  }
  for (int a = 0; a < d; ++a) {
    for (int b = a; b < d; ++b) {
      const double dev = std::abs(est.covariance(a, b) / n - sigma(a, b));
      const double band = 3.0 * est.covariance_se(a, b) / n + sigma_res;
      checks.le("cov/n - Sigma_M, entry (" + std::to_string(a + 1) + "," + std::to_string(b + 1) + ") (band " +
                    std::to_string(band) + ")",
                dev - band, 0.0);
    }
  }
  checks.flag("characteristic-function diagnostic", clt.passes);
  finish(j, checks);
  if (estimate_out) *estimate_out = std::move(est);
  return j;
}

json suite_report(const ModelSpec& model, const RunContext& ctx) {
  const auto opts = enum_opts(ctx);
  const int n_ver = default_verify_range(model.dim);
  const int n_id = default_identity_range(model.dim);
  const int m_dir = default_direct_lag(model.dim);

  auto c = two_point_sequence(model, n_ver + 1, opts);
  PiTable rec = pi_from_recurrence(first_step_field(model), c, n_ver + 1);
  PiTable dir = pi_direct(model, m_dir, 0, DirectOptions{6, ctx.threads});
  auto em = exact_moments(c);
  auto grid = k_grid(model.dim);

  CheckList checks;
  json j = header("all", model);
  j["parameters"] = {{"verify_range", n_ver}, {"identity_range", n_id}, {"direct_lag", m_dir}};
  j["tags"] = tags_for({"pi", "pi_xy", "residual", "speed_identity", "covariance_identity", "bounds",
                        "delta_bound", "S", "decay", "theta", "sigma"});

  double diff = 0.0;
  for (int m = 2; m <= m_dir; ++m) diff = std::max(diff, max_abs_difference(dir.marginal(m), rec.marginal(m)));
  checks.le("direct vs recurrence marginals", diff, 1e-10);

  auto r_rec = verify_recurrence(rec, c, n_ver, grid);
  auto r_dir = verify_recurrence(dir, c, m_dir - 1, grid);
  checks.le("recurrence residual, x-space", r_rec.max_x, 1e-10);
  checks.le("recurrence residual, Fourier", r_rec.max_k, 1e-10);
  checks.le("direct-coefficient residual, x-space", r_dir.max_x, 1e-10);
  checks.le("direct-coefficient residual, Fourier", r_dir.max_k, 1e-10);

  double mass = 0.0, row = 0.0;
  for (const auto& [m, f] : rec.pi) mass = std::max(mass, std::abs(moments(f).mass));
  for (const auto& [m, f] : dir.pi_xy) row = std::max(row, f.pair_row_sums().max_abs());
  checks.le("max_m |pi_hat_m(0)|", mass, 1e-10);
  checks.le("max_{m,x} |sum_y pi_m(x, y)|", row, 1e-10);
  if (model.kind() == ModelKind::Excited) checks.le("max |pi_2|", rec.marginal(2).max_abs(), 1e-10);
  if (interaction_strength(model) == 0.0) {
    double any = 0.0;
    for (const auto& [m, f] : rec.pi) any = std::max(any, f.max_abs());
    checks.le("max_m |pi_m| without interaction", any, 1e-10);
  }

  auto speed = speed_identity_check(rec, em, n_id);
  auto cov = covariance_increment_check(rec, em, n_id);
  checks.le("speed identity residual", speed.max, 1e-10);
  checks.le("covariance increment identity residual", cov.max, 1e-10);

  auto bounds = check_reduction_bounds(dir.truncated(std::min(m_dir, 5)), model.range(), 50, 0x5eed);
  checks.flag("reduction bounds at 50 sampled k per lag", bounds.holds);
  json brows = json::array();
  for (const auto& r : bounds.rows) {
    brows.push_back({{"m", r.m},
                     {"S", r.S},
                     {"mass", r.mass},
                     {"row_sum", r.row_sum},
                     {"grad", r.grad},
                     {"grad_bound", r.grad_bound},
                     {"hess", r.hess},
                     {"hess_bound", r.hess_bound},
                     {"worst_ratio", {r.worst_ratio[0], r.worst_ratio[1], r.worst_ratio[2]}},
                     {"holds", r.holds}});
  }
  j["bounds"] = brows;

  auto db = check_delta_bounds(model, 6);
  checks.flag("delta bound, combined length <= 6", db.holds);
  j["delta_bound"] = {{"checked", db.checked}, {"nonzero", db.nonzero}, {"violations", db.violations},
                      {"constant", db.constant}, {"max_ratio", db.max_ratio}};

  j["recurrence"] = {{"max_x", r_rec.max_x}, {"max_k", r_rec.max_k}};
  j["direct_vs_recurrence"] = diff;
  j["speed_identity_residual"] = speed.per_n;
  j["covariance_identity_residual"] = cov.per_n;
  const Eigen::VectorXd theta = theta_truncated(rec, n_ver + 1);
  j["theta"] = vector_json(theta);
  j["sigma"] = matrix_json(sigma_truncated(rec, theta, n_ver + 1));

  // Decay fit is reported, not gated: at these lags it is descriptive only.
  try {
    auto audit = assumption_audit(dir, model);
    json a = {{"template", audit.template_name}, {"power", audit.power}, {"m", audit.m},
              {"S", audit.S},                    {"used", audit.used},   {"epsilon", audit.epsilon},
              {"J", audit.J},                    {"r2", number(audit.r2)}, {"residuals", audit.residuals}};
    j["decay"] = a;
  } catch (const InsufficientDataError& e) {
    j["decay"] = {{"error", e.what()}};
  }
  finish(j, checks);
  return j;
}

std::string report_csv(const json& r) {
  std::ostringstream os;
  os.precision(17);
  const std::string kind = r.at("report");
  const int d = r.at("model").at("dim");
  auto coords_header = [&](const char* prefix) {
    for (int i = 1; i <= d; ++i) os << ',' << prefix << i;
  };
  auto field_rows = [&](const std::string& key_name, const json& fields, const char* prefix) {
    os << key_name;
    coords_header(prefix);
    os << ",weight\n";
    for (const auto& [key, f] : fields.items()) {
      for (const auto& e : f.at("entries")) {
        os << key;
        for (const auto& x : e[0]) os << ',' << x.get<long>();
        os << ',' << e[1].get<double>() << '\n';
      }
    }
  };
  if (kind == "enumerate") {
    field_rows("n", r.at("c"), "x");
  } else if (kind == "pi") {
    field_rows("m", r.at("pi"), "y");
  } else if (kind == "verify") {
    os << "n,x_residual,k_residual\n";
    const auto& rr = r.at("recurrence");
    for (std::size_t n = 0; n < rr.at("x_residual").size(); ++n)
      os << n << ',' << rr["x_residual"][n].get<double>() << ',' << rr["k_residual"][n].get<double>() << '\n';
  } else if (kind == "speed") {
    os << 'm';
    coords_header("a");
    coords_header("theta");
    os << '\n';
    for (const auto& [key, th] : r.at("theta_n").items()) {
      os << key;
      if (r.at("a").contains(key)) {
        for (const auto& v : r["a"][key]) os << ',' << v.get<double>();
      } else {
        for (int i = 0; i < d; ++i) os << ",0";
      }
      for (const auto& v : th) os << ',' << v.get<double>();
      os << '\n';
    }
  } else if (kind == "variance") {
    os << 'm';
    for (int a = 1; a <= d; ++a)
      for (int b = 1; b <= d; ++b) os << ",sigma" << a << b;
    os << '\n';
    for (const auto& [key, s] : r.at("sigma_n").items()) {
      os << key;
      for (const auto& row : s)
        for (const auto& v : row) os << ',' << v.get<double>();
      os << '\n';
    }
  } else if (kind == "induction") {
    // One row per (j, k) on the CLT points; e_j there is r_j - k.Sigma_j k / 2.
    os << 'j';
    for (int a = 1; a <= d; ++a) os << ",k" << a;
    os << ",abs_e,abs_r\n";
    const auto& clt = r.at("clt");
    for (std::size_t i = 0; i < clt.at("value").size(); ++i) {
      const auto& sigma = r.at("sigma_j")[i];
      for (std::size_t p = 0; p < clt["points"].size(); ++p) {
        const auto& k = clt["points"][p]["k"];
        double quad = 0.0;
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) quad += k[a].get<double>() * sigma[a][b].get<double>() * k[b].get<double>();
        const auto& z = clt["value"][i][p];
        const std::complex<double> rv(z[0].get<double>(), z[1].get<double>());
        os << i + 1;
        for (int a = 0; a < d; ++a) os << ',' << k[a].get<double>();
        os << ',' << std::abs(rv - 0.5 * quad) << ',' << std::abs(rv) << '\n';
      }
    }
  } else {
    os << "check,value,tolerance,pass\n";
    for (const auto& c : r.at("checks")) {
      std::string name = c.at("name");
      std::replace(name.begin(), name.end(), ',', ';');
      os << '"' << name << "\"," << (c.contains("value") ? c["value"].dump() : "") << ','
         << (c.contains("tolerance") ? c["tolerance"].dump() : "") << ',' << (c["pass"].get<bool>() ? 1 : 0)
         << '\n';
    }
  }
  return os.str();
}

std::vector<Eigen::VectorXd> default_k_set(int dim) {
  std::vector<Eigen::VectorXd> ks;
  Eigen::VectorXd k = Eigen::VectorXd::Zero(dim);
  k[0] = 0.5;
  ks.push_back(k);
  if (dim > 1) {
    k.setZero();
    k[dim - 1] = 0.5;
    ks.push_back(k);
  }
  k.setZero();
  k[0] = 1.0;
  ks.push_back(k);
  if (dim > 1) {
    ks.push_back(Eigen::VectorXd::Constant(dim, 0.5));
  } else {
    k[0] = 1.5;
    ks.push_back(k);
  }
  return ks;
}

std::vector<Eigen::VectorXd> parse_k_set(const std::string& text, int dim) {
  std::vector<Eigen::VectorXd> ks;
  std::stringstream outer(text);
  std::string vec;
  while (std::getline(outer, vec, ';')) {
    if (vec.empty()) continue;
    std::vector<double> comps;
    std::stringstream inner(vec);
    std::string item;
    while (std::getline(inner, item, ',')) {
      try {
        std::size_t used = 0;
        comps.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ConfigError("--k: cannot parse '" + item + "' as a number");
      }
    }
    if (static_cast<int>(comps.size()) != dim)
      throw ConfigError("--k: vector '" + vec + "' has " + std::to_string(comps.size()) + " components, model has dim " +
                        std::to_string(dim));
    ks.push_back(Eigen::Map<Eigen::VectorXd>(comps.data(), dim));
  }
  return ks;
}

namespace {

struct CliOptions {
  std::string model_path;
  int n = -1;
  int m_max = -1;
  int n_max = -1;
  int m_ext = -1;
  int k_points = 11;
  long samples = 100000;
  std::uint64_t seed = 1;
  double delta = 0.25;
  std::string out = ".";
  std::string format = "json";
  int threads = 0;
  double budget = 1e8;
  bool direct = false;
  int n_cap = 6;
  std::string k;
  bool quiet = false;
};

std::string versions_string() {
  std::ostringstream os;
  os << "lace " << kVersion << ", Eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
     << EIGEN_MINOR_VERSION << ", nlohmann_json " << NLOHMANN_JSON_VERSION_MAJOR << '.'
     << NLOHMANN_JSON_VERSION_MINOR << '.' << NLOHMANN_JSON_VERSION_PATCH;
  return os.str();
}

int run_command(const std::string& cmd, const CliOptions& o, const std::string& argv_line) {
  const auto t0 = std::chrono::steady_clock::now();
  ModelSpec model = load_model(o.model_path);
  RunContext ctx{o.threads, o.budget};
  const int d = model.dim;
  json report;
  std::vector<std::pair<std::string, std::string>> extra;  // filename, content

  if (cmd == "enumerate") {
    report = enumerate_report(model, o.n >= 0 ? o.n : default_verify_range(d), ctx);
  } else if (cmd == "pi") {
    report = pi_report(model, o.m_max >= 0 ? o.m_max : default_direct_lag(d), o.direct, o.n_cap, ctx);
  } else if (cmd == "verify") {
    report = verify_report(model, o.n >= 0 ? o.n : default_verify_range(d), o.k_points, ctx);
  } else if (cmd == "speed") {
    const int n_max = o.n_max >= 0 ? o.n_max : default_identity_range(d);
    report = speed_report(model, o.m_max >= 0 ? o.m_max : n_max + 1, n_max, ctx);
  } else if (cmd == "variance") {
    const int n_max = o.n_max >= 0 ? o.n_max : default_identity_range(d);
    report = variance_report(model, o.m_max >= 0 ? o.m_max : n_max + 1, n_max, ctx);
  } else if (cmd == "induction") {
    report = induction_json(model, o.n >= 0 ? o.n : 8, o.delta, ctx);
  } else if (cmd == "mc") {
    McConfig cfg;
    cfg.n = o.n >= 0 ? o.n : 1000;
    cfg.samples = o.samples;
    cfg.seed = o.seed;
    cfg.threads = o.threads;
    cfg.k_set = o.k.empty() ? default_k_set(d) : parse_k_set(o.k, d);
    const int m_max = o.m_max >= 0 ? o.m_max : 8;
    McEstimate est;
    report = mc_report(model, cfg, m_max, o.m_ext >= 0 ? o.m_ext : m_max + 4, ctx, &est);
    extra.emplace_back("mc_running_mean.csv", running_mean_csv(est));
    extra.emplace_back("mc_qq.csv", qq_csv(est));
  } else {
    report = suite_report(model, ctx);
  }

  const std::filesystem::path out(o.out);
  std::vector<std::string> outputs;
  const std::string body = dump_report(report);
  write_atomic(out / (cmd + ".json"), body);
  outputs.push_back(cmd + ".json");
  if (o.format == "csv") {
    write_atomic(out / (cmd + ".csv"), report_csv(report));
    outputs.push_back(cmd + ".csv");
  }
  for (const auto& [name, content] : extra) {
    write_atomic(out / name, content);
    outputs.push_back(name);
  }
  const bool pass = !report.contains("pass") || report["pass"].get<bool>();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest = {{"command", cmd},
                   {"arguments", argv_line},
                   {"model_path", o.model_path},
                   {"config_hash", config_hash(model)},
                   {"versions", versions_string()},
                   {"compiler", __VERSION__},
                   {"seed", o.seed},
                   {"threads", resolve_threads(o.threads)},
                   {"budget", o.budget},
                   {"wall_time_seconds", wall},
                   {"outputs", outputs},
                   {"report_hash", [&] {
                      char buf[17];
                      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(body)));
                      return std::string(buf);
                    }()},
                   {"pass", pass}};
  write_atomic(out / "manifest.json", dump_report(manifest));

  if (cmd == "verify") {
    std::cout << body;
  } else if (!o.quiet) {
    std::cout << cmd << ": " << (pass ? "ok" : "check failed") << ", wrote " << (out / (cmd + ".json")).string()
              << '\n';
  }
  if (!pass) {
    for (const auto& c : report["checks"])
      if (!c["pass"].get<bool>()) std::cerr << "failed: " << c["name"].get<std::string>() << '\n';
  }
  return pass ? 0 : 1;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"Lace expansion engine for self-interacting random walks", "lace"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  app.footer(
      "Variants: base, excited, reinforced, environment (see schemas/model.schema.json).\n"
      "Environment models: the expansion, speed and covariance identities hold in any dimension;\n"
      "the limit theorems need many fair coordinates, so Monte Carlo confrontation is diagnostic only.\n"
      "Exit codes: 0 ok, 1 a check failed, 2 usage or config error, 3 resource limit.");
  CliOptions o;

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"enumerate", "exact two-point functions c_0..c_n"},
      {"pi", "expansion coefficients (recurrence, or nested sums with --direct)"},
      {"verify", "recurrence residuals; prints the report as JSON"},
      {"speed", "speed series and the mean-increment identity"},
      {"variance", "covariance series and the covariance-increment identity"},
      {"induction", "LLN/CLT remainder decompositions"},
      {"mc", "Monte Carlo confrontation of theta_M and Sigma_M"},
      {"all", "full identity and bound suite for one model"},
  };
  std::vector<CLI::App*> apps;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--model", o.model_path, "model config (YAML or JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--format", o.format, "report format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    sub->add_option("--threads", o.threads, "worker threads (default: LACE_THREADS or hardware)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--budget", o.budget, "enumeration budget in node visits")->capture_default_str();
    sub->add_flag("--quiet", o.quiet, "no status line");
    apps.push_back(sub);
  }
  auto sub = [&](const char* name) { return app.get_subcommand(name); };
  sub("enumerate")->add_option("--n", o.n, "walk length")->check(CLI::NonNegativeNumber);
  sub("pi")->add_option("--m-max", o.m_max, "largest lag")->check(CLI::Range(1, 64));
  sub("pi")->add_flag("--direct", o.direct, "nested sub-walk sums instead of recurrence inversion");
  sub("pi")->add_option("--n-cap", o.n_cap, "largest lag accepted by --direct")->capture_default_str();
  sub("verify")->add_option("--n", o.n, "largest n of the residual")->check(CLI::Range(1, 64));
  sub("verify")->add_option("--k-grid", o.k_points, "k-grid points per axis")->check(CLI::Range(1, 201));
  for (const char* name : {"speed", "variance"}) {
    sub(name)->add_option("--m-max", o.m_max, "truncation lag M")->check(CLI::Range(1, 64));
    sub(name)->add_option("--n-max", o.n_max, "largest n of the identity")->check(CLI::Range(0, 64));
  }
  sub("induction")->add_option("--n", o.n, "largest j")->check(CLI::Range(1, 64));
  sub("induction")->add_option("--delta", o.delta, "radius constant")->capture_default_str();
  sub("mc")->add_option("--n", o.n, "walk length")->check(CLI::PositiveNumber);
  sub("mc")->add_option("--samples", o.samples, "sample count")->check(CLI::PositiveNumber)->capture_default_str();
  sub("mc")->add_option("--seed", o.seed, "master seed")->capture_default_str();
  sub("mc")->add_option("--m-max", o.m_max, "truncation lag of theta and Sigma")->check(CLI::Range(1, 64));
  sub("mc")->add_option("--m-ext", o.m_ext, "lag used for the truncation residual")->check(CLI::Range(1, 64));
  sub("mc")->add_option("--k", o.k, "characteristic-function points, e.g. '0.5,0;0,0.5'");

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  std::string argv_line;
  for (int i = 1; i < argc; ++i) argv_line += (i > 1 ? " " : "") + std::string(argv[i]);

  std::string cmd;
  for (CLI::App* s : apps)
    if (s->parsed()) cmd = s->get_name();
  try {
    return run_command(cmd, o, argv_line);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ResourceError& e) {
    std::cerr << "resource budget exceeded (" << e.limit() << "): " << e.what() << '\n';
    return 3;
  } catch (const InsufficientDataError& e) {
    std::cerr << "insufficient data: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace lace
