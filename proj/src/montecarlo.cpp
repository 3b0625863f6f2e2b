#include "lace/montecarlo.hpp"

#include "lace/errors.hpp"
#include "lace/parallel.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 sample_stream(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(index + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

namespace {

LatticePoint run_walk(const ModelSpec& m, PathHistory& h, int n, std::mt19937_64& rng, std::vector<double>& law,
                      const std::vector<int>* cp_steps, std::vector<LatticePoint>* cps) {
  h.reset(LatticePoint::origin(m.dim));
  std::size_t next_cp = 0;
  auto record = [&](int t) {
    while (cp_steps && next_cp < cp_steps->size() && (*cp_steps)[next_cp] == t) {
      if (cps) (*cps)[next_cp] = h.current();
      ++next_cp;
    }
  };
  record(0);
  const int ns = m.num_steps();
  for (int t = 1; t <= n; ++t) {
    step_law_into(m, h, law);
    const double u = uniform01(rng);
    double acc = 0;
    int s = ns - 1;
    for (int i = 0; i < ns; ++i) {
      acc += law[i];
      if (u < acc) {
        s = i;
        break;
      }
    }
    while (law[s] == 0.0) --s;  // rounding at the top end
    h.push_step(s);
    record(t);
  }
  return h.current();
}

}  // namespace

LatticePoint simulate_endpoint(const ModelSpec& model, int n, std::mt19937_64& rng,
                               const std::vector<int>* checkpoint_steps, std::vector<LatticePoint>* checkpoints) {
  if (n < 0) throw ConfigError("walk length must be nonnegative");
  PathHistory h(model, LatticePoint::origin(model.dim));
  std::vector<double> law(model.num_steps());
  if (checkpoints && checkpoint_steps) checkpoints->assign(checkpoint_steps->size(), LatticePoint::origin(model.dim));
  return run_walk(model, h, n, rng, law, checkpoint_steps, checkpoints);
}

McEstimate estimate(const ModelSpec& model, const McConfig& cfg) {
  if (cfg.samples < 100) throw ConfigError("Monte Carlo needs at least 100 samples");
  if (cfg.batches < 2 || cfg.batches > cfg.samples) throw ConfigError("batch count must be in [2, samples]");
  if (cfg.n < 1) throw ConfigError("Monte Carlo walk length must be >= 1");
  const int d = model.dim;
  const long S = cfg.samples;

  McEstimate est;
  est.n = cfg.n;
  est.samples = S;
  est.batches = cfg.batches;
  est.k_set = cfg.k_set;
  for (int i = 1; i <= cfg.checkpoints; ++i) {
    const int t = static_cast<int>(static_cast<long>(cfg.n) * i / cfg.checkpoints);
    if (t > 0 && (est.checkpoint_steps.empty() || est.checkpoint_steps.back() != t)) est.checkpoint_steps.push_back(t);
  }

  // Fixed blocks so that the reduction tree does not depend on the worker count.
  constexpr long kBlock = 500;
  const long blocks = (S + kBlock - 1) / kBlock;
  std::vector<LatticePoint> ends(S);
  std::vector<std::vector<Eigen::VectorXd>> cp_sums(blocks);
  parallel_for(static_cast<std::size_t>(blocks), cfg.threads, [&](std::size_t b) {
    PathHistory h(model, LatticePoint::origin(d));
    std::vector<double> law(model.num_steps());
    std::vector<LatticePoint> cps(est.checkpoint_steps.size(), LatticePoint::origin(d));
    cp_sums[b].assign(est.checkpoint_steps.size(), Eigen::VectorXd::Zero(d));
    const long lo = static_cast<long>(b) * kBlock, hi = std::min(S, lo + kBlock);
    for (long i = lo; i < hi; ++i) {
      auto rng = sample_stream(cfg.seed, static_cast<std::uint64_t>(i));
      ends[i] = run_walk(model, h, cfg.n, rng, law, &est.checkpoint_steps, &cps);
      for (std::size_t c = 0; c < cps.size(); ++c) cp_sums[b][c] += cps[c].to_vector();
    }
  });
  for (std::size_t c = 0; c < est.checkpoint_steps.size(); ++c) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
    for (const auto& blk : cp_sums) s += blk[c];
    est.checkpoint_mean.push_back(s / double(S));
  }

  // Welford pass in sample order.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd comoment = Eigen::MatrixXd::Zero(d, d);
  for (long i = 0; i < S; ++i) {
    const Eigen::VectorXd x = ends[i].to_vector();
    const Eigen::VectorXd dx = x - mean;
    mean += dx / double(i + 1);
    comoment += dx * (x - mean).transpose();
  }
  est.mean = mean;
  est.covariance = comoment / double(S - 1);
  est.covariance = 0.5 * (est.covariance + est.covariance.transpose());

  // Higher standardized moments.
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(d), m3 = m2, m4 = m2;
  for (long i = 0; i < S; ++i) {
    const Eigen::VectorXd z = ends[i].to_vector() - mean;
    m2 += z.cwiseProduct(z);
    m3 += z.cwiseProduct(z).cwiseProduct(z);
    m4 += z.cwiseProduct(z).cwiseProduct(z).cwiseProduct(z);
  }
  m2 /= double(S);
  m3 /= double(S);
  m4 /= double(S);
  est.skewness = Eigen::VectorXd::Zero(d);
  est.excess_kurtosis = Eigen::VectorXd::Zero(d);
  for (int a = 0; a < d; ++a)
    if (m2[a] > 0) {
      est.skewness[a] = m3[a] / std::pow(m2[a], 1.5);
      est.excess_kurtosis[a] = m4[a] / (m2[a] * m2[a]) - 3.0;
    }

  // Empirical CF and batch means.
  const double scale = 1.0 / std::sqrt(double(cfg.n));
  const std::size_t K = cfg.k_set.size();
  const int B = cfg.batches;
  std::vector<Eigen::VectorXd> bmean(B);
  std::vector<Eigen::MatrixXd> bcov(B);
  std::vector<std::vector<std::complex<double>>> bcf(B, std::vector<std::complex<double>>(K));
  std::vector<std::complex<double>> cf(K, 0.0);
  for (int b = 0; b < B; ++b) {
    const long lo = S * b / B, hi = S * (b + 1) / B;
    Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(d, d);
    for (long i = lo; i < hi; ++i) {
      const Eigen::VectorXd x = ends[i].to_vector();
      s += x;
      const Eigen::VectorXd z = x - mean;
      q += z * z.transpose();
      for (std::size_t k = 0; k < K; ++k) {
        const double ph = scale * ends[i].dot(cfg.k_set[k]);
        const std::complex<double> e(std::cos(ph), std::sin(ph));
        bcf[b][k] += e;
        cf[k] += e;
      }
    }
    const double cnt = double(hi - lo);
    bmean[b] = s / cnt;
    bcov[b] = q / cnt;
    for (auto& v : bcf[b]) v /= cnt;
  }
  for (auto& v : cf) v /= double(S);
  est.cf = cf;

  est.mean_se = Eigen::VectorXd::Zero(d);
  est.covariance_se = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd bcov_mean = Eigen::MatrixXd::Zero(d, d);
  for (int b = 0; b < B; ++b) bcov_mean += bcov[b] / double(B);
  for (int b = 0; b < B; ++b) {
    est.mean_se += (bmean[b] - mean).cwiseProduct(bmean[b] - mean);
    est.covariance_se += (bcov[b] - bcov_mean).cwiseProduct(bcov[b] - bcov_mean);
  }
  const double norm = 1.0 / (double(B) * (B - 1));
  est.mean_se = (est.mean_se * norm).cwiseSqrt();
  est.covariance_se = (est.covariance_se * norm).cwiseSqrt();
  est.cf_se.assign(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    double vr = 0, vi = 0;
    for (int b = 0; b < B; ++b) {
      vr += std::pow(bcf[b][k].real() - cf[k].real(), 2);
      vi += std::pow(bcf[b][k].imag() - cf[k].imag(), 2);
    }
    est.cf_se[k] = std::sqrt((vr + vi) * norm);
  }
  if (cfg.keep_endpoints) est.endpoints = std::move(ends);
  return est;
}

CltReport clt_diagnostic(const McEstimate& est, const Eigen::VectorXd& theta, const Eigen::MatrixXd& sigma,
                         double theta_residual, double sigma_residual) {
  CltReport rep;
  rep.skewness = est.skewness;
  rep.excess_kurtosis = est.excess_kurtosis;
  const double rn = std::sqrt(double(est.n));
  for (std::size_t i = 0; i < est.k_set.size(); ++i) {
    CfRow row;
    row.k = est.k_set[i];
    const double q = row.k.dot(sigma * row.k);
    if (!(q > 0.0)) {
      row.skipped = true;
      rep.notes.push_back("k = (" + std::to_string(row.k[0]) + ", ...) lies in a singular direction of Sigma; skipped");
      rep.rows.push_back(row);
      continue;
    }
    const double phase = -rn * row.k.dot(theta);
    row.empirical = est.cf[i] * std::complex<double>(std::cos(phase), std::sin(phase));
    row.target = std::exp(-0.5 * q);
    row.discrepancy = std::abs(row.empirical - row.target);
    row.se = est.cf_se[i];
    const double l1 = row.k.cwiseAbs().sum();
    row.truncation = rn * row.k.norm() * theta_residual + 0.5 * l1 * l1 * sigma_residual;
    row.band = 3.0 * row.se + row.truncation;
    row.passes = row.discrepancy <= row.band;
    rep.passes = rep.passes && row.passes;
    rep.rows.push_back(row);
  }
  return rep;
}

std::string running_mean_csv(const McEstimate& est) {
  std::ostringstream os;
  os.precision(17);
  const int d = static_cast<int>(est.mean.size());
  os << "step";
  for (int a = 0; a < d; ++a) os << ",mean_" << a + 1;
  for (int a = 0; a < d; ++a) os << ",mean_per_step_" << a + 1;
  os << "\n";
  for (std::size_t c = 0; c < est.checkpoint_steps.size(); ++c) {
    const int t = est.checkpoint_steps[c];
    os << t;
    for (int a = 0; a < d; ++a) os << "," << est.checkpoint_mean[c][a];
    for (int a = 0; a < d; ++a) os << "," << est.checkpoint_mean[c][a] / t;
    os << "\n";
  }
  return os.str();
}

std::string qq_csv(const McEstimate& est, int stride) {
  std::ostringstream os;
  os.precision(17);
  os << "coordinate,probability,normal_quantile,sample_quantile\n";
  const boost::math::normal_distribution<double> normal;
  const long S = static_cast<long>(est.endpoints.size());
  const int d = static_cast<int>(est.mean.size());
  for (int a = 0; a < d; ++a) {
    const double sd = std::sqrt(est.covariance(a, a));
    if (!(sd > 0) || S == 0) continue;
    std::vector<double> z(S);
    for (long i = 0; i < S; ++i) z[i] = (est.endpoints[i][a] - est.mean[a]) / sd;
    std::sort(z.begin(), z.end());
    for (long i = stride / 2; i < S; i += std::max(1, stride)) {
      const double p = (i + 0.5) / double(S);
      os << a + 1 << "," << p << "," << boost::math::quantile(normal, p) << "," << z[i] << "\n";
    }
  }
  return os.str();
}

}  // namespace lace
