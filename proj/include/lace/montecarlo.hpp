#pragma once

#include "lace/lattice.hpp"
#include "lace/models.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace lace {

// Independent stream per (seed, sample index).
std::uint64_t splitmix64(std::uint64_t x);
std::mt19937_64 sample_stream(std::uint64_t seed, std::uint64_t index);
double uniform01(std::mt19937_64& rng);

// Runs the walk forward n steps; positions at the given step counts are
// written to `checkpoints` (ascending, each <= n) when non-null.
LatticePoint simulate_endpoint(const ModelSpec& model, int n, std::mt19937_64& rng,
                               const std::vector<int>* checkpoint_steps = nullptr,
                               std::vector<LatticePoint>* checkpoints = nullptr);

struct McConfig {
  int n = 1000;
  long samples = 10000;
  std::uint64_t seed = 1;
  int batches = 100;  // batch means for standard errors
  int threads = 0;
  std::vector<Eigen::VectorXd> k_set;  // CF points for omega_n / sqrt(n)
  int checkpoints = 20;                // running-mean checkpoints along the walk
  bool keep_endpoints = true;
};

struct McEstimate {
  int n = 0;
  long samples = 0;
  int batches = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd mean_se;
  Eigen::MatrixXd covariance_se;
  Eigen::VectorXd skewness;
  Eigen::VectorXd excess_kurtosis;
  std::vector<Eigen::VectorXd> k_set;
  std::vector<std::complex<double>> cf;  // E exp(i k . omega_n / sqrt(n))
  std::vector<double> cf_se;             // batch-means SE of |CF| components combined
  std::vector<int> checkpoint_steps;
  std::vector<Eigen::VectorXd> checkpoint_mean;
  std::vector<LatticePoint> endpoints;  // in sample order, when kept
};

McEstimate estimate(const ModelSpec& model, const McConfig& config);

struct CfRow {
  Eigen::VectorXd k;
  std::complex<double> empirical;  // CF of (omega_n - theta n)/sqrt(n)
  double target = 0.0;             // exp(-k^T Sigma k / 2)
  double discrepancy = 0.0;
  double se = 0.0;
  double truncation = 0.0;  // propagated from theta/sigma truncation residuals
  double band = 0.0;        // 3 se + truncation
  bool skipped = false;
  bool passes = false;
};

struct CltReport {
  std::vector<CfRow> rows;
  Eigen::VectorXd skewness;
  Eigen::VectorXd excess_kurtosis;
  std::vector<std::string> notes;
  bool passes = true;
};

// theta_residual / sigma_residual: truncation residuals of the supplied
// speed (vector norm) and covariance (max entry).
CltReport clt_diagnostic(const McEstimate& est, const Eigen::VectorXd& theta, const Eigen::MatrixXd& sigma,
                         double theta_residual = 0.0, double sigma_residual = 0.0);

// Plot-ready CSVs.
std::string running_mean_csv(const McEstimate& est);
// Normal QQ data of each standardized coordinate (every `stride`-th order statistic).
std::string qq_csv(const McEstimate& est, int stride = 100);

}  // namespace lace
