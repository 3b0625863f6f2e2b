#pragma once

#include "lace/lattice.hpp"
#include "lace/models.hpp"

#include <Eigen/Dense>

#include <vector>

namespace lace {

struct EnumerationOptions {
  double budget = 1e8;  // node visits
  int threads = 0;      // <= 0: default worker count
};

// Node visits of a full step-tree sweep to depth n from one start.
double enumeration_cost(int num_steps, int n);

// Positions after 0..n further steps of the walk continuing `start`:
// out[j](x) = Q^{start}(omega_j = x). Every entry is summed in a fixed order.
std::vector<SignedField> conditional_two_point_sequence(const ModelSpec& model, const PathHistory& start, int n,
                                                        const EnumerationOptions& opts = {});
std::vector<SignedField> two_point_sequence(const ModelSpec& model, int n, const EnumerationOptions& opts = {});

SignedField two_point(const ModelSpec& model, int n, const EnumerationOptions& opts = {});
SignedField conditional_two_point(const ModelSpec& model, const PathHistory& eta, int n,
                                  const EnumerationOptions& opts = {});

struct ExactMoments {
  std::vector<Eigen::VectorXd> mean;        // E[omega_j]
  std::vector<Eigen::MatrixXd> second;      // E[omega_j omega_j^T]
  std::vector<Eigen::MatrixXd> covariance;  // Var(omega_j)
};

ExactMoments exact_moments(const std::vector<SignedField>& c);
ExactMoments exact_moments(const ModelSpec& model, int n, const EnumerationOptions& opts = {});

struct ReturnProbability {
  double sup_return = 0.0;  // sup over histories of Q^eta(omega_n = omega_0)
  double sup_any = 0.0;     // sup over histories and x of Q^eta(omega_n = x)
};

// Histories range over every path from the origin with at most history_len steps.
ReturnProbability sup_return_probability(const ModelSpec& model, int n, int history_len,
                                         const EnumerationOptions& opts = {});

}  // namespace lace
