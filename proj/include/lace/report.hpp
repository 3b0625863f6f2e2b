#pragma once

#include "lace/lattice.hpp"
#include "lace/montecarlo.hpp"
#include "lace/models.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace lace {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";
// Small-k exponent fits of the induction remainders must reach 2 - slack.
inline constexpr double kExponentSlack = 0.01;

struct RunContext {
  int threads = 0;
  double budget = 1e8;
};

// Canonical serialization: two-space indent, sorted keys, trailing newline.
std::string dump_report(const nlohmann::json& report);
// Writes to a temporary sibling, then renames over the target.
void write_atomic(const std::filesystem::path& path, const std::string& content);

std::uint64_t fnv1a(std::string_view bytes);
// Hex FNV-1a of the canonical model JSON.
std::string config_hash(const ModelSpec& model);

nlohmann::json vector_json(const Eigen::VectorXd& v);
nlohmann::json matrix_json(const Eigen::MatrixXd& m);

// Collects named threshold checks; `pass` is their conjunction.
class CheckList {
 public:
  void le(const std::string& name, double value, double tolerance);
  void ge(const std::string& name, double value, double threshold);
  void flag(const std::string& name, bool ok, const std::string& detail = {});
  bool pass() const { return pass_; }
  nlohmann::json to_json() const { return items_; }

 private:
  nlohmann::json items_ = nlohmann::json::array();
  bool pass_ = true;
};

// Default ranges by dimension: identities up to n, recurrence residual up to n,
// and the largest lag of the direct expansion check.
int default_identity_range(int dim);
int default_verify_range(int dim);
int default_direct_lag(int dim);

// Report builders. Reports carry "report", "schema_version", "model",
// "config_hash", "parameters", "tags" and the payload; reports with checks
// also carry "checks" and "pass".
nlohmann::json enumerate_report(const ModelSpec& model, int n, const RunContext& ctx);
nlohmann::json pi_report(const ModelSpec& model, int m_max, bool direct, int n_cap, const RunContext& ctx);
nlohmann::json verify_report(const ModelSpec& model, int n, int k_points, const RunContext& ctx);
nlohmann::json speed_report(const ModelSpec& model, int m_max, int n_max, const RunContext& ctx);
nlohmann::json variance_report(const ModelSpec& model, int m_max, int n_max, const RunContext& ctx);
nlohmann::json induction_json(const ModelSpec& model, int n, double delta, const RunContext& ctx);
// Confronts the simulation with theta_M and Sigma_M. Truncation residuals
// come from extending the expansion to lag m_ext.
nlohmann::json mc_report(const ModelSpec& model, const McConfig& config, int m_max, int m_ext,
                         const RunContext& ctx, McEstimate* estimate_out = nullptr);
// Identity and bound suite.
nlohmann::json suite_report(const ModelSpec& model, const RunContext& ctx);

// CSV mirrors of the tabular payloads.
std::string report_csv(const nlohmann::json& report);

// Default characteristic-function points: 0.5 e_1, 0.5 e_d, e_1, 0.5 (1, ..., 1).
std::vector<Eigen::VectorXd> default_k_set(int dim);
// "a,b;c,d" -> {(a, b), (c, d)}
std::vector<Eigen::VectorXd> parse_k_set(const std::string& text, int dim);

// Command-line entry point. Exit codes: 0 ok, 1 failed check, 2 usage or
// config error, 3 resource budget exceeded.
int dispatch(int argc, const char* const* argv);

}  // namespace lace
