#pragma once

#include "lace/lattice.hpp"

#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace lace {

enum class ModelKind { Base, Excited, Reinforced, Environment };

std::string to_string(ModelKind kind);

// Fixed step law, no interaction.
struct BaseWalk {
  std::vector<double> law;  // indexed like ModelSpec::steps
};

// Drift beta/d along e_1 on the first visit of a site, uniform otherwise.
struct ExcitedWalk {};

// Directed edge weights w_0(step) + sum_{t<=l} beta_t after l traversals.
struct ReinforcedWalk {
  std::vector<double> initial_weights;  // indexed like ModelSpec::steps
  std::vector<double> reinforcement;    // beta_1, beta_2, ...; zero afterwards
};

struct EnvironmentAtom {
  std::vector<double> weights;  // indexed like ModelSpec::steps (unit steps)
  double probability = 0.0;
};

// Annealed walk in an i.i.d. site environment with finitely many atoms.
// The first d0 coordinates carry the environment drift, the last d1 are fair.
struct RandomEnvironmentWalk {
  int d0 = 0;
  int d1 = 0;
  std::vector<EnvironmentAtom> atoms;
};

struct ModelSpec {
  std::string name;
  int dim = 1;
  double beta = 0.0;
  std::vector<LatticePoint> steps;
  std::variant<BaseWalk, ExcitedWalk, ReinforcedWalk, RandomEnvironmentWalk> params;

  ModelKind kind() const;
  int num_steps() const { return static_cast<int>(steps.size()); }
  int step_index(const LatticePoint& step) const;  // -1 if not a step
  double range() const;                            // max Euclidean step length
};

// Unit steps ordered +e1, -e1, +e2, -e2, ...
std::vector<LatticePoint> unit_steps(int dim);

ModelSpec make_simple_walk(int dim);
ModelSpec make_base_walk(int dim, std::vector<LatticePoint> steps, std::vector<double> law);
ModelSpec make_excited(int dim, double beta);
ModelSpec make_reinforced(int dim, std::vector<LatticePoint> steps, std::vector<double> w0,
                          std::vector<double> reinforcement);
ModelSpec make_once_reinforced(int dim, std::vector<LatticePoint> steps, std::vector<double> w0,
                               double beta);
// d = 1 walk with w_0(+1) = right, w_0(-1) = left, once-reinforced by beta.
ModelSpec make_once_reinforced_1d(double right, double left, double beta);
ModelSpec make_environment(int d0, int d1, std::vector<EnvironmentAtom> atoms, double beta);
// d0 = d1 = 1 and two equally likely atoms:
//   +e1: 0.35 +/- beta, -e1: 0.25, +/-e2: (0.4 -/+ beta)/2.
ModelSpec make_two_point_environment(double beta);

// Throws ConfigError describing the first violated constraint.
void validate(const ModelSpec& model);

// Config loading (YAML or JSON). Errors carry "source:line:col".
ModelSpec parse_model(const std::string& text, const std::string& source = "<string>");
ModelSpec load_model(const std::string& path);
nlohmann::json model_to_json(const ModelSpec& model);

// Open-addressing map from sites to per-site records: visit count and
// departure counts per step index. Records are never removed; counts are
// decremented instead, which keeps push/pop allocation free in a DFS.
class SiteIndex {
 public:
  explicit SiteIndex(int num_steps = 0);
  int find(const LatticePoint& x) const;  // -1 if absent
  int find_or_insert(const LatticePoint& x);
  void clear();
  std::size_t records() const { return keys_.size(); }

  int visits(int rec) const { return visits_[rec]; }
  int& visits(int rec) { return visits_[rec]; }
  int departures(int rec, int step) const { return departures_[rec * num_steps_ + step]; }
  int& departures(int rec, int step) { return departures_[rec * num_steps_ + step]; }
  std::span<const int> departure_counts(int rec) const {
    return {departures_.data() + rec * num_steps_, static_cast<std::size_t>(num_steps_)};
  }
  const LatticePoint& key(int rec) const { return keys_[rec]; }

 private:
  void grow();

  int num_steps_;
  std::vector<int> slots_;
  std::vector<LatticePoint> keys_;
  std::vector<int> visits_;
  std::vector<int> departures_;
};

// Ordered path with incremental indices for O(1) model queries.
class PathHistory {
 public:
  PathHistory(const ModelSpec& model, const LatticePoint& start);
  PathHistory(const ModelSpec& model, const std::vector<LatticePoint>& sites);

  const ModelSpec& model() const { return *model_; }
  std::size_t length() const { return sites_.size(); }  // number of sites
  std::size_t steps_taken() const { return sites_.size() - 1; }
  const std::vector<LatticePoint>& sites() const { return sites_; }
  const LatticePoint& current() const { return sites_.back(); }
  const LatticePoint& front() const { return sites_.front(); }

  void push_step(int step_index);
  void push(const LatticePoint& next);  // throws InvariantError if not a step
  void pop();
  void reset(const LatticePoint& start);

  // Occurrences of x among all sites.
  int visits(const LatticePoint& x) const;
  // x occurs among sites[0 .. length-2].
  bool in_strict_past(const LatticePoint& x) const;
  bool current_in_strict_past() const { return index_.visits(current_rec()) >= 2; }
  int departures(const LatticePoint& x, int step_index) const;
  std::span<const int> current_departures() const { return index_.departure_counts(current_rec()); }
  int step_at(std::size_t i) const { return step_idx_[i]; }

  // this ∘ other; other must start at this->current().
  PathHistory concat(const PathHistory& other) const;
  PathHistory translated(const LatticePoint& v) const;

  // Recomputes every index from the site list; throws InvariantError on mismatch.
  void check_consistency() const;

 private:
  int current_rec() const { return recs_.back(); }

  const ModelSpec* model_;
  std::vector<LatticePoint> sites_;
  std::vector<int> recs_;      // SiteIndex record per site
  std::vector<int> step_idx_;  // step index of sites_[i] -> sites_[i+1]
  SiteIndex index_;
};

struct StepLaw {
  std::vector<LatticePoint> steps;
  std::vector<double> prob;

  double total() const;
  SignedField as_field(const LatticePoint& from) const;
};

// Writes p^{history}(current, current + steps[i]) into out[i].
void step_law_into(const ModelSpec& model, const PathHistory& history, std::span<double> out);
StepLaw conditional_step_law(const ModelSpec& model, const PathHistory& history);
StepLaw first_step_law(const ModelSpec& model);
SignedField first_step_field(const ModelSpec& model);

// p^{outer ∘ inner}(end, end + step) - p^{inner}(end, end + step).
double delta_factor(const ModelSpec& model, const PathHistory& outer, const PathHistory& inner,
                    const LatticePoint& step);

// Indicator of the delta bound: inner endpoint lies in the strict past of outer.
bool delta_indicator(const PathHistory& outer, const PathHistory& inner);
// C such that |delta| <= C * beta * indicator.
double delta_bound_constant(const ModelSpec& model);
// Effective interaction strength: beta, or sum |beta_t| for reinforced walks.
double interaction_strength(const ModelSpec& model);

struct DeltaBoundReport {
  long checked = 0;      // (outer, inner, step) triples
  long nonzero = 0;      // triples with delta != 0
  long violations = 0;   // |delta| > C beta I + tol
  double constant = 0.0;
  double max_ratio = 0.0;  // max |delta| / (C beta) over indicator-true triples
  bool holds = true;
};

// Every outer path from the origin with >= 1 step and every continuation
// with total length <= max_len, against |delta| <= C beta I.
DeltaBoundReport check_delta_bounds(const ModelSpec& model, int max_len, double tol = 1e-15);

}  // namespace lace
