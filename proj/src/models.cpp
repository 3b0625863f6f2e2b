#include "lace/models.hpp"

#include "lace/errors.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lace {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Base: return "base";
    case ModelKind::Excited: return "excited";
    case ModelKind::Reinforced: return "reinforced";
    case ModelKind::Environment: return "environment";
  }
  return "unknown";
}

ModelKind ModelSpec::kind() const { return static_cast<ModelKind>(params.index()); }

int ModelSpec::step_index(const LatticePoint& step) const {
  for (int i = 0; i < num_steps(); ++i)
    if (steps[i] == step) return i;
  return -1;
}

double ModelSpec::range() const {
  double L = 0;
  for (const auto& s : steps) L = std::max(L, s.norm());
  return L;
}

std::vector<LatticePoint> unit_steps(int dim) {
  std::vector<LatticePoint> out;
  for (int a = 0; a < dim; ++a) {
    out.push_back(LatticePoint::unit(dim, a, +1));
    out.push_back(LatticePoint::unit(dim, a, -1));
  }
  return out;
}

ModelSpec make_base_walk(int dim, std::vector<LatticePoint> steps, std::vector<double> law) {
  ModelSpec m;
  m.name = "base";
  m.dim = dim;
  m.steps = std::move(steps);
  m.params = BaseWalk{std::move(law)};
  validate(m);
  return m;
}

ModelSpec make_simple_walk(int dim) {
  return make_base_walk(dim, unit_steps(dim), std::vector<double>(2 * dim, 1.0 / (2 * dim)));
}

ModelSpec make_excited(int dim, double beta) {
  ModelSpec m;
  m.name = "excited";
  m.dim = dim;
  m.beta = beta;
  m.steps = unit_steps(dim);
  m.params = ExcitedWalk{};
  validate(m);
  return m;
}

ModelSpec make_reinforced(int dim, std::vector<LatticePoint> steps, std::vector<double> w0,
                          std::vector<double> reinforcement) {
  ModelSpec m;
  m.name = "reinforced";
  m.dim = dim;
  m.steps = std::move(steps);
  double b = 0;
  for (double x : reinforcement) b += std::abs(x);
  m.beta = b;
  m.params = ReinforcedWalk{std::move(w0), std::move(reinforcement)};
  validate(m);
  return m;
}

ModelSpec make_once_reinforced(int dim, std::vector<LatticePoint> steps, std::vector<double> w0,
                               double beta) {
  ModelSpec m = make_reinforced(dim, std::move(steps), std::move(w0), {beta});
  m.beta = beta;
  return m;
}

ModelSpec make_once_reinforced_1d(double right, double left, double beta) {
  return make_once_reinforced(1, unit_steps(1), {right, left}, beta);
}

ModelSpec make_environment(int d0, int d1, std::vector<EnvironmentAtom> atoms, double beta) {
  ModelSpec m;
  m.name = "environment";
  m.dim = d0 + d1;
  m.beta = beta;
  m.steps = unit_steps(m.dim);
  m.params = RandomEnvironmentWalk{d0, d1, std::move(atoms)};
  validate(m);
  return m;
}

ModelSpec make_two_point_environment(double beta) {
  EnvironmentAtom a{{0.35 + beta, 0.25, (0.4 - beta) / 2, (0.4 - beta) / 2}, 0.5};
  EnvironmentAtom b{{0.35 - beta, 0.25, (0.4 + beta) / 2, (0.4 + beta) / 2}, 0.5};
  return make_environment(1, 1, {a, b}, beta);
}

namespace {

constexpr double kSumTol = 1e-12;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

void check_probability_vector(const std::vector<double>& p, std::size_t n, const std::string& what) {
  if (p.size() != n) fail(what + ": expected " + std::to_string(n) + " entries, got " + std::to_string(p.size()));
  double s = 0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) fail(what + ": entries must be finite and nonnegative");
    s += x;
  }
  if (std::abs(s - 1.0) > kSumTol) fail(what + ": entries sum to " + std::to_string(s) + ", not 1");
}

bool is_unit_step_set(const ModelSpec& m) { return m.steps == unit_steps(m.dim); }

}  // namespace

void validate(const ModelSpec& m) {
  if (m.dim < 1 || m.dim > kMaxDim) fail("dim must be in [1, " + std::to_string(kMaxDim) + "]");
  if (m.steps.empty()) fail("step set is empty");
  for (std::size_t i = 0; i < m.steps.size(); ++i) {
    if (m.steps[i].dim() != m.dim) fail("step " + m.steps[i].str() + " has wrong dimension");
    if (m.steps[i] == LatticePoint::origin(m.dim)) fail("zero step is not allowed");
    for (std::size_t j = 0; j < i; ++j)
      if (m.steps[i] == m.steps[j]) fail("duplicate step " + m.steps[i].str());
  }
  if (!std::isfinite(m.beta)) fail("beta must be finite");

  switch (m.kind()) {
    case ModelKind::Base: {
      check_probability_vector(std::get<BaseWalk>(m.params).law, m.steps.size(), "base law");
      break;
    }
    case ModelKind::Excited: {
      if (m.beta < 0.0 || m.beta > 1.0) fail("excited walk needs 0 <= beta <= 1");
      if (!is_unit_step_set(m)) fail("excited walk uses the nearest-neighbour step set");
      break;
    }
    case ModelKind::Reinforced: {
      const auto& r = std::get<ReinforcedWalk>(m.params);
      if (r.initial_weights.size() != m.steps.size()) fail("initial_weights must match the step set");
      for (double w : r.initial_weights)
        if (!(w > 0.0) || !std::isfinite(w)) fail("initial weights must be positive");
      Eigen::VectorXd drift = Eigen::VectorXd::Zero(m.dim);
      for (std::size_t i = 0; i < m.steps.size(); ++i) drift += r.initial_weights[i] * m.steps[i].to_vector();
      if (drift.norm() == 0.0) fail("initial weights must have nonzero drift");
      double partial = 0, lowest = 0, total = 0;
      for (double b : r.reinforcement) {
        if (!std::isfinite(b)) fail("reinforcement entries must be finite");
        partial += b;
        lowest = std::min(lowest, partial);
        total += std::abs(b);
      }
      for (double w : r.initial_weights)
        if (w + lowest <= 0.0) fail("reinforcement drives an edge weight to <= 0");
      if (std::abs(total - m.beta) > 1e-12)
        fail("beta must equal the sum of |reinforcement| (" + std::to_string(total) + ")");
      break;
    }
    case ModelKind::Environment: {
      const auto& e = std::get<RandomEnvironmentWalk>(m.params);
      if (e.d0 < 0 || e.d1 < 1 || e.d0 + e.d1 != m.dim) fail("environment needs d0 >= 0, d1 >= 1, d0 + d1 = dim");
      if (!is_unit_step_set(m)) fail("environment walk uses the nearest-neighbour step set");
      if (e.atoms.empty() || e.atoms.size() > 8) fail("environment law needs 1 to 8 atoms");
      double ps = 0;
      for (const auto& a : e.atoms) {
        if (!(a.probability > 0.0)) fail("atom probabilities must be positive");
        ps += a.probability;
        check_probability_vector(a.weights, m.steps.size(), "atom weights");
      }
      if (std::abs(ps - 1.0) > kSumTol) fail("atom probabilities must sum to 1");
      std::vector<double> mean(m.steps.size(), 0.0);
      for (const auto& a : e.atoms)
        for (std::size_t u = 0; u < mean.size(); ++u) mean[u] += a.probability * a.weights[u];
      for (const auto& a : e.atoms) {
        double drifted = 0;
        for (int u = 0; u < 2 * e.d0; ++u) drifted += a.weights[u];
        if (drifted >= 1.0) fail("atom puts all weight on the drift coordinates (no delta > 0)");
        const double fair = (1.0 - drifted) / (2 * e.d1);
        for (int u = 2 * e.d0; u < m.num_steps(); ++u)
          if (std::abs(a.weights[u] - fair) > kSumTol) fail("atom weights on the fair coordinates must be equal");
        for (std::size_t u = 0; u < mean.size(); ++u)
          if (std::abs(a.weights[u] - mean[u]) > m.beta + kSumTol)
            fail("atom deviates from the mean law by more than beta");
      }
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// SiteIndex

SiteIndex::SiteIndex(int num_steps) : num_steps_(num_steps), slots_(64, -1) {}

int SiteIndex::find(const LatticePoint& x) const {
  const std::size_t mask = slots_.size() - 1;
  for (std::size_t i = x.hash() & mask;; i = (i + 1) & mask) {
    const int r = slots_[i];
    if (r < 0) return -1;
    if (keys_[r] == x) return r;
  }
}

int SiteIndex::find_or_insert(const LatticePoint& x) {
  std::size_t mask = slots_.size() - 1;
  for (std::size_t i = x.hash() & mask;; i = (i + 1) & mask) {
    const int r = slots_[i];
    if (r >= 0) {
      if (keys_[r] == x) return r;
      continue;
    }
    const int id = static_cast<int>(keys_.size());
    keys_.push_back(x);
    visits_.push_back(0);
    departures_.resize(departures_.size() + num_steps_, 0);
    slots_[i] = id;
    if (keys_.size() * 2 > slots_.size()) grow();
    return id;
  }
}

void SiteIndex::grow() {
  std::vector<int> fresh(slots_.size() * 2, -1);
  const std::size_t mask = fresh.size() - 1;
  for (int id = 0; id < static_cast<int>(keys_.size()); ++id) {
    std::size_t i = keys_[id].hash() & mask;
    while (fresh[i] >= 0) i = (i + 1) & mask;
    fresh[i] = id;
  }
  slots_.swap(fresh);
}

void SiteIndex::clear() {
  std::fill(slots_.begin(), slots_.end(), -1);
  keys_.clear();
  visits_.clear();
  departures_.clear();
}

// ---------------------------------------------------------------------------
// PathHistory

PathHistory::PathHistory(const ModelSpec& model, const LatticePoint& start)
    : model_(&model), index_(model.num_steps()) {
  reset(start);
}

PathHistory::PathHistory(const ModelSpec& model, const std::vector<LatticePoint>& sites)
    : model_(&model), index_(model.num_steps()) {
  if (sites.empty()) throw InvariantError("path history needs at least one site");
  reset(sites.front());
  for (std::size_t i = 1; i < sites.size(); ++i) push(sites[i]);
}

void PathHistory::reset(const LatticePoint& start) {
  if (start.dim() != model_->dim) throw ConfigError("history start has wrong dimension");
  index_.clear();
  sites_.clear();
  recs_.clear();
  step_idx_.clear();
  const int r = index_.find_or_insert(start);
  index_.visits(r) += 1;
  sites_.push_back(start);
  recs_.push_back(r);
}

void PathHistory::push_step(int step) {
  index_.departures(current_rec(), step) += 1;
  LatticePoint next = sites_.back() + model_->steps[step];
  const int r = index_.find_or_insert(next);
  index_.visits(r) += 1;
  sites_.push_back(next);
  recs_.push_back(r);
  step_idx_.push_back(step);
}

void PathHistory::push(const LatticePoint& next) {
  const int s = model_->step_index(next - current());
  if (s < 0) throw InvariantError("history step " + (next - current()).str() + " is not in the step set");
  push_step(s);
}

void PathHistory::pop() {
  if (sites_.size() < 2) throw InvariantError("cannot pop the first site of a history");
  index_.visits(recs_.back()) -= 1;
  sites_.pop_back();
  recs_.pop_back();
  index_.departures(current_rec(), step_idx_.back()) -= 1;
  step_idx_.pop_back();
}

int PathHistory::visits(const LatticePoint& x) const {
  const int r = index_.find(x);
  return r < 0 ? 0 : index_.visits(r);
}

bool PathHistory::in_strict_past(const LatticePoint& x) const {
  return visits(x) - (x == current() ? 1 : 0) > 0;
}

int PathHistory::departures(const LatticePoint& x, int step) const {
  const int r = index_.find(x);
  return r < 0 ? 0 : index_.departures(r, step);
}

PathHistory PathHistory::concat(const PathHistory& other) const {
  if (!(other.front() == current())) throw InvariantError("concatenation endpoint mismatch");
  PathHistory out(*this);
  for (std::size_t i = 0; i < other.step_idx_.size(); ++i) out.push_step(other.step_idx_[i]);
  return out;
}

PathHistory PathHistory::translated(const LatticePoint& v) const {
  PathHistory out(*model_, sites_.front() + v);
  for (int s : step_idx_) out.push_step(s);
  return out;
}

void PathHistory::check_consistency() const {
  for (std::size_t i = 0; i + 1 < sites_.size(); ++i)
    if (!(sites_[i] + model_->steps[step_idx_[i]] == sites_[i + 1]))
      throw InvariantError("history step index disagrees with its sites");
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    const auto& x = sites_[i];
    int v = 0;
    std::vector<int> dep(model_->num_steps(), 0);
    for (std::size_t j = 0; j < sites_.size(); ++j) {
      if (sites_[j] == x) {
        ++v;
        if (j + 1 < sites_.size()) ++dep[step_idx_[j]];
      }
    }
    if (visits(x) != v) throw InvariantError("visit count mismatch at " + x.str());
    for (int s = 0; s < model_->num_steps(); ++s)
      if (departures(x, s) != dep[s]) throw InvariantError("departure count mismatch at " + x.str());
  }
  for (std::size_t r = 0; r < index_.records(); ++r) {
    const auto& x = index_.key(static_cast<int>(r));
    if (std::find(sites_.begin(), sites_.end(), x) == sites_.end() && index_.visits(static_cast<int>(r)) != 0)
      throw InvariantError("stale visit count at " + x.str());
  }
}

// ---------------------------------------------------------------------------
// Step laws

double StepLaw::total() const {
  double s = 0;
  for (double p : prob) s += p;
  return s;
}

SignedField StepLaw::as_field(const LatticePoint& from) const {
  SignedField f(from.dim());
  for (std::size_t i = 0; i < steps.size(); ++i) f.add(from + steps[i], prob[i]);
  return f;
}

namespace {

void excited_law(const ModelSpec& m, bool revisit, std::span<double> out) {
  const double base = 1.0 / (2 * m.dim);
  for (int i = 0; i < m.num_steps(); ++i) {
    const double tilt = revisit ? 0.0 : m.beta * m.steps[i][0];
    out[i] = base * (1.0 + tilt);
  }
}

void reinforced_law(const ModelSpec& m, const ReinforcedWalk& r, std::span<const int> counts,
                    std::span<double> out) {
  double total = 0;
  for (int i = 0; i < m.num_steps(); ++i) {
    double w = r.initial_weights[i];
    const int l = std::min<int>(counts[i], static_cast<int>(r.reinforcement.size()));
    for (int t = 0; t < l; ++t) w += r.reinforcement[t];
    out[i] = w;
    total += w;
  }
  if (!(total > 0.0)) throw InvariantError("reinforced walk weight sum is not positive");
  for (int i = 0; i < m.num_steps(); ++i) out[i] /= total;
}

void environment_law(const ModelSpec& m, const RandomEnvironmentWalk& e, std::span<const int> counts,
                     std::span<double> out) {
  const int ns = m.num_steps();
  bool any = false;
  for (int i = 0; i < ns; ++i) any = any || counts[i] > 0;
  std::fill(out.begin(), out.end(), 0.0);
  if (!any) {
    for (const auto& a : e.atoms)
      for (int i = 0; i < ns; ++i) out[i] += a.probability * a.weights[i];
    return;
  }
  // Posterior over atoms given the departure counts, in log space.
  const std::size_t K = e.atoms.size();
  std::array<double, 8> lw{};
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    double l = std::log(e.atoms[k].probability);
    for (int i = 0; i < ns && std::isfinite(l); ++i) {
      if (counts[i] == 0) continue;
      const double w = e.atoms[k].weights[i];
      l = w > 0.0 ? l + counts[i] * std::log(w) : -std::numeric_limits<double>::infinity();
    }
    lw[k] = l;
    top = std::max(top, l);
  }
  if (!std::isfinite(top)) throw InvariantError("environment history has zero annealed probability");
  double z = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double p = std::isfinite(lw[k]) ? std::exp(lw[k] - top) : 0.0;
    z += p;
    for (int i = 0; i < ns; ++i) out[i] += p * e.atoms[k].weights[i];
  }
  for (int i = 0; i < ns; ++i) out[i] /= z;
}

}  // namespace

void step_law_into(const ModelSpec& m, const PathHistory& h, std::span<double> out) {
  switch (m.kind()) {
    case ModelKind::Base: {
      const auto& law = std::get<BaseWalk>(m.params).law;
      std::copy(law.begin(), law.end(), out.begin());
      return;
    }
    case ModelKind::Excited:
      excited_law(m, h.current_in_strict_past(), out);
      return;
    case ModelKind::Reinforced:
      reinforced_law(m, std::get<ReinforcedWalk>(m.params), h.current_departures(), out);
      return;
    case ModelKind::Environment:
      environment_law(m, std::get<RandomEnvironmentWalk>(m.params), h.current_departures(), out);
      return;
  }
}

StepLaw conditional_step_law(const ModelSpec& m, const PathHistory& h) {
  if (h.length() == 0) throw InvariantError("empty history");
  StepLaw law{m.steps, std::vector<double>(m.steps.size())};
  step_law_into(m, h, law.prob);
  return law;
}

StepLaw first_step_law(const ModelSpec& m) {
  return conditional_step_law(m, PathHistory(m, LatticePoint::origin(m.dim)));
}

SignedField first_step_field(const ModelSpec& m) { return first_step_law(m).as_field(LatticePoint::origin(m.dim)); }

double delta_factor(const ModelSpec& m, const PathHistory& outer, const PathHistory& inner,
                    const LatticePoint& step) {
  const int s = m.step_index(step);
  if (s < 0) throw InvariantError("delta step " + step.str() + " is not in the step set");
  const PathHistory joined = outer.concat(inner);
  std::vector<double> a(m.num_steps()), b(m.num_steps());
  step_law_into(m, joined, a);
  step_law_into(m, inner, b);
  return a[s] - b[s];
}

bool delta_indicator(const PathHistory& outer, const PathHistory& inner) {
  const auto& x = inner.current();
  const auto& sites = outer.sites();
  for (std::size_t i = 0; i + 1 < sites.size(); ++i)
    if (sites[i] == x) return true;
  return false;
}

double interaction_strength(const ModelSpec& m) {
  if (m.kind() == ModelKind::Base) return 0.0;
  if (m.kind() == ModelKind::Reinforced) {
    double b = 0;
    for (double x : std::get<ReinforcedWalk>(m.params).reinforcement) b += std::abs(x);
    return b;
  }
  return m.beta;
}

double delta_bound_constant(const ModelSpec& m) {
  switch (m.kind()) {
    case ModelKind::Base: return 0.0;
    case ModelKind::Excited: return 1.0;
    case ModelKind::Environment: return 2.0;
    case ModelKind::Reinforced: {
      // |w'/W' - w/W| <= |w' - w| / W' + |W' - W| / W' with every weight
      // moved by at most sum |beta_t| and W' >= the smallest reachable total.
      const auto& r = std::get<ReinforcedWalk>(m.params);
      double partial = 0, lowest = 0;
      for (double b : r.reinforcement) {
        partial += b;
        lowest = std::min(lowest, partial);
      }
      double wmin = 0;
      for (double w : r.initial_weights) wmin += w + lowest;
      return (1.0 + m.num_steps()) / wmin;
    }
  }
  return 0.0;
}

}  // namespace lace

namespace lace {

namespace {

struct DeltaSweep {
  const ModelSpec& m;
  int max_len;
  double tol;
  double C;
  double beta;
  DeltaBoundReport& rep;

  void inner_walk(const PathHistory& outer, PathHistory& combined, PathHistory& inner, int len) {
    const int ns = m.num_steps();
    std::vector<double> a(ns), b(ns);
    step_law_into(m, combined, a);
    step_law_into(m, inner, b);
    const bool ind = delta_indicator(outer, inner);
    for (int s = 0; s < ns; ++s) {
      const double delta = a[s] - b[s];
      ++rep.checked;
      if (delta != 0.0) ++rep.nonzero;
      const double bound = ind ? C * beta : 0.0;
      if (std::abs(delta) > bound + tol) ++rep.violations;
      if (ind && C * beta > 0) rep.max_ratio = std::max(rep.max_ratio, std::abs(delta) / (C * beta));
    }
    if (len == max_len) return;
    for (int s = 0; s < ns; ++s) {
      combined.push_step(s);
      inner.push_step(s);
      inner_walk(outer, combined, inner, len + 1);
      inner.pop();
      combined.pop();
    }
  }

  void outer_walk(PathHistory& outer, int len) {
    if (len >= 1) {
      PathHistory combined(outer);
      PathHistory inner(m, outer.current());
      inner_walk(outer, combined, inner, len);
    }
    if (len == max_len) return;
    for (int s = 0; s < m.num_steps(); ++s) {
      outer.push_step(s);
      outer_walk(outer, len + 1);
      outer.pop();
    }
  }
};

}  // namespace

DeltaBoundReport check_delta_bounds(const ModelSpec& model, int max_len, double tol) {
  DeltaBoundReport rep;
  rep.constant = delta_bound_constant(model);
  PathHistory outer(model, LatticePoint::origin(model.dim));
  DeltaSweep sweep{model, max_len, tol, rep.constant, interaction_strength(model), rep};
  sweep.outer_walk(outer, 0);
  rep.holds = rep.violations == 0;
  return rep;
}

}  // namespace lace
