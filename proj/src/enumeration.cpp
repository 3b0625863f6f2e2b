#include "lace/enumeration.hpp"

#include "lace/errors.hpp"
#include "lace/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace lace {

namespace {

using Acc = std::unordered_map<LatticePoint, double, LatticePointHash>;

constexpr std::size_t kMinTasks = 64;

struct Walker {
  const ModelSpec& model;
  int depth_limit;
  std::vector<Acc>& acc;  // acc[j] collects positions after j steps
  std::vector<std::vector<double>> laws;

  Walker(const ModelSpec& m, int n, std::vector<Acc>& a)
      : model(m), depth_limit(n), acc(a), laws(n + 1, std::vector<double>(m.num_steps())) {}

  void run(PathHistory& h, int depth, double p) {
    acc[depth][h.current()] += p;
    if (depth == depth_limit) return;
    auto& law = laws[depth];
    step_law_into(model, h, law);
    for (int s = 0; s < model.num_steps(); ++s) {
      if (law[s] == 0.0) continue;
      h.push_step(s);
      run(h, depth + 1, p * law[s]);
      h.pop();
    }
  }
};

struct Prefix {
  std::vector<int> steps;
  double prob;
};

// Serial sweep to depth p recording every depth-p node in DFS order.
void collect_prefixes(const ModelSpec& m, PathHistory& h, int depth, int p, double prob, std::vector<int>& path,
                      std::vector<Acc>& acc, std::vector<Prefix>& out) {
  if (depth == p) {
    out.push_back({path, prob});
    return;
  }
  acc[depth][h.current()] += prob;
  std::vector<double> law(m.num_steps());
  step_law_into(m, h, law);
  for (int s = 0; s < m.num_steps(); ++s) {
    if (law[s] == 0.0) continue;
    h.push_step(s);
    path.push_back(s);
    collect_prefixes(m, h, depth + 1, p, prob * law[s], path, acc, out);
    path.pop_back();
    h.pop();
  }
}

void check_budget(double cost, double budget) {
  if (cost > budget) {
    std::ostringstream os;
    os << "enumeration needs " << cost << " node visits, over the budget of " << budget
       << " (raise --budget or lower n)";
    throw ResourceError("budget", os.str());
  }
}

void merge_into(SignedField::Map& dst, const Acc& src) {
  for (const auto& [x, w] : src) dst[x] += w;
}

}  // namespace

double enumeration_cost(int num_steps, int n) {
  double total = 0, level = 1;
  for (int j = 0; j <= n; ++j) {
    total += level;
    level *= num_steps;
  }
  return total;
}

std::vector<SignedField> conditional_two_point_sequence(const ModelSpec& m, const PathHistory& start, int n,
                                                        const EnumerationOptions& opts) {
  if (n < 0) throw ConfigError("walk length must be nonnegative");
  check_budget(enumeration_cost(m.num_steps(), n), opts.budget);

  int p = 0;
  double width = 1;
  while (p < n && width < kMinTasks) {
    width *= m.num_steps();
    ++p;
  }

  std::vector<Acc> head(n + 1);
  std::vector<Prefix> prefixes;
  {
    PathHistory h(start);
    std::vector<int> path;
    collect_prefixes(m, h, 0, p, 1.0, path, head, prefixes);
  }

  std::vector<std::vector<Acc>> parts(prefixes.size());
  parallel_for(prefixes.size(), opts.threads, [&](std::size_t t) {
    parts[t].assign(n + 1, Acc{});
    PathHistory h(start);
    for (int s : prefixes[t].steps) h.push_step(s);
    Walker w(m, n, parts[t]);
    w.run(h, p, prefixes[t].prob);
  });

  std::vector<SignedField> out;
  out.reserve(n + 1);
  for (int j = 0; j <= n; ++j) {
    SignedField::Map entries;
    merge_into(entries, head[j]);
    for (const auto& part : parts) merge_into(entries, part[j]);
    out.emplace_back(m.dim, std::move(entries));
  }
  return out;
}

std::vector<SignedField> two_point_sequence(const ModelSpec& m, int n, const EnumerationOptions& opts) {
  return conditional_two_point_sequence(m, PathHistory(m, LatticePoint::origin(m.dim)), n, opts);
}

SignedField two_point(const ModelSpec& m, int n, const EnumerationOptions& opts) {
  return two_point_sequence(m, n, opts).back();
}

SignedField conditional_two_point(const ModelSpec& m, const PathHistory& eta, int n, const EnumerationOptions& opts) {
  if (eta.length() == 0) throw ConfigError("conditioning history is empty");
  return conditional_two_point_sequence(m, eta, n, opts).back();
}

ExactMoments exact_moments(const std::vector<SignedField>& c) {
  ExactMoments out;
  for (const auto& f : c) {
    Moments mo = moments(f);
    out.mean.push_back(mo.first);
    out.second.push_back(mo.second);
    out.covariance.push_back(mo.second - mo.first * mo.first.transpose());
  }
  return out;
}

ExactMoments exact_moments(const ModelSpec& m, int n, const EnumerationOptions& opts) {
  return exact_moments(two_point_sequence(m, n, opts));
}

ReturnProbability sup_return_probability(const ModelSpec& m, int n, int history_len, const EnumerationOptions& opts) {
  if (n < 0 || history_len < 0) throw ConfigError("lengths must be nonnegative");
  const double histories = enumeration_cost(m.num_steps(), history_len);
  check_budget(histories * enumeration_cost(m.num_steps(), n), opts.budget);

  // All step sequences of length <= history_len, in DFS order.
  std::vector<std::vector<int>> etas;
  std::vector<int> path;
  auto gen = [&](auto&& self, int depth) -> void {
    etas.push_back(path);
    if (depth == history_len) return;
    for (int s = 0; s < m.num_steps(); ++s) {
      path.push_back(s);
      self(self, depth + 1);
      path.pop_back();
    }
  };
  gen(gen, 0);

  std::vector<ReturnProbability> part(etas.size());
  parallel_for(etas.size(), opts.threads, [&](std::size_t t) {
    PathHistory h(m, LatticePoint::origin(m.dim));
    for (int s : etas[t]) h.push_step(s);
    const LatticePoint home = h.current();
    std::vector<Acc> acc(n + 1);
    Walker w(m, n, acc);
    w.run(h, 0, 1.0);
    ReturnProbability r;
    for (const auto& [x, p] : acc[n]) {
      if (x == home) r.sup_return = p;
      r.sup_any = std::max(r.sup_any, p);
    }
    part[t] = r;
  });

  ReturnProbability best;
  for (const auto& r : part) {
    best.sup_return = std::max(best.sup_return, r.sup_return);
    best.sup_any = std::max(best.sup_any, r.sup_any);
  }
  return best;
}

}  // namespace lace
