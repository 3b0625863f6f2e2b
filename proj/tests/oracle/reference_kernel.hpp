#pragma once

// Slow reference implementations used as test oracles. Everything here is
// recomputed from the raw site list on every call, with no shared indices,
// so it is independent of the incremental bookkeeping in the library.

#include "lace/models.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace oracle {

using Site = std::vector<int>;
using Path = std::vector<Site>;
using Dist = std::map<Site, double>;

inline Site add(const Site& a, const Site& b) {
  Site s(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) s[i] = a[i] + b[i];
  return s;
}

inline Site sub(const Site& a, const Site& b) {
  Site s(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) s[i] = a[i] - b[i];
  return s;
}

inline std::vector<Site> steps_of(const lace::ModelSpec& m) {
  std::vector<Site> out;
  for (const auto& s : m.steps) out.push_back(s.coords());
  return out;
}

// p^{path}(current, current + steps[i]) straight from the model definitions.
inline std::vector<double> step_law(const lace::ModelSpec& m, const Path& path) {
  const auto steps = steps_of(m);
  const std::size_t ns = steps.size();
  const Site& cur = path.back();
  std::vector<double> p(ns, 0.0);
  switch (m.kind()) {
    case lace::ModelKind::Base:
      p = std::get<lace::BaseWalk>(m.params).law;
      break;
    case lace::ModelKind::Excited: {
      bool fresh = true;
      for (std::size_t i = 0; i + 1 < path.size(); ++i)
        if (path[i] == cur) fresh = false;
      const double b = fresh ? m.beta : 0.0;
      for (std::size_t s = 0; s < ns; ++s) p[s] = (1.0 + b * steps[s][0]) / (2.0 * m.dim);
      break;
    }
    case lace::ModelKind::Reinforced: {
      const auto& r = std::get<lace::ReinforcedWalk>(m.params);
      double total = 0.0;
      for (std::size_t s = 0; s < ns; ++s) {
        int traversals = 0;
        for (std::size_t i = 0; i + 1 < path.size(); ++i)
          if (path[i] == cur && sub(path[i + 1], path[i]) == steps[s]) ++traversals;
        double w = r.initial_weights[s];
        for (int t = 0; t < traversals && t < static_cast<int>(r.reinforcement.size()); ++t) w += r.reinforcement[t];
        p[s] = w;
        total += w;
      }
      for (double& x : p) x /= total;
      break;
    }
    case lace::ModelKind::Environment: {
      const auto& e = std::get<lace::RandomEnvironmentWalk>(m.params);
      std::vector<int> count(ns, 0);
      for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        if (path[i] != cur) continue;
        for (std::size_t s = 0; s < ns; ++s)
          if (sub(path[i + 1], path[i]) == steps[s]) ++count[s];
      }
      double z = 0.0;
      std::vector<double> post(e.atoms.size());
      for (std::size_t a = 0; a < e.atoms.size(); ++a) {
        double l = e.atoms[a].probability;
        for (std::size_t s = 0; s < ns; ++s) l *= std::pow(e.atoms[a].weights[s], count[s]);
        post[a] = l;
        z += l;
      }
      for (std::size_t a = 0; a < e.atoms.size(); ++a)
        for (std::size_t s = 0; s < ns; ++s) p[s] += post[a] / z * e.atoms[a].weights[s];
      break;
    }
  }
  return p;
}

// Law of the endpoint after n further steps of the walk continuing `start`,
// by listing every path.
inline Dist endpoint_law(const lace::ModelSpec& m, const Path& start, int n) {
  const auto steps = steps_of(m);
  Dist out;
  Path path = start;
  auto rec = [&](auto&& self, int left, double w) -> void {
    if (left == 0) {
      out[path.back()] += w;
      return;
    }
    const auto p = step_law(m, path);
    for (std::size_t s = 0; s < steps.size(); ++s) {
      if (p[s] == 0.0) continue;
      path.push_back(add(path.back(), steps[s]));
      self(self, left - 1, w * p[s]);
      path.pop_back();
    }
  };
  rec(rec, n, 1.0);
  return out;
}

// Every path from `start` with exactly n steps.
inline std::vector<Path> all_paths(const lace::ModelSpec& m, const Site& start, int n) {
  const auto steps = steps_of(m);
  std::vector<Path> out;
  Path path{start};
  auto rec = [&](auto&& self, int left) -> void {
    if (left == 0) {
      out.push_back(path);
      return;
    }
    for (const auto& s : steps) {
      path.push_back(add(path.back(), s));
      self(self, left - 1);
      path.pop_back();
    }
  };
  rec(rec, n);
  return out;
}

inline double max_diff(const Dist& a, const lace::SignedField& f) {
  double worst = 0.0;
  for (const auto& [x, w] : a) worst = std::max(worst, std::abs(w - f.at(lace::LatticePoint(x))));
  for (const auto& [x, w] : f.entries()) {
    auto it = a.find(x.coords());
    worst = std::max(worst, std::abs(w - (it == a.end() ? 0.0 : it->second)));
  }
  return worst;
}

}  // namespace oracle
