#include "lace/errors.hpp"
#include "lace/models.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <sstream>

namespace lace {

namespace {

struct Loader {
  std::string source;

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    const auto mark = at.Mark();
    std::string where = source;
    if (mark.line >= 0) where += ":" + std::to_string(mark.line + 1) + ":" + std::to_string(mark.column + 1);
    throw ConfigError(where + ": " + msg);
  }

  YAML::Node require(const YAML::Node& parent, const char* key) const {
    YAML::Node n = parent[key];
    if (!n) fail(parent, std::string("missing key '") + key + "'");
    return n;
  }

  template <class T>
  T scalar(const YAML::Node& n, const char* what) const {
    if (!n.IsScalar()) fail(n, std::string(what) + " must be a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, std::string("cannot read ") + what);
    }
  }

  std::vector<double> reals(const YAML::Node& n, const char* what) const {
    if (!n.IsSequence()) fail(n, std::string(what) + " must be a list of numbers");
    std::vector<double> out;
    for (const auto& e : n) out.push_back(scalar<double>(e, what));
    return out;
  }

  std::vector<LatticePoint> points(const YAML::Node& n, int dim, const char* what) const {
    if (!n.IsSequence()) fail(n, std::string(what) + " must be a list of integer vectors");
    std::vector<LatticePoint> out;
    for (const auto& e : n) {
      if (!e.IsSequence() || static_cast<int>(e.size()) != dim)
        fail(e, std::string(what) + " entries must have " + std::to_string(dim) + " coordinates");
      std::vector<int> c;
      for (const auto& v : e) c.push_back(scalar<int>(v, what));
      out.emplace_back(c);
    }
    return out;
  }

  void checked_validate(const ModelSpec& m, const YAML::Node& at) const {
    try {
      validate(m);
    } catch (const ConfigError& e) {
      // Point at the key the message names, when the document has it.
      const std::string msg = e.what();
      for (const char* key : {"initial_weights", "reinforcement", "probability", "atoms", "weights", "law",
                              "steps", "beta", "d0", "d1", "dim"}) {
        if (msg.find(key) != std::string::npos && at[key]) fail(at[key], msg);
      }
      fail(at, msg);
    }
  }

  ModelSpec load(const YAML::Node& root) const {
    if (!root.IsMap()) fail(root, "model config must be a mapping");
    ModelSpec m;
    m.name = root["name"] ? scalar<std::string>(root["name"], "name") : "model";
    const YAML::Node vnode = require(root, "variant");
    const auto variant = scalar<std::string>(vnode, "variant");
    const YAML::Node dnode = require(root, "dim");
    m.dim = scalar<int>(dnode, "dim");
    if (m.dim < 1 || m.dim > kMaxDim) fail(dnode, "dim must be in [1, " + std::to_string(kMaxDim) + "]");
    const YAML::Node bnode = root["beta"];
    const bool has_beta = static_cast<bool>(bnode);
    if (has_beta) m.beta = scalar<double>(bnode, "beta");

    if (variant == "base") {
      m.steps = root["steps"] ? points(root["steps"], m.dim, "steps") : unit_steps(m.dim);
      m.params = BaseWalk{reals(require(root, "law"), "law")};
      m.beta = 0.0;
    } else if (variant == "excited") {
      if (!has_beta) fail(root, "missing key 'beta'");
      m.steps = unit_steps(m.dim);
      m.params = ExcitedWalk{};
    } else if (variant == "reinforced") {
      m.steps = root["steps"] ? points(root["steps"], m.dim, "steps") : unit_steps(m.dim);
      ReinforcedWalk r;
      r.initial_weights = reals(require(root, "initial_weights"), "initial_weights");
      if (root["reinforcement"]) {
        r.reinforcement = reals(root["reinforcement"], "reinforcement");
        double total = 0;
        for (double b : r.reinforcement) total += std::abs(b);
        if (has_beta && std::abs(total - m.beta) > 1e-12)
          fail(bnode, "beta must equal the sum of |reinforcement|");
        m.beta = total;
      } else {
        if (!has_beta) fail(root, "reinforced walk needs 'beta' or 'reinforcement'");
        r.reinforcement = {m.beta};
        m.beta = std::abs(m.beta);
      }
      m.params = std::move(r);
    } else if (variant == "environment") {
      RandomEnvironmentWalk e;
      e.d0 = scalar<int>(require(root, "d0"), "d0");
      e.d1 = scalar<int>(require(root, "d1"), "d1");
      if (e.d0 + e.d1 != m.dim) fail(dnode, "dim must equal d0 + d1");
      m.steps = unit_steps(m.dim);
      const YAML::Node atoms = require(root, "atoms");
      if (!atoms.IsSequence()) fail(atoms, "atoms must be a list");
      for (const auto& a : atoms) {
        if (!a.IsMap()) fail(a, "atom must be a mapping with 'probability' and 'weights'");
        e.atoms.push_back({reals(require(a, "weights"), "weights"),
                           scalar<double>(require(a, "probability"), "probability")});
      }
      if (!has_beta) {
        // Smallest beta compatible with the atoms.
        std::vector<double> mean(m.steps.size(), 0.0);
        for (const auto& a : e.atoms)
          for (std::size_t u = 0; u < mean.size() && u < a.weights.size(); ++u) mean[u] += a.probability * a.weights[u];
        double b = 0;
        for (const auto& a : e.atoms)
          for (std::size_t u = 0; u < mean.size() && u < a.weights.size(); ++u)
            b = std::max(b, std::abs(a.weights[u] - mean[u]));
        m.beta = b;
      }
      m.params = std::move(e);
    } else {
      fail(vnode, "unknown variant '" + variant + "' (expected base, excited, reinforced, environment)");
    }
    checked_validate(m, root);
    return m;
  }
};

}  // namespace

ModelSpec parse_model(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                      ": " + e.msg);
  }
  return Loader{source}.load(root);
}

ModelSpec load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open model config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str(), path);
}

nlohmann::json model_to_json(const ModelSpec& m) {
  nlohmann::json j;
  j["name"] = m.name;
  j["variant"] = to_string(m.kind());
  j["dim"] = m.dim;
  j["beta"] = m.beta;
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : m.steps) steps.push_back(s.coords());
  j["steps"] = steps;
  switch (m.kind()) {
    case ModelKind::Base: j["law"] = std::get<BaseWalk>(m.params).law; break;
    case ModelKind::Excited: break;
    case ModelKind::Reinforced: {
      const auto& r = std::get<ReinforcedWalk>(m.params);
      j["initial_weights"] = r.initial_weights;
      j["reinforcement"] = r.reinforcement;
      break;
    }
    case ModelKind::Environment: {
      const auto& e = std::get<RandomEnvironmentWalk>(m.params);
      j["d0"] = e.d0;
      j["d1"] = e.d1;
      nlohmann::json atoms = nlohmann::json::array();
      for (const auto& a : e.atoms) atoms.push_back({{"probability", a.probability}, {"weights", a.weights}});
      j["atoms"] = atoms;
      break;
    }
  }
  return j;
}

}  // namespace lace
