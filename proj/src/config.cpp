#include "qctraj/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace qctraj {

namespace {

using nlohmann::json;

class Violations {
 public:
  void add(const std::string& msg) { items_.push_back(msg); }
  bool empty() const { return items_.empty(); }
  [[noreturn]] void raise() const {
    std::ostringstream os;
    os << "invalid configuration (" << items_.size() << " problem(s)):";
    for (const auto& m : items_) os << "\n  - " << m;
    throw ConfigError(os.str());
  }

 private:
  std::vector<std::string> items_;
};

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where,
                Violations& v) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      v.add(where + ": unknown key '" + it.key() + "'");
    }
  }
}

std::vector<double> as_vector(const json& j) {
  std::vector<double> out;
  for (const auto& e : j) out.push_back(e.get<double>());
  return out;
}

StateVector basis_ket(int n, int index) {
  StateVector v = StateVector::Zero(n);
  v(index) = 1.0;
  return v;
}

StateVector bell(int a, int b, Complex relative_phase) {
  StateVector v = StateVector::Zero(4);
  v(a) = 1.0 / std::sqrt(2.0);
  v(b) = relative_phase / std::sqrt(2.0);
  return v;
}

}  // namespace

Operator named_state(const std::string& name, int n) {
  auto projector = [](const StateVector& v) { return Operator(v * v.adjoint()); };
  if (name == "maximally_mixed") return maximally_mixed(n);
  if (name == "ground") return projector(basis_ket(n, 0));
  if (n == 4) {
    if (name == "ket_00") return projector(basis_ket(4, 0));
    if (name == "ket_01") return projector(basis_ket(4, 1));
    if (name == "ket_10") return projector(basis_ket(4, 2));
    if (name == "ket_11") return projector(basis_ket(4, 3));
    if (name == "bell_phi_plus") return projector(bell(0, 3, {1, 0}));
    if (name == "bell_phi_minus") return projector(bell(0, 3, {-1, 0}));
    if (name == "bell_psi_plus") return projector(bell(1, 2, {1, 0}));
    if (name == "bell_psi_minus") return projector(bell(1, 2, {-1, 0}));
  }
  throw ConfigError("unknown initial state '" + name + "' for dimension " + std::to_string(n));
}

Operator RunConfig::initial_state() const {
  if (init_matrix) return *init_matrix;
  return named_state(init_state, model.n);
}

ClassicalPoint RunConfig::initial_point() const {
  if (init_x.size() == 0) return ClassicalPoint::Zero(model.s);
  return init_x;
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");

  Violations v;
  RunConfig cfg;
  cfg.raw = doc;

  check_keys(doc,
             {"model", "mode", "trajectories", "horizon", "dt", "seed", "workers", "batches",
              "init", "outputs", "bins", "checks", "output_dir"},
             "top level", v);

  // model
  if (!doc.contains("model") || !doc["model"].is_object()) {
    v.add("'model' object is required");
  } else {
    const json& jm = doc["model"];
    check_keys(jm, {"name", "params"}, "model", v);
    if (!jm.contains("name") || !jm["name"].is_string()) {
      v.add("model.name is required");
    } else {
      cfg.model_params.name = jm["name"].get<std::string>();
    }
    if (jm.contains("params")) {
      for (auto it = jm["params"].begin(); it != jm["params"].end(); ++it) {
        if (it->is_number()) {
          cfg.model_params.scalars[it.key()] = it->get<double>();
        } else if (it->is_array()) {
          cfg.model_params.vectors[it.key()] = as_vector(*it);
        } else {
          v.add("model.params." + it.key() + " must be a number or an array");
        }
      }
    }
  }

  const std::string mode = doc.value("mode", std::string("both"));
  if (mode == "Q") {
    cfg.run_q = true;
    cfg.run_p = false;
  } else if (mode == "P") {
    cfg.run_q = false;
    cfg.run_p = true;
  } else if (mode == "both") {
    cfg.run_q = cfg.run_p = true;
  } else {
    v.add("mode must be one of Q, P, both");
  }

  cfg.trajectories = doc.value("trajectories", cfg.trajectories);
  if (cfg.trajectories < 1) v.add("trajectories must be >= 1");
  cfg.horizon = doc.value("horizon", cfg.horizon);
  if (!(cfg.horizon >= 0)) v.add("horizon must be nonnegative");
  cfg.dt = doc.value("dt", cfg.dt);
  if (!(cfg.dt > 0)) v.add("dt must be positive");
  cfg.seed = doc.value("seed", cfg.seed);
  cfg.workers = doc.value("workers", cfg.workers);
  if (cfg.workers < 0) v.add("workers must be >= 0");
  cfg.batches = doc.value("batches", cfg.batches);
  if (cfg.batches < 2) v.add("batches must be >= 2");
  cfg.output_dir = doc.value("output_dir", cfg.output_dir);

  if (doc.contains("init")) {
    const json& ji = doc["init"];
    check_keys(ji, {"x", "state", "matrix_re", "matrix_im"}, "init", v);
    if (ji.contains("x")) {
      const auto x = as_vector(ji["x"]);
      cfg.init_x = Eigen::Map<const ClassicalPoint>(x.data(), x.size());
    }
    if (ji.contains("state")) cfg.init_state = ji["state"].get<std::string>();
    if (ji.contains("matrix_re")) {
      const json& re = ji["matrix_re"];
      const int n = static_cast<int>(re.size());
      Operator m = Operator::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          m(i, j) = Complex(re[i][j].get<double>(),
                            ji.contains("matrix_im") ? ji["matrix_im"][i][j].get<double>() : 0.0);
        }
      }
      cfg.init_matrix = m;
    }
  }

  if (doc.contains("outputs")) {
    const json& jo = doc["outputs"];
    check_keys(jo,
               {"paths", "marginals", "a_priori", "concurrence", "times", "state_stride",
                "max_path_rows"},
               "outputs", v);
    cfg.outputs.paths = jo.value("paths", cfg.outputs.paths);
    cfg.outputs.marginals = jo.value("marginals", cfg.outputs.marginals);
    cfg.outputs.a_priori = jo.value("a_priori", cfg.outputs.a_priori);
    cfg.outputs.concurrence = jo.value("concurrence", cfg.outputs.concurrence);
    if (jo.contains("times")) cfg.outputs.times = as_vector(jo["times"]);
    cfg.outputs.state_stride = jo.value("state_stride", cfg.outputs.state_stride);
    if (cfg.outputs.state_stride < 0) v.add("outputs.state_stride must be >= 0");
    cfg.outputs.max_path_rows = jo.value("max_path_rows", cfg.outputs.max_path_rows);
  }
  if (cfg.outputs.times.empty()) cfg.outputs.times = {cfg.horizon};

  if (doc.contains("bins")) {
    const json& jb = doc["bins"];
    check_keys(jb, {"lo", "hi", "per_axis"}, "bins", v);
    if (!jb.contains("lo") || !jb.contains("hi")) {
      v.add("bins requires lo and hi arrays");
    } else {
      const auto lo = as_vector(jb["lo"]);
      const auto hi = as_vector(jb["hi"]);
      const int per_axis = jb.value("per_axis", 32);
      if (lo.size() != hi.size()) {
        v.add("bins.lo and bins.hi must have equal lengths");
      } else {
        try {
          cfg.bins = BinSpec::uniform(Eigen::Map<const ClassicalPoint>(lo.data(), lo.size()),
                                      Eigen::Map<const ClassicalPoint>(hi.data(), hi.size()),
                                      per_axis);
        } catch (const ConfigError& e) {
          v.add(e.what());
        }
      }
    }
  }

  if (doc.contains("checks")) {
    for (const auto& jc : doc["checks"]) {
      check_keys(jc, {"name", "tolerance", "horizon", "times"}, "checks[]", v);
      CheckConfig cc;
      if (!jc.contains("name")) {
        v.add("every check needs a name");
        continue;
      }
      cc.name = jc["name"].get<std::string>();
      static const std::set<std::string> known = {"martingale",       "equilibrium",
                                                  "mode_equivalence", "purity",
                                                  "concurrence_constant", "point_mass_law"};
      if (!known.count(cc.name)) {
        std::ostringstream os;
        os << "unknown check '" << cc.name << "'; available:";
        for (const auto& k : known) os << " " << k;
        v.add(os.str());
      }
      if (jc.contains("tolerance")) cc.tolerance = jc["tolerance"].get<double>();
      if (jc.contains("horizon")) cc.horizon = jc["horizon"].get<double>();
      if (jc.contains("times")) cc.times = as_vector(jc["times"]);
      cfg.checks.push_back(cc);
    }
  }

  // Build the model and revalidate grid constraints against it.
  if (!cfg.model_params.name.empty()) {
    try {
      cfg.model = build_model(cfg.model_params);
      validate_model(cfg.model, cfg.seed);
      if (cfg.model.max_rate() * cfg.dt > 0.1 + 1e-12) {
        std::ostringstream os;
        os << "dt=" << cfg.dt << " violates lambda_max*dt <= 0.1 (lambda_max="
           << cfg.model.max_rate() << " for model '" << cfg.model.name << "')";
        v.add(os.str());
      }
      if (cfg.init_x.size() != 0 && cfg.init_x.size() != cfg.model.s) {
        v.add("init.x has length " + std::to_string(cfg.init_x.size()) + ", model needs " +
              std::to_string(cfg.model.s));
      }
      if (!cfg.init_matrix) {
        try {
          named_state(cfg.init_state, cfg.model.n);
        } catch (const ConfigError& e) {
          v.add(e.what());
        }
      } else if (cfg.init_matrix->rows() != cfg.model.n) {
        v.add("init matrix has wrong dimension for the model");
      }
    } catch (const ConfigError& e) {
      v.add(e.what());
    }
  }

  const long steps = std::lround(cfg.horizon / cfg.dt);
  if (cfg.dt > 0 && std::abs(steps * cfg.dt - cfg.horizon) > 1e-9 * std::max(1.0, cfg.horizon)) {
    v.add("dt must divide the horizon within rounding");
  }
  for (double t : cfg.outputs.times) {
    if (t < 0 || t > cfg.horizon + 1e-12) v.add("output time " + std::to_string(t) +
                                                " outside [0, horizon]");
  }
  if (cfg.outputs.paths && cfg.outputs.state_stride != 1) {
    v.add("paths output requires state_stride == 1");
  }

  if (!v.empty()) v.raise();
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

}  // namespace qctraj
