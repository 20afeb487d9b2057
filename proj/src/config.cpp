#include "chainmpc/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace chainmpc {

namespace {

// Degrees for the written document, rounded so that 30 deg does not print as 29.999999999999996.
double degrees(double rad) { return std::round(rad2deg(rad) * 1e9) / 1e9; }

using nlohmann::json;

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Reads keys out of one JSON object and reports whatever was not consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + display() + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(j_.at(key), join(path_, key));
  }

  void number(const std::string& key, double& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError("'" + join(path_, key) + "' must be a number");
    out = v.get<double>();
  }

  void integer(const std::string& key, int& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError("'" + join(path_, key) + "' must be an integer");
    out = v.get<int>();
  }

  void unsigned_integer(const std::string& key, std::uint64_t& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
      throw ConfigError("'" + join(path_, key) + "' must be a nonnegative integer");
    }
    out = v.get<std::uint64_t>();
  }

  void string(const std::string& key, std::string& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError("'" + join(path_, key) + "' must be a string");
    out = v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::initializer_list<std::size_t> sizes) {
    seen_.insert(key);
    const json& v = j_.at(key);
    const std::string name = join(path_, key);
    if (!v.is_array()) throw ConfigError("'" + name + "' must be an array");
    bool size_ok = false;
    for (std::size_t s : sizes) size_ok = size_ok || v.size() == s;
    if (!size_ok) {
      std::string allowed;
      for (std::size_t s : sizes) allowed += (allowed.empty() ? "" : " or ") + std::to_string(s);
      throw ConfigError("'" + name + "' must have " + allowed + " entries, got " + std::to_string(v.size()));
    }
    std::vector<double> out;
    for (const json& e : v) {
      if (!e.is_number()) throw ConfigError("'" + name + "' must contain numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  void pair(const std::string& key, double& a, double& b) {
    if (!has(key)) return;
    const std::vector<double> v = numbers(key, {2});
    a = v[0];
    b = v[1];
  }

  void vec2(const std::string& key, Eigen::Vector2d& out) {
    if (!has(key)) return;
    const std::vector<double> v = numbers(key, {2});
    out = Eigen::Vector2d(v[0], v[1]);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown configuration key '" + join(path_, it.key()) + "'");
    }
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string display() const { return path_.empty() ? "<root>" : path_; }
  const std::string& path() const { return path_; }

 private:
  bool take(const std::string& key) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Short weight lists give one entry per output pair; full-length lists are taken as given.
template <int Dim>
Eigen::Matrix<double, Dim, 1> expand_weights(const std::vector<double>& w) {
  Eigen::Matrix<double, Dim, 1> out;
  if (static_cast<int>(w.size()) == Dim) {
    for (int i = 0; i < Dim; ++i) out(i) = w[static_cast<std::size_t>(i)];
  } else {
    for (int i = 0; i < Dim; ++i) out(i) = w[static_cast<std::size_t>(i / 2)];
  }
  return out;
}

void read_physical(Section s, Params& p) {
  s.pair("m", p.m1, p.m2);
  s.pair("l", p.l1, p.l2);
  s.pair("J", p.J1, p.J2);
  s.number("g", p.g);
  s.finish();
}

void read_uncertainty(Section s, UncertaintyBox& box) {
  s.pair("delta_m_max", box.bounds(dp::m1), box.bounds(dp::m2));
  s.pair("delta_l_max", box.bounds(dp::l1), box.bounds(dp::l2));
  s.pair("delta_J_max", box.bounds(dp::J1), box.bounds(dp::J2));
  s.finish();
}

void read_constraints(Section s, OcpConfig& ocp) {
  BoxSets& b = ocp.boxes;
  s.number("fR_min", b.fR_min);
  s.number("fR_max", b.fR_max);
  s.number("tau_min", b.tau_min);
  s.number("tau_max", b.tau_max);
  s.number("dfR_min", b.dfR_min);
  s.number("dfR_max", b.dfR_max);
  s.number("dtau_min", b.dtau_min);
  s.number("dtau_max", b.dtau_max);
  double dphi_deg = rad2deg(ocp.dphi_min);
  s.number("dphi_min_deg", dphi_deg);
  ocp.dphi_min = deg2rad(dphi_deg);
  s.finish();
}

void read_qp(Section s, QpSettings& qp) {
  std::string method = qp.method == QpMethod::admm ? "admm" : "active_set";
  s.string("method", method);
  if (method == "active_set") {
    qp.method = QpMethod::active_set;
  } else if (method == "admm") {
    qp.method = QpMethod::admm;
  } else {
    throw ConfigError("'" + join(s.path(), "method") + "' must be \"active_set\" or \"admm\"");
  }
  s.number("tol_abs", qp.tol_abs);
  s.number("tol_rel", qp.tol_rel);
  s.integer("max_iter", qp.max_iter);
  s.number("rho", qp.rho);
  s.number("infeasibility_tol", qp.infeasibility_tol);
  s.finish();
}

void read_ocp(Section s, OcpConfig& ocp) {
  s.integer("N", ocp.N);
  s.number("Ts", ocp.Ts);
  if (s.has("Q")) ocp.Q = expand_weights<kOutputDim>(s.numbers("Q", {4, 8}));
  if (s.has("Q_N")) ocp.Q_N = expand_weights<kTerminalOutputDim>(s.numbers("Q_N", {2, 4}));
  s.number("eps_s", ocp.eps_s);
  s.number("lambda_reg", ocp.lambda_reg);
  if (s.has("qp")) read_qp(s.child("qp"), ocp.qp);
  s.finish();
}

void read_reference(Section s, RunConfig& cfg) {
  EllipseSpec& e = cfg.sim.ellipse;
  s.number("xc", e.xc);
  s.number("zc", e.zc);
  s.number("ax", e.ax);
  s.number("az", e.az);
  s.number("T", e.T);
  s.number("eps_r", e.eps_r);
  s.number("dt", cfg.reference_dt);
  s.vec2("fL_d", cfg.sim.fL_d);
  s.finish();
}

void read_simulation(Section s, SimConfig& sim) {
  s.number("plant_dt", sim.plant_dt);
  s.number("duration", sim.duration);
  if (s.has("e_phi0_deg")) {
    const std::vector<double> v = s.numbers("e_phi0_deg", {2});
    sim.e_phi0 = Eigen::Vector2d(deg2rad(v[0]), deg2rad(v[1]));
  }
  if (s.has("p_true")) {
    const std::vector<double> v = s.numbers("p_true", {kParamDim});
    for (int i = 0; i < kParamDim; ++i) sim.p_true(i) = v[static_cast<std::size_t>(i)];
  }
  if (s.has("Pi0")) {
    const json& v = s.raw("Pi0");
    const std::string name = join(s.path(), "Pi0");
    if (v.is_number()) {
      sim.Pi0.setConstant(v.get<double>());
    } else if (v.is_array() && v.size() == kStateDim) {
      for (int r = 0; r < kStateDim; ++r) {
        const json& row = v[static_cast<std::size_t>(r)];
        if (!row.is_array() || row.size() != kParamDim) {
          throw ConfigError("'" + name + "' rows must have " + std::to_string(kParamDim) + " entries");
        }
        for (int c = 0; c < kParamDim; ++c) {
          const json& e = row[static_cast<std::size_t>(c)];
          if (!e.is_number()) throw ConfigError("'" + name + "' must contain numbers");
          sim.Pi0(r, c) = e.get<double>();
        }
      }
    } else {
      throw ConfigError("'" + name + "' must be a number or a 12 x 6 array");
    }
  }
  s.finish();
}

void read_montecarlo(Section s, McConfig& mc) {
  s.integer("n_sim", mc.n_sim);
  s.number("eps_tol", mc.eps_tol);
  s.unsigned_integer("seed", mc.seed);
  s.integer("workers", mc.workers);
  if (s.has("controllers")) {
    const json& v = s.raw("controllers");
    const std::string name = join(s.path(), "controllers");
    if (!v.is_array()) throw ConfigError("'" + name + "' must be an array");
    mc.controllers.clear();
    for (const json& e : v) {
      if (!e.is_string()) throw ConfigError("'" + name + "' must contain strings");
      try {
        mc.controllers.push_back(parse_mode(e.get<std::string>()));
      } catch (const std::invalid_argument& ex) {
        throw ConfigError("'" + name + "': " + ex.what());
      }
    }
  }
  s.finish();
}

template <typename F>
void rethrow_as_config(F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

RunConfig default_config() {
  RunConfig cfg;
  cfg.mc.box = cfg.sim.ocp.uncertainty;
  return cfg;
}

RunConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
  RunConfig cfg = default_config();
  Section root(doc, "");
  if (root.has("physical")) read_physical(root.child("physical"), cfg.sim.ocp.nominal);
  if (root.has("uncertainty")) read_uncertainty(root.child("uncertainty"), cfg.sim.ocp.uncertainty);
  if (root.has("constraints")) read_constraints(root.child("constraints"), cfg.sim.ocp);
  if (root.has("ocp")) read_ocp(root.child("ocp"), cfg.sim.ocp);
  if (root.has("reference")) read_reference(root.child("reference"), cfg);
  if (root.has("simulation")) read_simulation(root.child("simulation"), cfg.sim);
  if (root.has("montecarlo")) read_montecarlo(root.child("montecarlo"), cfg.mc);
  root.string("output_dir", cfg.output_dir);
  root.finish();
  // The controller tightens for the same box the campaign samples from.
  cfg.mc.box = cfg.sim.ocp.uncertainty;
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open configuration file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) {
  const Params& p = cfg.sim.ocp.nominal;
  const OcpConfig& o = cfg.sim.ocp;
  const BoxSets& b = o.boxes;
  const DeviationVector& d = o.uncertainty.bounds;
  const EllipseSpec& e = cfg.sim.ellipse;
  nlohmann::ordered_json j;
  j["physical"] = {{"m", {p.m1, p.m2}}, {"l", {p.l1, p.l2}}, {"J", {p.J1, p.J2}}, {"g", p.g}};
  j["uncertainty"] = {{"delta_m_max", {d(dp::m1), d(dp::m2)}},
                      {"delta_l_max", {d(dp::l1), d(dp::l2)}},
                      {"delta_J_max", {d(dp::J1), d(dp::J2)}}};
  j["constraints"] = {{"fR_min", b.fR_min},   {"fR_max", b.fR_max},   {"tau_min", b.tau_min},
                      {"tau_max", b.tau_max}, {"dfR_min", b.dfR_min}, {"dfR_max", b.dfR_max},
                      {"dtau_min", b.dtau_min}, {"dtau_max", b.dtau_max},
                      {"dphi_min_deg", degrees(o.dphi_min)}};
  j["ocp"] = {{"N", o.N},
              {"Ts", o.Ts},
              {"Q", std::vector<double>(o.Q.data(), o.Q.data() + kOutputDim)},
              {"Q_N", std::vector<double>(o.Q_N.data(), o.Q_N.data() + kTerminalOutputDim)},
              {"eps_s", o.eps_s},
              {"lambda_reg", o.lambda_reg},
              {"qp",
               {{"method", o.qp.method == QpMethod::admm ? "admm" : "active_set"},
                {"tol_abs", o.qp.tol_abs},
                {"tol_rel", o.qp.tol_rel},
                {"max_iter", o.qp.max_iter},
                {"rho", o.qp.rho},
                {"infeasibility_tol", o.qp.infeasibility_tol}}}};
  j["reference"] = {{"xc", e.xc}, {"zc", e.zc},       {"ax", e.ax}, {"az", e.az},
                    {"T", e.T},   {"eps_r", e.eps_r}, {"dt", cfg.reference_dt},
                    {"fL_d", {cfg.sim.fL_d(0), cfg.sim.fL_d(1)}}};
  nlohmann::ordered_json pi = nlohmann::ordered_json::array();
  for (int r = 0; r < kStateDim; ++r) {
    std::vector<double> row;
    for (int c = 0; c < kParamDim; ++c) row.push_back(cfg.sim.Pi0(r, c));
    pi.push_back(row);
  }
  j["simulation"] = {{"plant_dt", cfg.sim.plant_dt},
                     {"duration", cfg.sim.duration},
                     {"e_phi0_deg", {degrees(cfg.sim.e_phi0(0)), degrees(cfg.sim.e_phi0(1))}},
                     {"p_true", std::vector<double>(cfg.sim.p_true.data(), cfg.sim.p_true.data() + kParamDim)},
                     {"Pi0", cfg.sim.Pi0.isZero(0.0) ? nlohmann::ordered_json(0.0) : pi}};
  std::vector<std::string> ctrls;
  for (ControllerMode m : cfg.mc.controllers) ctrls.emplace_back(to_string(m));
  j["montecarlo"] = {{"n_sim", cfg.mc.n_sim},
                     {"eps_tol", cfg.mc.eps_tol},
                     {"seed", cfg.mc.seed},
                     {"workers", cfg.mc.workers},
                     {"controllers", ctrls}};
  j["output_dir"] = cfg.output_dir;
  return j.dump(2) + "\n";
}

void validate(const RunConfig& cfg) {
  rethrow_as_config([&]() {
    validate(cfg.sim);
    validate(cfg.mc);
    if (!(cfg.reference_dt > 0.0)) throw ConfigError("'reference.dt' must be positive");
    if (cfg.output_dir.empty()) throw ConfigError("'output_dir' must not be empty");
  });
}

}  // namespace chainmpc
