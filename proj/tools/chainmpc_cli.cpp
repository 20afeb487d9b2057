#include "chainmpc/checks.hpp"
#include "chainmpc/config.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace chainmpc;
namespace fs = std::filesystem;

namespace {

// Usage errors exit with 2, configuration and I/O errors with 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig load_or_default(const std::string& path) { return path.empty() ? default_config() : load_config(path); }

DeviationVector parse_deviation_list(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    std::size_t used = 0;
    double d = 0.0;
    try {
      d = std::stod(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used]))) ++used;
    if (used == 0 || used != field.size()) throw UsageError("--p: cannot parse '" + field + "' as a number");
    v.push_back(d);
  }
  if (v.size() != kParamDim) {
    throw UsageError(fmt::format("--p needs {} comma-separated deviations (d_m1,d_m2,d_l1,d_l2,d_J1,d_J2), got {}",
                                 kParamDim, v.size()));
  }
  return Eigen::Map<const DeviationVector>(v.data());
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

int cmd_simulate(const std::string& config_path, const std::string& mode_text, const std::string& p_text,
                 std::optional<std::uint64_t> seed, const std::string& out_override) {
  RunConfig cfg = load_or_default(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  const ControllerMode mode = parse_mode(mode_text);
  if (!p_text.empty()) {
    cfg.sim.p_true = parse_deviation_list(p_text);
  } else if (seed) {
    cfg.sim.p_true = sample_uniform(cfg.mc.box, *seed, 1).front();
  }
  validate(cfg);

  const TrialLog log = run_trial(cfg.sim, mode);
  const TrialSummary s = summarize_trial(log, 0, cfg.mc.eps_tol, cfg.sim.ocp.boxes.fR_min);
  const fs::path dir(cfg.output_dir);
  {
    auto f = open_output(dir / fmt::format("trial_{}.csv", to_string(mode)));
    write_trial_csv(f, log);
  }
  nlohmann::ordered_json j;
  j["controller"] = to_string(mode);
  j["p_true"] = std::vector<double>(s.p.data(), s.p.data() + kParamDim);
  j["success"] = s.success;
  j["qp_failures"] = s.qp_failures;
  j["diverged"] = s.diverged;
  j["rows"] = log.rows.size();
  j["rmse_phi1_deg"] = s.rmse_phi1;
  j["rmse_phi2_deg"] = s.rmse_phi2;
  j["max_s_delta"] = s.max_s_delta;
  j["max_s_fR1"] = s.max_s_fR1;
  j["max_s_fR2"] = s.max_s_fR2;
  j["min_fR"] = s.min_fR;
  {
    auto f = open_output(dir / fmt::format("run_summary_{}.json", to_string(mode)));
    f << j.dump(2) << '\n';
  }
  std::cout << fmt::format("{} run: {} ({} QP failures), RMSE phi1 {:.3f} deg, phi2 {:.3f} deg, max s_delta {:.3e}, "
                           "max s_fR {:.3e}/{:.3e}, mean solve {:.3f} ms\n",
                           to_string(mode), s.success ? "success" : "failure", s.qp_failures, s.rmse_phi1,
                           s.rmse_phi2, s.max_s_delta, s.max_s_fR1, s.max_s_fR2, s.mean_solve_ms);
  std::cout << "wrote " << (dir / fmt::format("trial_{}.csv", to_string(mode))).string() << '\n';
  return 0;
}

void print_report(const McReport& report) {
  for (const ControllerAggregate& a : report.aggregates) {
    std::cout << fmt::format("{:8s} success {}/{} ({:.1f}%), median RMSE phi1 {:.3f} deg phi2 {:.3f} deg, "
                             "median max s_delta {:.3e}, mean solve {:.3f} ms\n",
                             to_string(a.mode), a.successes, a.trials, 100.0 * a.success_rate, a.rmse_phi1.median,
                             a.rmse_phi2.median, a.max_s_delta.median, a.mean_solve_ms);
  }
  if (report.aggregates.size() == 2) {
    std::cout << fmt::format("paired ordering holds in {:.1f}% of trials\n", 100.0 * report.paired_ordering_rate);
  }
}

int cmd_montecarlo(const std::string& config_path, const std::string& mode_text, std::optional<int> nsim,
                   std::optional<std::uint64_t> seed, std::optional<int> workers, const std::string& out_override,
                   const std::string& regenerate, bool trial_logs) {
  RunConfig cfg = load_or_default(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (mode_text == "both") {
    cfg.mc.controllers = {ControllerMode::nominal, ControllerMode::tube};
  } else {
    cfg.mc.controllers = {parse_mode(mode_text)};
  }
  if (nsim) cfg.mc.n_sim = *nsim;
  if (seed) cfg.mc.seed = *seed;
  if (workers) cfg.mc.workers = *workers;
  validate(cfg);

  if (!regenerate.empty()) {
    const McReport report = load_report(regenerate, cfg.mc);
    write_report_files(cfg.output_dir, report);
    print_report(report);
    return 0;
  }

  const fs::path dir(cfg.output_dir);
  const int total = cfg.mc.n_sim * static_cast<int>(cfg.mc.controllers.size());
  int done = 0;
  const McReport report = run_campaign(cfg.mc, cfg.sim, [&](const TrialSummary& s, const TrialLog& log) {
    ++done;
    std::cerr << fmt::format("[{}/{}] trial {} {}: {}\n", done, total, s.trial, to_string(s.mode),
                             s.success ? "success" : "failure");
    if (trial_logs) {
      auto f = open_output(dir / "trials" / fmt::format("trial_{:04d}_{}.csv", s.trial, to_string(s.mode)));
      write_trial_csv(f, log);
    }
  });
  write_report_files(cfg.output_dir, report);
  print_report(report);
  std::cout << "wrote " << (dir / "summary.json").string() << '\n';
  return 0;
}

int cmd_check(const std::vector<std::string>& suites, bool suites_given) {
  std::vector<std::string> selected = suites_given ? suites : check_suite_names();
  std::erase(selected, std::string());
  if (selected.empty()) throw UsageError("empty check suite selection");
  std::vector<CheckResult> results;
  try {
    results = run_checks(selected);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  bool all = true;
  for (const CheckResult& r : results) {
    std::cout << fmt::format("{} {:9s} {}\n", r.passed ? "PASS" : "FAIL", r.name, r.detail);
    all = all && r.passed;
  }
  return all ? 0 : 1;
}

int cmd_reference(const std::string& config_path, const std::string& out_file) {
  const RunConfig cfg = load_or_default(config_path);
  const DenseReference dense =
      build_dense_reference(cfg.sim.ellipse, cfg.sim.ocp.nominal, cfg.sim.fL_d, cfg.reference_dt);
  const fs::path path = out_file.empty() ? fs::path(cfg.output_dir) / "reference.csv" : fs::path(out_file);
  auto f = open_output(path);
  write_reference_csv(f, dense);
  std::cout << "wrote " << dense.t.size() << " rows to " << path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tube NMPC toolkit for a planar two-vehicle aerial chain"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;

  auto* sim = app.add_subcommand("simulate", "Run one closed-loop trial");
  std::string sim_mode = "nominal";
  std::string p_text;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("-c,--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  sim->add_option("-m,--mode", sim_mode, "nominal or tube")->check(CLI::IsMember({"nominal", "tube"}));
  auto* p_opt = sim->add_option("--p", p_text, "True deviations d_m1,d_m2,d_l1,d_l2,d_J1,d_J2");
  sim->add_option("--seed", sim_seed, "Draw the true deviations from the uncertainty box")->excludes(p_opt);
  sim->add_option("-o,--out", out_dir, "Output directory (overrides the configuration)");

  auto* mc = app.add_subcommand("montecarlo", "Run the paired Monte-Carlo campaign");
  std::string mc_mode = "both";
  std::optional<int> nsim;
  std::optional<std::uint64_t> mc_seed;
  std::optional<int> workers;
  std::string regenerate;
  bool trial_logs = false;
  mc->add_option("-c,--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  mc->add_option("-m,--mode", mc_mode, "both, nominal or tube")->check(CLI::IsMember({"both", "nominal", "tube"}));
  mc->add_option("-n,--nsim", nsim, "Number of parameter samples");
  mc->add_option("--seed", mc_seed, "Sampling seed");
  mc->add_option("-w,--workers", workers, "Worker threads");
  mc->add_option("-o,--out", out_dir, "Output directory (overrides the configuration)");
  mc->add_option("--regenerate", regenerate, "Rebuild the report from an existing output directory")
      ->check(CLI::ExistingDirectory);
  mc->add_flag("--trial-logs", trial_logs, "Also write every trial's time series");

  auto* check = app.add_subcommand("check", "Run the verification suites");
  std::vector<std::string> suites;
  auto* suite_opt = check->add_option("-s,--suites", suites, "Subset of energy, jacobian, newton, qp, ik")
                        ->expected(0, -1)
                        ->delimiter(',');

  auto* ref = app.add_subcommand("reference", "Export the dense reference");
  std::string ref_out;
  ref->add_option("-c,--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  ref->add_option("-o,--out", ref_out, "Output CSV file (default <output_dir>/reference.csv)");

  auto* show = app.add_subcommand("config", "Print the effective configuration");
  show->add_option("-c,--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config_path, sim_mode, p_text, sim_seed, out_dir);
    if (mc->parsed()) {
      return cmd_montecarlo(config_path, mc_mode, nsim, mc_seed, workers, out_dir, regenerate, trial_logs);
    }
    if (check->parsed()) return cmd_check(suites, suite_opt->count() > 0);
    if (ref->parsed()) return cmd_reference(config_path, ref_out);
    if (show->parsed()) {
      std::cout << dump_config(load_or_default(config_path));
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
