#include "chainmpc/monte_carlo.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace chainmpc {

namespace {

constexpr const char* kTrialsHeader =
    "trial,mode,d_m1,d_m2,d_l1,d_l2,d_J1,d_J2,success,qp_failures,diverged,rmse_phi1,rmse_phi2,"
    "max_s_delta,max_s_fR1,max_s_fR2,min_fR";
constexpr const char* kTimingHeader = "trial,mode,mean_solve_ms,max_solve_ms";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::runtime_error(fmt::format("line {}: bad number '{}'", line, s));
  return v;
}

int parse_int(const std::string& s, int line) {
  const double v = parse_double(s, line);
  if (v != std::floor(v)) throw std::runtime_error(fmt::format("line {}: expected an integer, got '{}'", line, s));
  return static_cast<int>(v);
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

Quantiles quantiles_or_zero(const std::vector<double>& v) { return v.empty() ? Quantiles{} : quantiles(v); }

nlohmann::ordered_json to_json(const Quantiles& q) {
  return {{"min", q.min}, {"q1", q.q1}, {"median", q.median}, {"q3", q.q3}, {"max", q.max}};
}

void write_quantile_row(std::ostream& os, ControllerMode mode, const char* signal, const Quantiles& q) {
  os << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", to_string(mode), signal, q.min, q.q1,
                    q.median, q.q3, q.max);
}

}  // namespace

void validate(const McConfig& mc) {
  if (mc.n_sim < 1) throw std::invalid_argument("n_sim must be at least 1");
  if (!(mc.eps_tol > 0.0)) throw std::invalid_argument("eps_tol must be positive");
  if (mc.workers < 1) throw std::invalid_argument("workers must be at least 1");
  if (mc.controllers.empty()) throw std::invalid_argument("at least one controller is required");
  for (std::size_t i = 0; i < mc.controllers.size(); ++i) {
    for (std::size_t j = i + 1; j < mc.controllers.size(); ++j) {
      if (mc.controllers[i] == mc.controllers[j]) throw std::invalid_argument("controllers must be distinct");
    }
  }
  validate(mc.box);
}

double rmse(const std::vector<double>& errors) {
  if (errors.empty()) return 0.0;
  double acc = 0.0;
  for (double e : errors) acc += e * e;
  return std::sqrt(acc / static_cast<double>(errors.size()));
}

double rmse_phi(const TrialLog& log, int joint) {
  if (joint != 1 && joint != 2) throw std::invalid_argument("joint must be 1 or 2");
  const int j = joint - 1;
  std::vector<double> e;
  e.reserve(log.rows.size());
  for (const TrialSample& r : log.rows) e.push_back(rad2deg(r.x(sx::phi1 + j) - r.phi_d(j)));
  return rmse(e);
}

bool classify_trial(const TrialLog& log, double eps_tol, double fR_min) {
  if (log.qp_failures > 0 || log.diverged || log.rows.empty()) return false;
  for (const TrialSample& r : log.rows) {
    if (!(r.s.s_delta <= eps_tol && r.s.s_fR1 <= eps_tol && r.s.s_fR2 <= eps_tol)) return false;
    if (!(r.x(sx::fR1) >= fR_min - eps_tol && r.x(sx::fR2) >= fR_min - eps_tol)) return false;
  }
  return true;
}

TrialSummary summarize_trial(const TrialLog& log, int trial, double eps_tol, double fR_min) {
  TrialSummary s;
  s.trial = trial;
  s.mode = log.mode;
  s.p = log.p_true;
  s.success = classify_trial(log, eps_tol, fR_min);
  s.qp_failures = log.qp_failures;
  s.diverged = log.diverged;
  s.rmse_phi1 = rmse_phi(log, 1);
  s.rmse_phi2 = rmse_phi(log, 2);
  s.max_s_delta = -kQpInfinity;
  s.max_s_fR1 = -kQpInfinity;
  s.max_s_fR2 = -kQpInfinity;
  s.min_fR = kQpInfinity;
  for (const TrialSample& r : log.rows) {
    s.max_s_delta = std::max(s.max_s_delta, r.s.s_delta);
    s.max_s_fR1 = std::max(s.max_s_fR1, r.s.s_fR1);
    s.max_s_fR2 = std::max(s.max_s_fR2, r.s.s_fR2);
    s.min_fR = std::min({s.min_fR, r.x(sx::fR1), r.x(sx::fR2)});
  }
  if (!log.solve_times_ms.empty()) {
    double sum = 0.0;
    double mx = 0.0;
    for (double t : log.solve_times_ms) {
      sum += t;
      mx = std::max(mx, t);
    }
    s.mean_solve_ms = sum / static_cast<double>(log.solve_times_ms.size());
    s.max_solve_ms = mx;
  }
  return s;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Quantiles quantiles(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("quantiles of an empty sample");
  std::sort(values.begin(), values.end());
  Quantiles q;
  q.min = values.front();
  q.q1 = quantile(values, 0.25);
  q.median = quantile(values, 0.5);
  q.q3 = quantile(values, 0.75);
  q.max = values.back();
  return q;
}

const ControllerAggregate& McReport::aggregate(ControllerMode mode) const {
  for (const ControllerAggregate& a : aggregates) {
    if (a.mode == mode) return a;
  }
  throw std::out_of_range(std::string("no results for controller ") + to_string(mode));
}

std::vector<TrialSummary> McReport::trials_of(ControllerMode mode) const {
  std::vector<TrialSummary> out;
  for (const TrialSummary& t : trials) {
    if (t.mode == mode) out.push_back(t);
  }
  return out;
}

McReport build_report(const McConfig& mc, std::vector<TrialSummary> trials) {
  McReport report;
  report.config = mc;
  std::stable_sort(trials.begin(), trials.end(), [&mc](const TrialSummary& a, const TrialSummary& b) {
    if (a.trial != b.trial) return a.trial < b.trial;
    auto rank = [&mc](ControllerMode m) {
      return std::find(mc.controllers.begin(), mc.controllers.end(), m) - mc.controllers.begin();
    };
    return rank(a.mode) < rank(b.mode);
  });
  report.trials = std::move(trials);

  for (ControllerMode mode : mc.controllers) {
    ControllerAggregate agg;
    agg.mode = mode;
    std::vector<double> r1, r2, r1s, r2s, sd, f1, f2;
    double solve_sum = 0.0;
    for (const TrialSummary& t : report.trials) {
      if (t.mode != mode) continue;
      ++agg.trials;
      r1.push_back(t.rmse_phi1);
      r2.push_back(t.rmse_phi2);
      sd.push_back(t.max_s_delta);
      f1.push_back(t.max_s_fR1);
      f2.push_back(t.max_s_fR2);
      solve_sum += t.mean_solve_ms;
      if (t.success) {
        ++agg.successes;
        r1s.push_back(t.rmse_phi1);
        r2s.push_back(t.rmse_phi2);
      }
    }
    if (agg.trials == 0) continue;
    agg.success_rate = static_cast<double>(agg.successes) / static_cast<double>(agg.trials);
    agg.rmse_phi1 = quantiles(r1);
    agg.rmse_phi2 = quantiles(r2);
    agg.successful_trials = static_cast<int>(r1s.size());
    agg.rmse_phi1_successful = quantiles_or_zero(r1s);
    agg.rmse_phi2_successful = quantiles_or_zero(r2s);
    agg.max_s_delta = quantiles(sd);
    agg.max_s_fR1 = quantiles(f1);
    agg.max_s_fR2 = quantiles(f2);
    agg.mean_solve_ms = solve_sum / static_cast<double>(agg.trials);
    report.aggregates.push_back(agg);
  }

  const bool paired = std::find(mc.controllers.begin(), mc.controllers.end(), ControllerMode::nominal) !=
                          mc.controllers.end() &&
                      std::find(mc.controllers.begin(), mc.controllers.end(), ControllerMode::tube) !=
                          mc.controllers.end();
  if (paired) {
    const std::vector<TrialSummary> nom = report.trials_of(ControllerMode::nominal);
    const std::vector<TrialSummary> tube = report.trials_of(ControllerMode::tube);
    if (nom.size() != tube.size()) throw std::runtime_error("unpaired trials in the campaign results");
    int ordered = 0;
    for (std::size_t i = 0; i < nom.size(); ++i) {
      if (nom[i].trial != tube[i].trial) throw std::runtime_error("unpaired trials in the campaign results");
      if (nom[i].success && !tube[i].success) {
        report.ordering_violations.push_back(nom[i].trial);
      } else {
        ++ordered;
      }
    }
    report.paired_ordering_rate = nom.empty() ? 0.0 : static_cast<double>(ordered) / static_cast<double>(nom.size());
  }
  return report;
}

McReport run_campaign(const McConfig& mc, const SimConfig& sim, const TrialCallback& on_trial) {
  validate(mc);
  validate(sim);
  const std::vector<DeviationVector> samples = sample_uniform(mc.box, mc.seed, static_cast<std::size_t>(mc.n_sim));
  const std::size_t n_ctrl = mc.controllers.size();
  const std::size_t jobs = samples.size() * n_ctrl;
  std::vector<TrialSummary> results(jobs);

  std::atomic<std::size_t> next{0};
  std::mutex lock;
  std::exception_ptr error;
  auto worker = [&]() {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= jobs) return;
      try {
        const std::size_t trial = job / n_ctrl;
        SimConfig cfg = sim;
        cfg.p_true = samples[trial];
        const TrialLog log = run_trial(cfg, mc.controllers[job % n_ctrl]);
        results[job] = summarize_trial(log, static_cast<int>(trial), mc.eps_tol, sim.ocp.boxes.fR_min);
        if (on_trial) {
          std::lock_guard<std::mutex> guard(lock);
          on_trial(results[job], log);
        }
      } catch (...) {
        std::lock_guard<std::mutex> guard(lock);
        if (!error) error = std::current_exception();
        next.store(jobs);
        return;
      }
    }
  };

  const auto n_threads = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(mc.workers), jobs));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return build_report(mc, std::move(results));
}

void write_trials_csv(std::ostream& os, const std::vector<TrialSummary>& trials) {
  os << kTrialsHeader << '\n';
  for (const TrialSummary& t : trials) {
    std::string line = fmt::format("{},{}", t.trial, to_string(t.mode));
    for (int i = 0; i < kParamDim; ++i) line += fmt::format(",{:.17g}", t.p(i));
    line += fmt::format(",{},{},{}", t.success ? 1 : 0, t.qp_failures, t.diverged ? 1 : 0);
    for (double v : {t.rmse_phi1, t.rmse_phi2, t.max_s_delta, t.max_s_fR1, t.max_s_fR2, t.min_fR}) {
      line += fmt::format(",{:.17g}", v);
    }
    os << line << '\n';
  }
}

void write_timing_csv(std::ostream& os, const std::vector<TrialSummary>& trials) {
  os << kTimingHeader << '\n';
  for (const TrialSummary& t : trials) {
    os << fmt::format("{},{},{:.17g},{:.17g}\n", t.trial, to_string(t.mode), t.mean_solve_ms, t.max_solve_ms);
  }
}

std::vector<TrialSummary> read_trials_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || strip_cr(line) != kTrialsHeader) {
    throw std::runtime_error("trials CSV: unexpected header");
  }
  std::vector<TrialSummary> out;
  int n = 1;
  while (std::getline(is, line)) {
    ++n;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 17) throw std::runtime_error(fmt::format("trials CSV line {}: expected 17 fields", n));
    TrialSummary t;
    t.trial = parse_int(f[0], n);
    t.mode = parse_mode(f[1]);
    for (int i = 0; i < kParamDim; ++i) t.p(i) = parse_double(f[2 + i], n);
    t.success = parse_int(f[8], n) != 0;
    t.qp_failures = parse_int(f[9], n);
    t.diverged = parse_int(f[10], n) != 0;
    t.rmse_phi1 = parse_double(f[11], n);
    t.rmse_phi2 = parse_double(f[12], n);
    t.max_s_delta = parse_double(f[13], n);
    t.max_s_fR1 = parse_double(f[14], n);
    t.max_s_fR2 = parse_double(f[15], n);
    t.min_fR = parse_double(f[16], n);
    out.push_back(t);
  }
  return out;
}

void merge_timing_csv(std::istream& is, std::vector<TrialSummary>& trials) {
  std::string line;
  if (!std::getline(is, line) || strip_cr(line) != kTimingHeader) {
    throw std::runtime_error("timing CSV: unexpected header");
  }
  int n = 1;
  while (std::getline(is, line)) {
    ++n;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 4) throw std::runtime_error(fmt::format("timing CSV line {}: expected 4 fields", n));
    const int trial = parse_int(f[0], n);
    const ControllerMode mode = parse_mode(f[1]);
    auto it = std::find_if(trials.begin(), trials.end(),
                           [&](const TrialSummary& t) { return t.trial == trial && t.mode == mode; });
    if (it == trials.end()) throw std::runtime_error(fmt::format("timing CSV line {}: unknown trial", n));
    it->mean_solve_ms = parse_double(f[2], n);
    it->max_solve_ms = parse_double(f[3], n);
  }
}

void write_summary_json(std::ostream& os, const McReport& report) {
  nlohmann::ordered_json j;
  const McConfig& mc = report.config;
  j["n_sim"] = mc.n_sim;
  j["seed"] = mc.seed;
  j["eps_tol"] = mc.eps_tol;
  j["deviation_bounds"] = std::vector<double>(mc.box.bounds.data(), mc.box.bounds.data() + kParamDim);
  nlohmann::ordered_json ctrls = nlohmann::ordered_json::array();
  for (const ControllerAggregate& a : report.aggregates) {
    nlohmann::ordered_json c;
    c["controller"] = to_string(a.mode);
    c["trials"] = a.trials;
    c["successes"] = a.successes;
    c["success_rate"] = a.success_rate;
    c["rmse_phi1_deg"] = to_json(a.rmse_phi1);
    c["rmse_phi2_deg"] = to_json(a.rmse_phi2);
    c["successful_trials"] = a.successful_trials;
    c["rmse_phi1_deg_successful"] = to_json(a.rmse_phi1_successful);
    c["rmse_phi2_deg_successful"] = to_json(a.rmse_phi2_successful);
    c["max_s_delta"] = to_json(a.max_s_delta);
    c["max_s_fR1"] = to_json(a.max_s_fR1);
    c["max_s_fR2"] = to_json(a.max_s_fR2);
    ctrls.push_back(c);
  }
  j["controllers"] = ctrls;
  j["paired_ordering_rate"] = report.paired_ordering_rate;
  j["ordering_violations"] = report.ordering_violations;
  os << j.dump(2) << '\n';
}

void write_timing_json(std::ostream& os, const McReport& report) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const ControllerAggregate& a : report.aggregates) {
    double mx = 0.0;
    for (const TrialSummary& t : report.trials) {
      if (t.mode == a.mode) mx = std::max(mx, t.max_solve_ms);
    }
    j[to_string(a.mode)] = {{"mean_solve_ms", a.mean_solve_ms}, {"max_solve_ms", mx}};
  }
  if (report.aggregates.size() == 2 && report.aggregates[0].mean_solve_ms > 0.0) {
    j["ratio"] = report.aggregate(ControllerMode::tube).mean_solve_ms /
                 report.aggregate(ControllerMode::nominal).mean_solve_ms;
  }
  os << j.dump(2) << '\n';
}

void write_rmse_quantiles(std::ostream& os, const McReport& report) {
  os << "controller,signal,min,q1,median,q3,max\n";
  for (const ControllerAggregate& a : report.aggregates) {
    write_quantile_row(os, a.mode, "rmse_phi1", a.rmse_phi1);
    write_quantile_row(os, a.mode, "rmse_phi2", a.rmse_phi2);
    write_quantile_row(os, a.mode, "rmse_phi1_successful", a.rmse_phi1_successful);
    write_quantile_row(os, a.mode, "rmse_phi2_successful", a.rmse_phi2_successful);
  }
}

void write_residual_quantiles(std::ostream& os, const McReport& report) {
  os << "controller,signal,min,q1,median,q3,max\n";
  for (const ControllerAggregate& a : report.aggregates) {
    write_quantile_row(os, a.mode, "max_s_delta", a.max_s_delta);
    write_quantile_row(os, a.mode, "max_s_fR1", a.max_s_fR1);
    write_quantile_row(os, a.mode, "max_s_fR2", a.max_s_fR2);
  }
}

void write_report_files(const std::string& directory, const McReport& report) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  auto open = [&](const char* name) {
    std::ofstream f(fs::path(directory) / name, std::ios::binary);
    if (!f) throw std::runtime_error(fmt::format("cannot write {}/{}", directory, name));
    return f;
  };
  {
    auto f = open("trials.csv");
    write_trials_csv(f, report.trials);
  }
  {
    auto f = open("timing.csv");
    write_timing_csv(f, report.trials);
  }
  {
    auto f = open("summary.json");
    write_summary_json(f, report);
  }
  {
    auto f = open("timing.json");
    write_timing_json(f, report);
  }
  {
    auto f = open("rmse_quantiles.csv");
    write_rmse_quantiles(f, report);
  }
  {
    auto f = open("residual_quantiles.csv");
    write_residual_quantiles(f, report);
  }
}

McReport load_report(const std::string& directory, const McConfig& mc) {
  namespace fs = std::filesystem;
  std::ifstream trials_file(fs::path(directory) / "trials.csv");
  if (!trials_file) throw std::runtime_error("cannot read " + directory + "/trials.csv");
  std::vector<TrialSummary> trials = read_trials_csv(trials_file);
  std::ifstream timing_file(fs::path(directory) / "timing.csv");
  if (timing_file) merge_timing_csv(timing_file, trials);
  return build_report(mc, std::move(trials));
}

}  // namespace chainmpc
