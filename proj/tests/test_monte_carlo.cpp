#include "chainmpc/monte_carlo.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace chainmpc;
namespace fs = std::filesystem;

namespace {

TrialLog synthetic_log(int rows) {
  TrialLog log;
  for (int i = 0; i < rows; ++i) {
    TrialSample s;
    s.t = 0.005 * i;
    s.x(sx::fR1) = 5.0;
    s.x(sx::fR2) = 5.0;
    s.s = {-0.5, -15.0, -15.0};
    log.rows.push_back(s);
  }
  return log;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("chainmpc_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SimConfig short_sim() {
  SimConfig sim;
  sim.duration = 0.2;
  return sim;
}

}  // namespace

TEST_CASE("rmse") {
  CHECK(rmse({0.0, 0.0, 0.0}) == 0.0);
  CHECK(rmse({1.0, 1.0, 1.0, 1.0}) == doctest::Approx(1.0));
  CHECK(rmse({0.0, 3.0, 4.0}) == doctest::Approx(std::sqrt(25.0 / 3.0)).epsilon(1e-15));
  CHECK(rmse({0.0, 3.0, 4.0}) == doctest::Approx(2.8868).epsilon(1e-4));

  TrialLog log = synthetic_log(3);
  log.rows[1].x(sx::phi2) = deg2rad(3.0);
  log.rows[2].x(sx::phi2) = deg2rad(-4.0);
  CHECK(rmse_phi(log, 2) == doctest::Approx(2.8868).epsilon(1e-4));
  CHECK(rmse_phi(log, 1) == 0.0);
  CHECK_THROWS(rmse_phi(log, 3));
}

TEST_CASE("trial classification") {
  TrialLog log = synthetic_log(10);
  CHECK(classify_trial(log, 1e-3, 3.0));

  TrialLog bad = log;
  bad.rows[4].s.s_delta = 2e-3;
  CHECK_FALSE(classify_trial(bad, 1e-3, 3.0));
  bad.rows[4].s.s_delta = 0.9e-3;
  CHECK(classify_trial(bad, 1e-3, 3.0));

  bad = log;
  bad.qp_failures = 1;
  CHECK_FALSE(classify_trial(bad, 1e-3, 3.0));

  bad = log;
  bad.rows[7].s.s_fR2 = 0.01;
  CHECK_FALSE(classify_trial(bad, 1e-3, 3.0));

  bad = log;
  bad.rows[2].x(sx::fR1) = 2.99;
  CHECK_FALSE(classify_trial(bad, 1e-3, 3.0));
  bad.rows[2].x(sx::fR1) = 2.9995;
  CHECK(classify_trial(bad, 1e-3, 3.0));

  bad = log;
  bad.diverged = true;
  CHECK_FALSE(classify_trial(bad, 1e-3, 3.0));

  const TrialSummary s = summarize_trial(log, 3, 1e-3, 3.0);
  CHECK(s.trial == 3);
  CHECK(s.success);
  CHECK(s.max_s_delta == -0.5);
  CHECK(s.min_fR == 5.0);
}

TEST_CASE("quantiles interpolate linearly between order statistics") {
  const Quantiles q = quantiles({5.0, 1.0, 4.0, 2.0, 3.0});
  CHECK(q.min == 1.0);
  CHECK(q.q1 == 2.0);
  CHECK(q.median == 3.0);
  CHECK(q.q3 == 4.0);
  CHECK(q.max == 5.0);
  CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({7.0}, 0.9) == 7.0);
}

TEST_CASE("aggregates and paired ordering") {
  McConfig mc;
  mc.n_sim = 4;
  std::vector<TrialSummary> trials;
  const bool nominal_ok[] = {true, false, true, false};
  const bool tube_ok[] = {true, true, false, true};
  for (int k = 0; k < 4; ++k) {
    TrialSummary a;
    a.trial = k;
    a.mode = ControllerMode::nominal;
    a.success = nominal_ok[k];
    a.rmse_phi1 = k;
    TrialSummary b = a;
    b.mode = ControllerMode::tube;
    b.success = tube_ok[k];
    trials.push_back(a);
    trials.push_back(b);
  }
  const McReport r = build_report(mc, trials);
  CHECK(r.aggregate(ControllerMode::nominal).successes == 2);
  CHECK(r.aggregate(ControllerMode::nominal).success_rate == 0.5);
  CHECK(r.aggregate(ControllerMode::tube).success_rate == 0.75);
  CHECK(r.aggregate(ControllerMode::nominal).rmse_phi1.median == doctest::Approx(1.5));
  REQUIRE(r.ordering_violations.size() == 1);
  CHECK(r.ordering_violations[0] == 2);
  // Share of trials where a nominal success implies a tube success.
  CHECK(r.paired_ordering_rate == doctest::Approx(0.75));
  CHECK(r.trials_of(ControllerMode::tube).size() == 4);
}

TEST_CASE("zero uncertainty campaign succeeds for both controllers") {
  McConfig mc;
  mc.n_sim = 1;
  mc.box = UncertaintyBox::zero();
  const SimConfig sim;
  const McReport r = run_campaign(mc, sim);
  REQUIRE(r.trials.size() == 2);
  for (const TrialSummary& t : r.trials) {
    const std::string name = to_string(t.mode);
    CAPTURE(name);
    CHECK(t.p.isZero(0.0));
    CHECK(t.success);
    CHECK(t.qp_failures == 0);
  }
  CHECK(r.trials[0].success == r.trials[1].success);
}

TEST_CASE("campaign pairs samples across controllers and is reproducible") {
  McConfig mc;
  mc.n_sim = 3;
  mc.seed = 11;
  const SimConfig sim = short_sim();
  const McReport r = run_campaign(mc, sim);
  const auto samples = sample_uniform(mc.box, mc.seed, 3);
  REQUIRE(r.trials.size() == 6);
  for (int k = 0; k < 3; ++k) {
    CHECK(r.trials[2 * k].trial == k);
    CHECK(r.trials[2 * k].mode == ControllerMode::nominal);
    CHECK(r.trials[2 * k + 1].mode == ControllerMode::tube);
    CHECK(r.trials[2 * k].p == samples[static_cast<std::size_t>(k)]);
    CHECK(r.trials[2 * k + 1].p == samples[static_cast<std::size_t>(k)]);
  }

  McConfig mc2 = mc;
  mc2.workers = 2;
  const McReport again = run_campaign(mc2, sim);
  std::ostringstream a, b;
  write_trials_csv(a, r.trials);
  write_trials_csv(b, again.trials);
  CHECK(a.str() == b.str());
}

TEST_CASE("report files regenerate bit-identically") {
  McConfig mc;
  mc.n_sim = 2;
  mc.seed = 5;
  const McReport r = run_campaign(mc, short_sim());
  const fs::path first = scratch_dir("first");
  const fs::path second = scratch_dir("second");
  write_report_files(first.string(), r);
  const McReport loaded = load_report(first.string(), mc);
  write_report_files(second.string(), loaded);
  for (const char* name : {"trials.csv", "timing.csv", "summary.json", "timing.json", "rmse_quantiles.csv",
                           "residual_quantiles.csv"}) {
    CAPTURE(name);
    const std::string a = slurp(first / name);
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(second / name));
  }
  REQUIRE(loaded.trials.size() == r.trials.size());
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    CHECK(loaded.trials[i].p == r.trials[i].p);
    CHECK(loaded.trials[i].rmse_phi1 == r.trials[i].rmse_phi1);
    CHECK(loaded.trials[i].max_s_delta == r.trials[i].max_s_delta);
  }
  const std::string header = slurp(first / "trials.csv").substr(0, slurp(first / "trials.csv").find('\n'));
  CHECK(header ==
        "trial,mode,d_m1,d_m2,d_l1,d_l2,d_J1,d_J2,success,qp_failures,diverged,rmse_phi1,rmse_phi2,max_s_delta,"
        "max_s_fR1,max_s_fR2,min_fR");
  fs::remove_all(first);
  fs::remove_all(second);
}

TEST_CASE("malformed trial files are rejected") {
  std::istringstream wrong("trial,mode\n0,nominal\n");
  CHECK_THROWS(read_trials_csv(wrong));
  McConfig mc;
  mc.n_sim = 0;
  CHECK_THROWS(validate(mc));
  mc.n_sim = 1;
  mc.eps_tol = 0.0;
  CHECK_THROWS(validate(mc));
}
