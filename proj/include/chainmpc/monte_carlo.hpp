#pragma once

#include "chainmpc/simulation.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace chainmpc {

struct McConfig {
  int n_sim{100};
  /// Box the true deviations are drawn from.
  UncertaintyBox box;
  double eps_tol{1e-3};
  std::uint64_t seed{1};
  std::vector<ControllerMode> controllers{ControllerMode::nominal, ControllerMode::tube};
  int workers{1};
};

void validate(const McConfig& mc);

/// Root mean square of a series [same unit as the input].
double rmse(const std::vector<double>& errors);
/// RMSE of e_phi_j over the whole log at plant rate [deg], joint in {1, 2}.
double rmse_phi(const TrialLog& log, int joint);

/// No QP failure, no divergence, s_delta, s_fR1, s_fR2 <= eps_tol and f_Rj >= f_min - eps_tol at every row.
bool classify_trial(const TrialLog& log, double eps_tol, double fR_min);

/// One controller's outcome on one parameter sample.
struct TrialSummary {
  int trial{0};
  ControllerMode mode{ControllerMode::nominal};
  DeviationVector p = DeviationVector::Zero();
  bool success{false};
  int qp_failures{0};
  bool diverged{false};
  double rmse_phi1{0.0};
  double rmse_phi2{0.0};
  double max_s_delta{0.0};
  double max_s_fR1{0.0};
  double max_s_fR2{0.0};
  double min_fR{0.0};
  /// Wall-clock figures; kept out of the deterministic outputs.
  double mean_solve_ms{0.0};
  double max_solve_ms{0.0};
};

TrialSummary summarize_trial(const TrialLog& log, int trial, double eps_tol, double fR_min);

/// min, lower quartile, median, upper quartile, max (linear interpolation between order statistics).
struct Quantiles {
  double min{0.0};
  double q1{0.0};
  double median{0.0};
  double q3{0.0};
  double max{0.0};
};

/// Throws std::invalid_argument on an empty sample.
Quantiles quantiles(std::vector<double> values);
/// Single quantile at level q in [0, 1], same interpolation.
double quantile(std::vector<double> values, double q);

struct ControllerAggregate {
  ControllerMode mode{ControllerMode::nominal};
  int trials{0};
  int successes{0};
  double success_rate{0.0};
  Quantiles rmse_phi1;
  Quantiles rmse_phi2;
  /// Over successful trials only; empty (trials == 0) when none succeeded.
  int successful_trials{0};
  Quantiles rmse_phi1_successful;
  Quantiles rmse_phi2_successful;
  Quantiles max_s_delta;
  Quantiles max_s_fR1;
  Quantiles max_s_fR2;
  double mean_solve_ms{0.0};
};

struct McReport {
  McConfig config;
  /// Trial-major, controller order as in config.controllers.
  std::vector<TrialSummary> trials;
  std::vector<ControllerAggregate> aggregates;
  /// Trials where nominal succeeds but tube fails (both controllers present).
  std::vector<int> ordering_violations;
  /// Fraction of trials with success(nominal) <= success(tube).
  double paired_ordering_rate{0.0};

  const ControllerAggregate& aggregate(ControllerMode mode) const;
  std::vector<TrialSummary> trials_of(ControllerMode mode) const;
};

/// Aggregates and paired statistics from per-trial summaries.
McReport build_report(const McConfig& mc, std::vector<TrialSummary> trials);

using TrialCallback = std::function<void(const TrialSummary&, const TrialLog&)>;

/// Same p sample for every controller; results ordered by trial index regardless of worker count.
/// The callback runs under a lock, in completion order.
McReport run_campaign(const McConfig& mc, const SimConfig& sim, const TrialCallback& on_trial = {});

/// trial,mode,d_m1,...,d_J2,success,qp_failures,diverged,rmse_phi1,rmse_phi2,max_s_delta,max_s_fR1,max_s_fR2,min_fR
void write_trials_csv(std::ostream& os, const std::vector<TrialSummary>& trials);
/// trial,mode,mean_solve_ms,max_solve_ms
void write_timing_csv(std::ostream& os, const std::vector<TrialSummary>& trials);
/// Inverse of write_trials_csv (timing fields zero). Throws std::runtime_error on malformed input.
std::vector<TrialSummary> read_trials_csv(std::istream& is);
/// Fills timing fields from a timing CSV written for the same trials.
void merge_timing_csv(std::istream& is, std::vector<TrialSummary>& trials);

/// Deterministic aggregate summary (no timings).
void write_summary_json(std::ostream& os, const McReport& report);
/// Mean and max solve times per controller.
void write_timing_json(std::ostream& os, const McReport& report);
/// controller,signal,min,q1,median,q3,max for RMSE (all and successful trials).
void write_rmse_quantiles(std::ostream& os, const McReport& report);
/// controller,signal,min,q1,median,q3,max for the per-trial maximum residuals.
void write_residual_quantiles(std::ostream& os, const McReport& report);

/// Writes trials.csv, timing.csv, summary.json, timing.json, rmse_quantiles.csv, residual_quantiles.csv.
void write_report_files(const std::string& directory, const McReport& report);
/// Rebuilds the report from trials.csv (and timing.csv when present) in a directory.
McReport load_report(const std::string& directory, const McConfig& mc);

}  // namespace chainmpc
