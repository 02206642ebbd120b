#pragma once

// Grid tuning, multi-image batch runs and trajectory aggregation.
//
// Work items (grid point x image, or one problem in a batch) are independent
// and run on OpenMP threads; each builds its own denoiser, and results are
// reduced in a fixed order, so outputs do not depend on the thread count.

#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "pnprecon/forward_model.hpp"
#include "pnprecon/solvers.hpp"

namespace pnp {

/// Named parameter values applied on top of a config template, in order.
using ParamAssignment = std::vector<std::pair<std::string, double>>;

/// Applies one numeric parameter by its config key (gamma, gamma2_init, beta,
/// lambda, theta, zeta, t_switch, sigma, ...). Throws ConfigError on unknown keys.
void apply_param(SolverConfig& cfg, const std::string& name, double value);

struct TuningSpec {
  std::vector<ParamAssignment> grid;
  int t_meas = 35;
  int t_max = 150;
  std::vector<Problem> images;  // each needs x0

  void validate() const;
};

struct TuningRow {
  ParamAssignment params;
  double score_db = std::numeric_limits<double>::infinity();
  std::vector<double> per_image;  // mean linear NMSE; +inf when diverged
  int diverged = 0;
};

struct TuningResult {
  std::size_t best = 0;
  std::vector<TuningRow> table;

  [[nodiscard]] const ParamAssignment& best_params() const { return table[best].params; }
};

class AllDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean of the linear NMSE over iterations [t_meas, t_max]; +inf when the
/// run diverged or stopped before t_max.
double trajectory_score(const SolverResult& run, int t_meas, int t_max);

/// Lower median: element (n - 1) / 2 of the sorted values; +inf entries count.
double lower_median(std::vector<double> values);

/// Runs every grid point on every image for t_max iterations and scores it by
/// the median over images of the per-image trajectory score, in dB. Returns
/// the first minimizer. Throws AllDiverged if no grid point has a finite score.
TuningResult tune(const TuningSpec& spec, const SolverConfig& cfg_template);

struct AggregateRow {
  int iteration = 0;
  double median_nmse_db = 0.0;
  int n_alive = 0;
};

struct RunOutcome {
  bool diverged = false;
  std::string error;  // set when the run threw
  SolverResult result;
};

struct BatchResult {
  std::vector<RunOutcome> runs;
  std::vector<AggregateRow> aggregate;
  int divergence_count = 0;
  int failure_count = 0;
};

/// Runs cfg on every problem. Per-iteration medians use the runs that reached
/// that iteration; failures are recorded and the other runs continue.
BatchResult batch_run(const std::vector<Problem>& problems, const SolverConfig& cfg);

struct ImageMetrics {
  double nmse_db = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  double nmse_db = 0.0;  // lower median over images
  double ssim = 0.0;     // lower median over images
  std::vector<ImageMetrics> per_image;
};

MetricReport metric_report(const std::vector<ComplexImage>& estimates,
                           const std::vector<ComplexImage>& truths);

/// Grid columns in first-row order, then score_db and a `best` flag column.
void write_tuning_csv(const std::filesystem::path& path, const TuningResult& result);
/// Columns iteration,median_nmse_db,n_alive.
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);

}  // namespace pnp
