#include "pnprecon/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>

#include "pnprecon/config.hpp"
#include "pnprecon/image_io.hpp"
#include "pnprecon/metrics.hpp"

namespace pnp {

void apply_param(SolverConfig& cfg, const std::string& name, double value) {
  static const char* const kIntegers[] = {"iters", "wavelet_levels", "t_switch", "probes", "seed"};
  std::string text = format_double(value);
  for (const char* k : kIntegers)
    if (name == k) {
      if (value != std::floor(value)) throw ConfigError(name + " must be an integer");
      text = std::to_string(static_cast<long long>(value));
    }
  if (!apply_solver_option(cfg, name, text)) throw ConfigError("unknown parameter: " + name);
}

void TuningSpec::validate() const {
  if (grid.empty()) throw std::invalid_argument("tuning grid is empty");
  if (!(1 <= t_meas && t_meas <= t_max)) throw std::invalid_argument("need 1 <= t_meas <= t_max");
  if (images.empty()) throw std::invalid_argument("tuning needs at least one image");
  for (const auto& p : images)
    if (!p.x0) throw std::invalid_argument("tuning images need ground truth");
}

double trajectory_score(const SolverResult& run, int t_meas, int t_max) {
  const auto inf = std::numeric_limits<double>::infinity();
  if (run.diverged()) return inf;
  double sum = 0.0;
  int count = 0;
  for (const auto& r : run.trace.records) {
    if (r.iteration < t_meas || r.iteration > t_max) continue;
    if (!r.nmse_db) return inf;
    sum += from_db(*r.nmse_db);
    ++count;
  }
  if (count != t_max - t_meas + 1) return inf;
  return sum / count;
}

double lower_median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  const std::size_t k = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

namespace {

// Runs fn(i) for i in [0, n) on OpenMP threads; rethrows the first exception
// by index.
template <class F>
void parallel_items(std::size_t n, F&& fn) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

TuningResult tune(const TuningSpec& spec, const SolverConfig& cfg_template) {
  spec.validate();
  const std::size_t g = spec.grid.size(), m = spec.images.size();

  std::vector<SolverConfig> configs;
  configs.reserve(g);
  for (const auto& point : spec.grid) {
    SolverConfig cfg = cfg_template;
    for (const auto& [name, value] : point) apply_param(cfg, name, value);
    cfg.max_iters = spec.t_max;
    cfg.keep_iterates = false;
    cfg.validate();
    configs.push_back(std::move(cfg));
  }

  std::vector<double> scores(g * m);
  parallel_items(g * m, [&](std::size_t item) {
    const auto run = run_solver(spec.images[item % m], configs[item / m]);
    scores[item] = trajectory_score(run, spec.t_meas, spec.t_max);
  });

  TuningResult result;
  bool any_finite = false;
  for (std::size_t i = 0; i < g; ++i) {
    TuningRow row;
    row.params = spec.grid[i];
    row.per_image.assign(scores.begin() + static_cast<std::ptrdiff_t>(i * m),
                         scores.begin() + static_cast<std::ptrdiff_t>((i + 1) * m));
    row.diverged = static_cast<int>(std::count_if(row.per_image.begin(), row.per_image.end(),
                                                  [](double s) { return std::isinf(s); }));
    const double med = lower_median(row.per_image);
    row.score_db = std::isinf(med) ? med : to_db(med);
    if (std::isfinite(row.score_db) &&
        (!any_finite || row.score_db < result.table[result.best].score_db)) {
      result.best = i;
      any_finite = true;
    }
    result.table.push_back(std::move(row));
  }
  if (!any_finite) throw AllDiverged("every grid point diverged");
  return result;
}

BatchResult batch_run(const std::vector<Problem>& problems, const SolverConfig& cfg) {
  BatchResult out;
  out.runs.resize(problems.size());
  parallel_items(problems.size(), [&](std::size_t i) {
    auto& o = out.runs[i];
    try {
      o.result = run_solver(problems[i], cfg);
      o.diverged = o.result.diverged();
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  });

  std::size_t longest = 0;
  for (const auto& o : out.runs) {
    if (!o.error.empty()) ++out.failure_count;
    if (o.diverged) ++out.divergence_count;
    longest = std::max(longest, o.result.trace.records.size());
  }
  for (std::size_t t = 0; t < longest; ++t) {
    std::vector<double> vals;
    for (const auto& o : out.runs) {
      if (!o.error.empty()) continue;
      const auto& recs = o.result.trace.records;
      if (t < recs.size() && recs[t].nmse_db) vals.push_back(*recs[t].nmse_db);
    }
    if (vals.empty()) continue;
    out.aggregate.push_back({static_cast<int>(t + 1), lower_median(vals), static_cast<int>(vals.size())});
  }
  return out;
}

MetricReport metric_report(const std::vector<ComplexImage>& estimates,
                           const std::vector<ComplexImage>& truths) {
  if (estimates.size() != truths.size() || estimates.empty())
    throw std::invalid_argument("metric_report needs matching, non-empty image lists");
  MetricReport rep;
  std::vector<double> n, s;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const ImageMetrics im{nmse_db(estimates[i], truths[i]), ssim(estimates[i], truths[i])};
    rep.per_image.push_back(im);
    n.push_back(im.nmse_db);
    s.push_back(im.ssim);
  }
  rep.nmse_db = lower_median(n);
  rep.ssim = lower_median(s);
  return rep;
}

void write_tuning_csv(const std::filesystem::path& path, const TuningResult& result) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  std::vector<std::string> cols;
  for (const auto& row : result.table)
    for (const auto& [name, _] : row.params)
      if (std::find(cols.begin(), cols.end(), name) == cols.end()) cols.push_back(name);
  for (const auto& c : cols) os << c << ',';
  os << "score_db,best\n";
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    const auto& row = result.table[i];
    for (const auto& c : cols) {
      for (const auto& [name, value] : row.params)
        if (name == c) {
          os << format_double(value);
          break;
        }
      os << ',';
    }
    os << format_double(row.score_db) << ',' << (i == result.best ? 1 : 0) << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << "iteration,median_nmse_db,n_alive\n" << std::setprecision(12);
  for (const auto& r : rows) os << r.iteration << ',' << r.median_nmse_db << ',' << r.n_alive << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace pnp
