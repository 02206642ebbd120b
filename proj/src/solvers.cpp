#include "pnprecon/solvers.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "pnprecon/image_io.hpp"
#include "pnprecon/linear_stage.hpp"
#include "pnprecon/metrics.hpp"

namespace pnp {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::amp: return "amp";
    case Algorithm::damp: return "damp";
    case Algorithm::admm: return "admm";
    case Algorithm::admm_pr: return "admm_pr";
    case Algorithm::dd_vamp: return "dd_vamp";
    case Algorithm::dd_vamp_pp: return "dd_vamp_pp";
  }
  return "dd_vamp";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "amp") return Algorithm::amp;
  if (name == "damp") return Algorithm::damp;
  if (name == "admm") return Algorithm::admm;
  if (name == "admm_pr") return Algorithm::admm_pr;
  if (name == "dd_vamp") return Algorithm::dd_vamp;
  if (name == "dd_vamp_pp") return Algorithm::dd_vamp_pp;
  throw std::invalid_argument("unknown algorithm: " + name);
}

void SolverConfig::validate() const {
  const auto fail = [](const std::string& what) { throw std::invalid_argument("SolverConfig: " + what); };
  if (max_iters < 1) fail("max_iters must be >= 1");
  if (amp_beta && !(*amp_beta > 0.0)) fail("amp_beta must be positive");
  if (!(admm_gamma > 0.0)) fail("admm_gamma must be positive");
  if (!(vamp_gamma2_init > 0.0)) fail("vamp_gamma2_init must be positive");
  if (!(vamp_theta > 0.0 && vamp_theta <= 1.0)) fail("vamp_theta must lie in (0, 1]");
  if (!(vamp_zeta > 0.0 && vamp_zeta <= 1.0)) fail("vamp_zeta must lie in (0, 1]");
  if (t_switch < 0 || t_switch > max_iters) fail("t_switch must lie in [0, max_iters]");
  if (probes < 1) fail("probes must be >= 1");
  if (!(alpha_clamp > 0.0 && alpha_clamp < 0.5)) fail("alpha_clamp must lie in (0, 0.5)");
  if (!(gamma_min > 0.0 && gamma_min < gamma_max)) fail("gamma bounds are inconsistent");
}

double compute_zeta(double gamma1, double gamma2_bar, ZetaRule rule, double fixed_zeta) {
  if (rule == ZetaRule::fixed) return fixed_zeta;
  const double ratio = std::max(gamma1 / gamma2_bar, gamma2_bar / gamma1);
  return 2.0 / (1.0 + ratio);
}

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t iteration_seed(std::uint64_t seed, int t) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(t) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Run {
 public:
  Run(const Problem& prob, const SolverConfig& cfg, bool map_prox)
      : prob_(prob), cfg_(cfg), start_(Clock::now()) {
    prob.validate();
    cfg.validate();
    DenoiserSpec spec = cfg.denoiser;
    if (map_prox) {
      if (spec.kind != DenoiserKind::wavelet_soft && spec.kind != DenoiserKind::soft_threshold)
        throw std::invalid_argument("MAP prox mode needs a wavelet_soft or soft_threshold denoiser");
      spec.map_prox = true;
    }
    denoiser_ = make_denoiser(spec);
  }

  Denoiser& f() { return *denoiser_; }
  const SolverConfig& cfg() const { return cfg_; }
  SolverResult& result() { return result_; }

  IterationRecord& begin(int t) {
    auto& rec = result_.trace.records.emplace_back();
    rec.iteration = t + 1;
    return rec;
  }

  void finish(IterationRecord& rec, const ComplexImage& estimate, const ComplexImage* aux) {
    if (prob_.x0) rec.nmse_db = nmse_db(estimate, *prob_.x0);
    rec.seconds = std::chrono::duration<double>(Clock::now() - start_).count();
    rec.denoiser_calls = denoiser_->calls();
    if (cfg_.keep_iterates) {
      rec.estimate = estimate;
      if (aux) rec.aux = *aux;
    }
  }

  void diverge(int t, std::string quantity, double value, std::string message) {
    result_.divergence = DivergenceReport{t + 1, std::move(quantity), value, std::move(message)};
  }

  /// Normalized divergence of the denoiser at r, given f(r) = f_r.
  double divergence(const ComplexImage& r, double tau, const ComplexImage& f_r, int t) {
    if (cfg_.exact_linear_divergence)
      if (auto exact = denoiser_->exact_divergence(r.shape())) return *exact;
    return mc_divergence(*denoiser_, r, tau, cfg_.probe_epsilon, cfg_.probes,
                         iteration_seed(cfg_.seed, t), &f_r)
        .alpha_bar;
  }

 private:
  const Problem& prob_;
  const SolverConfig& cfg_;
  Clock::time_point start_;
  std::unique_ptr<Denoiser> denoiser_;
  SolverResult result_;
};

bool finite(double v) { return std::isfinite(v); }

// ---------------------------------------------------------------------------

SolverResult admm_impl(const Problem& prob, const SolverConfig& cfg, bool peaceman_rachford) {
  Run run(prob, cfg, !peaceman_rachford && cfg.admm_classical);
  const double gamma = cfg.admm_gamma;
  const double variance = 1.0 / gamma;
  const Shape shape = prob.shape();
  ComplexImage v(shape), u(shape), x(shape);

  for (int t = 0; t < cfg.max_iters; ++t) {
    auto& rec = run.begin(t);
    try {
      x = linear_estimate(lincomb(1.0, v, -1.0, u), gamma, prob);
      if (!x.all_finite()) {
        run.diverge(t, "x", std::numeric_limits<double>::quiet_NaN(), "linear stage produced non-finite values");
        break;
      }
      if (peaceman_rachford && cfg.admm_pr_extra_update) u = lincomb(1.0, u, 1.0, lincomb(1.0, x, -1.0, v));
      v = run.f()(lincomb(1.0, x, 1.0, u), variance);
    } catch (const NonFiniteOutput& e) {
      run.diverge(t, "v", std::numeric_limits<double>::quiet_NaN(), e.what());
      break;
    }
    u = lincomb(1.0, u, 1.0, lincomb(1.0, x, -1.0, v));
    rec.gamma1 = gamma;
    rec.gamma2 = gamma;
    run.finish(rec, v, &x);
  }
  auto& res = run.result();
  res.estimate = std::move(v);
  if (res.divergence) res.trace.records.pop_back();
  return std::move(res);
}

// DD-VAMP; the first `frozen_iters` iterations hold gamma1 = gamma2 = gamma2_init
// (alpha = 1/2, zeta = 1), which is exactly Peaceman-Rachford ADMM.
SolverResult vamp_impl(const Problem& prob, const SolverConfig& cfg, double gamma_init,
                       int frozen_iters, bool mark_switch) {
  Run run(prob, cfg, false);
  const Shape shape = prob.shape();
  const double lo = cfg.alpha_clamp, hi = 1.0 - cfg.alpha_clamp;
  const auto clamp = [&](double a, bool& clamped) {
    if (a < lo || a > hi || !finite(a)) {
      clamped = true;
      return finite(a) ? std::clamp(a, lo, hi) : hi;
    }
    return a;
  };

  VampState st{cfg.vamp_r2_init.value_or(ComplexImage(shape)), gamma_init, 0.0, false};
  require_same_shape(st.r2.shape(), shape, "vamp_r2_init");
  ComplexImage x1(shape);

  for (int t = 0; t < cfg.max_iters; ++t) {
    auto& rec = run.begin(t);
    const bool frozen = t < frozen_iters;
    if (mark_switch && t == frozen_iters) {
      rec.switch_point = true;
      run.result().trace.switch_iteration = t + 1;
    }
    try {
      const double gamma2 = st.gamma2;
      // Linear stage
      const ComplexImage x2 = linear_estimate(st.r2, gamma2, prob);
      bool clamped = false;
      const double alpha2 = frozen ? 0.5 : clamp(linear_sensitivity(gamma2, prob), clamped);
      const ComplexImage r1 = lincomb(1.0 / (1.0 - alpha2), x2, -alpha2 / (1.0 - alpha2), st.r2);
      const double gamma1 = frozen ? gamma2 : gamma2 * (1.0 - alpha2) / alpha2;
      if (!(gamma1 >= cfg.gamma_min && gamma1 <= cfg.gamma_max)) {
        run.diverge(t, "gamma1", gamma1, "gamma1 left [gamma_min, gamma_max]");
        break;
      }
      if (!r1.all_finite()) {
        run.diverge(t, "r1", std::numeric_limits<double>::quiet_NaN(), "non-finite denoiser input");
        break;
      }

      // Denoising
      x1 = run.f()(r1, 1.0 / gamma1);
      double alpha1 = 0.5;
      if (!frozen) {
        const double alpha1_bar = clamp(run.divergence(r1, 1.0 / gamma1, x1, t), clamped);
        alpha1 = alpha1_bar;
        if (st.has_alpha1_prev) {
          const double amp = cfg.vamp_theta * std::sqrt(alpha1_bar) +
                             (1.0 - cfg.vamp_theta) * std::sqrt(st.alpha1_prev);
          alpha1 = clamp(amp * amp, clamped);
        }
      }
      const ComplexImage r2_bar = lincomb(1.0 / (1.0 - alpha1), x1, -alpha1 / (1.0 - alpha1), r1);
      const double gamma2_bar = frozen ? gamma1 : gamma1 * (1.0 - alpha1) / alpha1;
      if (!(gamma2_bar >= cfg.gamma_min && gamma2_bar <= cfg.gamma_max)) {
        run.diverge(t, "gamma2", gamma2_bar, "gamma2 left [gamma_min, gamma_max]");
        break;
      }

      // Damping
      const double zeta = frozen ? 1.0 : compute_zeta(gamma1, gamma2_bar, cfg.vamp_zeta_rule, cfg.vamp_zeta);
      if (zeta == 1.0) {
        st.r2 = r2_bar;
        st.gamma2 = gamma2_bar;
      } else {
        st.r2 = lincomb(zeta, r2_bar, 1.0 - zeta, st.r2);
        const double amp = zeta / std::sqrt(gamma2_bar) + (1.0 - zeta) / std::sqrt(gamma2);
        st.gamma2 = 1.0 / (amp * amp);
      }
      st.alpha1_prev = alpha1;
      st.has_alpha1_prev = true;

      rec.gamma1 = gamma1;
      rec.gamma2 = gamma2;
      rec.alpha1 = alpha1;
      rec.alpha2 = alpha2;
      rec.zeta = zeta;
      rec.tau = 1.0 / gamma1;
      rec.alpha_clamped = clamped;
      rec.zeta_alpha_form = 2.0 * std::min(alpha1, alpha2);
      run.finish(rec, x1, &x2);
    } catch (const NonFiniteOutput& e) {
      run.diverge(t, "x1", std::numeric_limits<double>::quiet_NaN(), e.what());
      break;
    }
  }
  auto& res = run.result();
  if (res.divergence) res.trace.records.pop_back();
  res.estimate = std::move(x1);
  res.vamp_state = std::move(st);
  return std::move(res);
}

}  // namespace

SolverResult run_amp(const Problem& prob, const SolverConfig& cfg) {
  if (cfg.algorithm != Algorithm::amp && cfg.algorithm != Algorithm::damp)
    throw std::invalid_argument("run_amp needs algorithm amp or damp");
  Run run(prob, cfg, cfg.algorithm == Algorithm::amp);
  const auto& op = *prob.op;
  const double n = static_cast<double>(op.pixels());
  const double m = static_cast<double>(op.measurements());
  const double beta = cfg.amp_beta.value_or(n / op.frobenius_sq());

  ComplexImage x(prob.shape());
  CVector v(op.measurements());
  double onsager_trace = 0.0;  // tr{df} at the previous denoiser input; 0 at t = 0
  double tau_ref = 0.0;

  for (int t = 0; t < cfg.max_iters; ++t) {
    auto& rec = run.begin(t);
    const CVector ax = op.apply(x);
    CVector v_next(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      v_next[i] = beta * (prob.y[i] - ax[i] + (onsager_trace / m) * v[i]);
    double tau = 0.0;
    for (const auto& e : v_next) tau += std::norm(e);
    tau /= m;
    if (t == 0) tau_ref = tau;
    if (!finite(tau) || (tau_ref > 0.0 && tau > cfg.amp_tau_blowup * tau_ref)) {
      run.diverge(t, "tau", tau, "AMP noise-variance estimate blew up");
      break;
    }
    const ComplexImage r = lincomb(1.0, x, 1.0, op.adjoint(v_next));
    // y = 0 gives tau = 0; the denoiser needs a positive variance.
    const double tau_eff = std::max(tau, std::numeric_limits<double>::min());
    try {
      ComplexImage x_next = run.f()(r, tau_eff);
      const double alpha = run.divergence(r, tau_eff, x_next, t);
      onsager_trace = n * alpha;
      x = std::move(x_next);
      rec.alpha1 = alpha;
    } catch (const NonFiniteOutput& e) {
      run.diverge(t, "x", std::numeric_limits<double>::quiet_NaN(), e.what());
      break;
    }
    v = std::move(v_next);
    rec.tau = tau;
    run.finish(rec, x, &r);
  }
  auto& res = run.result();
  if (res.divergence) res.trace.records.pop_back();
  res.estimate = std::move(x);
  return std::move(res);
}

SolverResult run_admm(const Problem& prob, const SolverConfig& cfg) {
  return admm_impl(prob, cfg, false);
}

SolverResult run_admm_pr(const Problem& prob, const SolverConfig& cfg) {
  return admm_impl(prob, cfg, true);
}

SolverResult run_dd_vamp(const Problem& prob, const SolverConfig& cfg) {
  return vamp_impl(prob, cfg, cfg.vamp_gamma2_init, cfg.vamp_freeze_gamma ? cfg.max_iters : 0, false);
}

SolverResult run_dd_vamp_pp(const Problem& prob, const SolverConfig& cfg) {
  const bool mark = cfg.t_switch > 0 && cfg.t_switch < cfg.max_iters;
  return vamp_impl(prob, cfg, cfg.admm_gamma, cfg.t_switch, mark);
}

SolverResult run_solver(const Problem& prob, const SolverConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::amp:
    case Algorithm::damp: return run_amp(prob, cfg);
    case Algorithm::admm: return run_admm(prob, cfg);
    case Algorithm::admm_pr: return run_admm_pr(prob, cfg);
    case Algorithm::dd_vamp: return run_dd_vamp(prob, cfg);
    case Algorithm::dd_vamp_pp: return run_dd_vamp_pp(prob, cfg);
  }
  throw std::invalid_argument("unknown algorithm");
}

void write_trace_csv(const std::filesystem::path& path, const SolverTrace& trace) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << "iteration,nmse_db,gamma1,gamma2,alpha1,alpha2,zeta,tau,seconds,denoiser_calls,marker\n";
  os << std::setprecision(12);
  const auto opt = [&](const std::optional<double>& v) {
    if (v) os << *v;
    os << ',';
  };
  for (const auto& r : trace.records) {
    os << r.iteration << ',';
    opt(r.nmse_db);
    opt(r.gamma1);
    opt(r.gamma2);
    opt(r.alpha1);
    opt(r.alpha2);
    opt(r.zeta);
    opt(r.tau);
    os << r.seconds << ',' << r.denoiser_calls << ',' << (r.switch_point ? "switch" : "") << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace pnp
