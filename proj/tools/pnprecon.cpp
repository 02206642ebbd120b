// pnprecon: simulate problems, run reconstructions, tune solver parameters.
//
// Exit codes: 0 success, 2 usage error, 3 solver divergence, 4 I/O error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pnprecon/config.hpp"
#include "pnprecon/experiments.hpp"
#include "pnprecon/external_denoiser.hpp"
#include "pnprecon/forward_model.hpp"
#include "pnprecon/image_io.hpp"
#include "pnprecon/metrics.hpp"
#include "pnprecon/phantom.hpp"
#include "pnprecon/solvers.hpp"

namespace fs = std::filesystem;
using namespace pnp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitIo = 4;

constexpr const char* kPhantomFile = "phantom.cplx";
constexpr const char* kMaskFile = "mask.txt";
constexpr const char* kKspaceFile = "kspace.cplx";
constexpr const char* kManifestFile = "manifest.txt";

// Manifest keys that describe a run but are not flags.
const char* const kInfoKeys[] = {"command", "tool_version", "gamma_w", "measurements",
                                 "pgm_min", "pgm_max", "status", "diverged_at",
                                 "best_score_db", "problem_snr_db", "problem_mask_seed",
                                 "problem_noise_seed"};

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string dashed(std::string key) {
  for (auto& c : key)
    if (c == '_') c = '-';
  return key;
}

std::string underscored(std::string key) {
  for (auto& c : key)
    if (c == '-') c = '_';
  return key;
}

// --- solver flags ----------------------------------------------------------

const std::map<std::string, std::string>& solver_help() {
  static const std::map<std::string, std::string> help = {
      {"algorithm", "amp, damp, admm, admm_pr, dd_vamp or dd_vamp_pp"},
      {"iters", "iteration count"},
      {"denoiser", "wavelet_soft, soft_threshold, gaussian_smooth, linear_test or external"},
      {"lambda", "shrinkage scale: threshold = lambda * sqrt(tau)"},
      {"map_prox", "threshold lambda * tau (exact l1 prox) instead of lambda * sqrt(tau)"},
      {"wavelet_levels", "wavelet decomposition levels"},
      {"sigma", "gaussian_smooth kernel width in pixels"},
      {"endpoint", "external denoiser: server command line or unix:<socket path>"},
      {"timeout", "external denoiser timeout per call, seconds"},
      {"complex_policy", "split_re_im or magnitude_phase"},
      {"beta", "AMP step scaling, or auto for N / ||A||_F^2"},
      {"gamma", "ADMM stepsize; warm-start precision of dd_vamp_pp"},
      {"admm_classical", "ADMM with the l1-wavelet prox instead of the plug-in denoiser"},
      {"gamma2_init", "initial gamma2 of dd_vamp"},
      {"theta", "damping of alpha1, in (0, 1]"},
      {"zeta_rule", "fixed or adaptive"},
      {"zeta", "fixed damping of (r2, gamma2), in (0, 1]"},
      {"t_switch", "dd_vamp_pp warm-start iterations"},
      {"seed", "seed of the divergence probes"},
      {"probes", "probes per divergence estimate"},
      {"probe_epsilon", "probe step; 0 for the scale-relative default"},
  };
  return help;
}

void add_solver_options(CLI::App* app, std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : describe(SolverConfig{})) values[key] = value;
  for (auto& [key, value] : values) {
    std::string names = "--" + dashed(key);
    if (key == "algorithm") names += ",--alg";
    app->add_option(names, value, solver_help().at(key))->capture_default_str();
  }
}

SolverConfig resolve_solver(const std::map<std::string, std::string>& values) {
  SolverConfig cfg;
  for (const auto& [key, value] : values) apply_solver_option(cfg, key, value);
  cfg.validate();
  return cfg;
}

// --- manifests ---------------------------------------------------------------

void write_manifest(const fs::path& path, const std::string& command, const KeyValues& kv) {
  KeyValues all = {{"command", command}, {"tool_version", PNPRECON_VERSION}};
  all.insert(all.end(), kv.begin(), kv.end());
  write_config(path, all);
}

void append_manifest(const fs::path& path, const KeyValues& kv) {
  std::ofstream os(path, std::ios::app);
  if (!os) throw IoError("cannot append to " + path.string());
  for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
}

std::string lookup(const KeyValues& kv, const std::string& key) {
  std::string out;
  bool found = false;
  for (const auto& [k, v] : kv)
    if (k == key) {
      out = v;
      found = true;
    }
  if (!found) throw IoError("manifest lacks key '" + key + "'");
  return out;
}

// --- problem directories ------------------------------------------------------

struct LoadedProblem {
  Problem problem;
  KeyValues manifest;
};

LoadedProblem load_problem(const fs::path& dir) {
  LoadedProblem out;
  out.manifest = read_config(dir / kManifestFile);
  auto mask = std::make_shared<const SamplingMask>(read_mask(dir / kMaskFile));
  const ComplexImage kspace = read_cplx(dir / kKspaceFile);
  if (kspace.shape() != mask->shape) throw IoError("k-space and mask shapes differ in " + dir.string());

  Problem& p = out.problem;
  p.op = std::make_shared<MaskedFourierOperator>(*mask);
  p.y.reserve(mask->kept.size());
  for (std::size_t k : mask->kept) p.y.push_back(kspace[k]);
  p.gamma_w = parse_double("gamma_w", lookup(out.manifest, "gamma_w"));
  p.snr_db = parse_double("snr_db", lookup(out.manifest, "snr_db"));
  if (fs::exists(dir / kPhantomFile)) {
    p.x0 = read_cplx(dir / kPhantomFile);
    if (p.x0->shape() != mask->shape) throw IoError("phantom and mask shapes differ in " + dir.string());
  }
  p.validate();
  return out;
}

// --- commands -----------------------------------------------------------------

struct SimulateFlags {
  std::string phantom = "shepp_logan";
  std::string phantom_file;
  std::uint64_t variant = 0;
  std::size_t size = 128;
  std::size_t height = 0, width = 0;
  std::string mask = "cartesian";
  double accel = 4.0;
  double center_fraction = 0.08;
  double poly_degree = 6.0;
  std::string snr_db = "40";
  std::uint64_t seed = 0;
  std::int64_t mask_seed = -1, noise_seed = -1;
  std::string out;
};

int cmd_simulate(const SimulateFlags& f) {
  const Shape shape{f.height ? f.height : f.size, f.width ? f.width : f.size};
  if (shape.size() == 0) throw UsageError("image size must be positive");
  if (!(f.accel >= 1.0)) throw UsageError("--R must be >= 1");
  const double snr = parse_double("snr_db", f.snr_db);
  const std::uint64_t mask_seed = f.mask_seed >= 0 ? static_cast<std::uint64_t>(f.mask_seed) : f.seed;
  const std::uint64_t noise_seed =
      f.noise_seed >= 0 ? static_cast<std::uint64_t>(f.noise_seed) : f.seed + 1;

  PhantomKind pk{};
  MaskKind mk{};
  try {
    pk = phantom_kind_from_string(f.phantom);
    mk = mask_kind_from_string(f.mask);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  SamplingMask mask;
  try {
    switch (mk) {
      case MaskKind::cartesian: mask = make_cartesian_mask(shape, f.accel, f.center_fraction, mask_seed); break;
      case MaskKind::point: mask = make_point_mask(shape, f.accel, f.poly_degree, mask_seed); break;
      case MaskKind::full: mask = make_full_mask(shape); break;
      case MaskKind::custom: throw UsageError("custom masks cannot be simulated");
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const ComplexImage x0 = make_phantom(shape, pk, f.variant, f.phantom_file);

  fs::create_directories(f.out);
  const fs::path dir(f.out);
  KeyValues kv = {
      {"phantom", f.phantom},         {"phantom_file", f.phantom_file},
      {"variant", std::to_string(f.variant)},
      {"height", std::to_string(shape.height)}, {"width", std::to_string(shape.width)},
      {"mask", f.mask},               {"R", format_double(f.accel)},
      {"center_fraction", format_double(f.center_fraction)},
      {"poly_degree", format_double(f.poly_degree)},
      {"snr_db", format_double(snr)}, {"seed", std::to_string(f.seed)},
      {"mask_seed", std::to_string(mask_seed)}, {"noise_seed", std::to_string(noise_seed)},
      {"out", f.out},
  };
  write_manifest(dir / kManifestFile, "simulate", kv);

  auto shared_mask = std::make_shared<const SamplingMask>(mask);
  double gamma_w = 0.0;
  const KSpaceVector y = add_awgn(apply_A(x0, shared_mask), snr, noise_seed, &gamma_w);
  ComplexImage kspace(shape);
  for (std::size_t i = 0; i < mask.kept.size(); ++i) kspace[mask.kept[i]] = y.data[i];

  write_cplx(dir / kPhantomFile, x0);
  write_mask(dir / kMaskFile, mask);
  write_cplx(dir / kKspaceFile, kspace);
  append_manifest(dir / kManifestFile, {{"gamma_w", format_double(gamma_w)},
                                        {"measurements", std::to_string(mask.kept.size())}});
  std::cout << "wrote " << dir.string() << " (" << mask.kept.size() << " of " << shape.size()
            << " k-space samples, gamma_w = " << gamma_w << ")\n";
  return kExitOk;
}

struct ReconFlags {
  std::string problem;
  std::string out;
  std::map<std::string, std::string> solver;
};

int cmd_recon(const ReconFlags& f) {
  SolverConfig cfg;
  try {
    cfg = resolve_solver(f.solver);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const LoadedProblem lp = load_problem(f.problem);

  fs::create_directories(f.out);
  const fs::path dir(f.out);
  KeyValues kv = {{"problem", f.problem}, {"out", f.out}};
  for (auto& e : describe(cfg)) kv.push_back(std::move(e));
  kv.push_back({"problem_snr_db", lookup(lp.manifest, "snr_db")});
  kv.push_back({"problem_mask_seed", lookup(lp.manifest, "mask_seed")});
  kv.push_back({"problem_noise_seed", lookup(lp.manifest, "noise_seed")});
  kv.push_back({"gamma_w", format_double(lp.problem.gamma_w)});
  write_manifest(dir / kManifestFile, "recon", kv);

  const SolverResult res = run_solver(lp.problem, cfg);
  write_trace_csv(dir / "trace.csv", res.trace);
  write_cplx(dir / "estimate.cplx", res.estimate);
  const MagnitudeRange range = write_magnitude_pgm(dir / "magnitude.pgm", res.estimate);
  KeyValues tail = {{"pgm_min", format_double(range.min)}, {"pgm_max", format_double(range.max)}};
  if (res.diverged()) {
    const auto& d = *res.divergence;
    tail.push_back({"status", "diverged"});
    tail.push_back({"diverged_at", std::to_string(d.iteration)});
    append_manifest(dir / kManifestFile, tail);
    std::cerr << "diverged at iteration " << d.iteration << ": " << d.quantity << " = " << d.value
              << " (" << d.message << ")\n";
    return kExitDiverged;
  }
  tail.push_back({"status", "ok"});
  append_manifest(dir / kManifestFile, tail);
  std::cout << to_string(cfg.algorithm) << ": " << res.trace.records.size() << " iterations";
  if (lp.problem.x0) std::cout << ", final NMSE " << nmse_db(res.estimate, *lp.problem.x0) << " dB";
  std::cout << '\n';
  return kExitOk;
}

struct TuneFlags {
  std::vector<std::string> problems;
  std::vector<std::string> params;
  std::vector<std::string> grids;
  int t_meas = 35;
  int t_max = 150;
  std::string out;
  std::map<std::string, std::string> solver;
};

std::vector<double> parse_grid(const std::string& name, const std::string& text) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    values.push_back(parse_double(name, item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return values;
}

int cmd_tune(const TuneFlags& f) {
  if (f.problems.empty()) throw UsageError("tune needs at least one --problem");
  if (f.params.empty()) throw UsageError("tune needs --param/--grid pairs");
  if (f.params.size() != f.grids.size()) throw UsageError("every --param needs one --grid");
  SolverConfig base;
  TuningSpec spec;
  try {
    base = resolve_solver(f.solver);
    // Cartesian product, first parameter varying slowest.
    spec.grid = {ParamAssignment{}};
    for (std::size_t i = 0; i < f.params.size(); ++i) {
      const std::string name = underscored(f.params[i]);
      const auto values = parse_grid(name, f.grids[i]);
      std::vector<ParamAssignment> next;
      for (const auto& prefix : spec.grid)
        for (double v : values) {
          ParamAssignment a = prefix;
          a.emplace_back(name, v);
          SolverConfig probe = base;
          apply_param(probe, name, v);
          next.push_back(std::move(a));
        }
      spec.grid = std::move(next);
    }
    spec.t_meas = f.t_meas;
    spec.t_max = f.t_max;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  for (const auto& dir : f.problems) {
    LoadedProblem lp = load_problem(dir);
    if (!lp.problem.x0) throw IoError("tuning problem lacks " + std::string(kPhantomFile) + ": " + dir);
    spec.images.push_back(std::move(lp.problem));
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  fs::create_directories(f.out);
  const fs::path dir(f.out);
  KeyValues kv;
  for (const auto& p : f.problems) kv.push_back({"problem", p});
  for (std::size_t i = 0; i < f.params.size(); ++i) {
    kv.push_back({"param", f.params[i]});
    kv.push_back({"grid", f.grids[i]});
  }
  kv.push_back({"t_meas", std::to_string(f.t_meas)});
  kv.push_back({"t_max", std::to_string(f.t_max)});
  kv.push_back({"out", f.out});
  for (auto& e : describe(base)) kv.push_back(std::move(e));
  write_manifest(dir / kManifestFile, "tune", kv);

  TuningResult result;
  try {
    result = tune(spec, base);
  } catch (const AllDiverged& e) {
    std::cerr << e.what() << '\n';
    return kExitDiverged;
  }
  write_tuning_csv(dir / "report.csv", result);
  SolverConfig best = base;
  for (const auto& [name, value] : result.best_params()) apply_param(best, name, value);
  best.max_iters = spec.t_max;
  write_config(dir / "best.cfg", describe(best));
  append_manifest(dir / kManifestFile, {{"best_score_db", format_double(result.table[result.best].score_db)}});
  std::cout << "best:";
  for (const auto& [name, value] : result.best_params()) std::cout << ' ' << name << '=' << value;
  std::cout << " (" << result.table[result.best].score_db << " dB)\n";
  return kExitOk;
}

// --- config splicing ------------------------------------------------------------

bool is_info_key(const std::string& key) {
  for (const char* k : kInfoKeys)
    if (key == k) return true;
  return false;
}

// Rewrites argv so that entries of --config files come first; CLI11 keeps the
// last value of repeated options, so explicit flags win over the file.
std::vector<std::string> splice_config(const std::vector<std::string>& args, const CLI::App& app) {
  if (args.size() < 2) return args;
  const CLI::App* sub = nullptr;
  for (const auto* s : app.get_subcommands({}))
    if (s->get_name() == args[1]) sub = s;
  if (!sub) return args;

  std::vector<std::string> config_paths, rest;
  for (std::size_t i = 2; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      config_paths.push_back(args[++i]);
    } else if (a.rfind("--config=", 0) == 0) {
      config_paths.push_back(a.substr(9));
    } else {
      rest.push_back(a);
    }
  }
  std::vector<std::string> out = {args[0], args[1]};
  for (const auto& path : config_paths) {
    for (const auto& [key, value] : read_config(path)) {
      const std::string flag = "--" + dashed(key);
      if (!sub->get_option_no_throw(flag)) {
        if (!is_info_key(key)) std::cerr << "warning: " << path << ": ignoring unknown key '" << key << "'\n";
        continue;
      }
      out.push_back(flag + "=" + value);
    }
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plug-and-play compressed-sensing MRI reconstruction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(PNPRECON_VERSION));
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  SimulateFlags sim;
  auto* s = app.add_subcommand("simulate", "Generate a phantom, sampling mask and noisy k-space");
  s->add_option("--phantom", sim.phantom, "shepp_logan, blocks or natural_file")->capture_default_str();
  s->add_option("--phantom-file", sim.phantom_file, "image for natural_file (.pgm or .cplx)");
  s->add_option("--variant", sim.variant, "phantom variant; 0 is the canonical one")->capture_default_str();
  s->add_option("--size", sim.size, "square image side")->capture_default_str();
  s->add_option("--height", sim.height, "image height (overrides --size)");
  s->add_option("--width", sim.width, "image width (overrides --size)");
  s->add_option("--mask", sim.mask, "cartesian, point or full")->capture_default_str();
  s->add_option("--R", sim.accel, "acceleration N / M")->capture_default_str();
  s->add_option("--center-fraction", sim.center_fraction, "fully sampled central band (cartesian)")->capture_default_str();
  s->add_option("--poly-degree", sim.poly_degree, "density exponent (point)")->capture_default_str();
  s->add_option("--snr-db", sim.snr_db, "measurement SNR in dB, or inf")->capture_default_str();
  s->add_option("--seed", sim.seed, "base seed")->capture_default_str();
  s->add_option("--mask-seed", sim.mask_seed, "mask seed (default: --seed)");
  s->add_option("--noise-seed", sim.noise_seed, "noise seed (default: --seed + 1)");
  s->add_option("--out", sim.out, "output directory")->required();
  s->add_option("--config", "key = value file; flags take precedence");

  ReconFlags rec;
  auto* r = app.add_subcommand("recon", "Reconstruct a simulated problem");
  r->add_option("--problem", rec.problem, "problem directory written by simulate")->required();
  r->add_option("--out", rec.out, "output directory")->required();
  add_solver_options(r, rec.solver);
  r->add_option("--config", "key = value file; flags take precedence");

  TuneFlags tun;
  auto* t = app.add_subcommand("tune", "Grid-tune solver parameters on training problems");
  t->add_option("--problem", tun.problems, "training problem directory (repeatable)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  t->add_option("--param", tun.params, "parameter name (repeatable, paired with --grid)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  t->add_option("--grid", tun.grids, "comma-separated values for the matching --param")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  t->add_option("--t-meas", tun.t_meas, "first scored iteration")->capture_default_str();
  t->add_option("--t-max", tun.t_max, "iterations per run; last scored iteration")->capture_default_str();
  t->add_option("--out", tun.out, "output directory")->required();
  add_solver_options(t, tun.solver);
  t->add_option("--config", "key = value file; flags take precedence");

  try {
    const std::vector<std::string> raw(argv, argv + argc);
    std::vector<std::string> args = splice_config(raw, app);
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(std::move(reversed));

    if (s->parsed()) return cmd_simulate(sim);
    if (r->parsed()) return cmd_recon(rec);
    if (t->parsed()) return cmd_tune(tun);
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const EndpointUnavailable& e) {
    std::cerr << "external denoiser unavailable: " << e.what() << '\n';
    return kExitIo;
  } catch (const DenoiserTimeout& e) {
    std::cerr << "external denoiser timed out: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
