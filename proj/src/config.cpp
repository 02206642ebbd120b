#include "pnprecon/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>

#include "pnprecon/image_io.hpp"

namespace pnp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  if (text.empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + text + "'");
}

template <class F>
auto wrap(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

}  // namespace

KeyValues parse_config(std::istream& is) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    kv.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValues read_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path.string());
  return parse_config(is);
}

void write_config(const std::filesystem::path& path, const KeyValues& kv) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int digits = 15; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

double parse_double(const std::string& key, const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0' || std::isnan(v))
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

bool apply_solver_option(SolverConfig& cfg, const std::string& key, const std::string& value) {
  auto& d = cfg.denoiser;
  const auto num = [&] { return parse_double(key, value); };
  const auto integer = [&] { return static_cast<int>(parse_int(key, value)); };
  if (key == "algorithm") cfg.algorithm = wrap(key, [&] { return algorithm_from_string(value); });
  else if (key == "iters") cfg.max_iters = integer();
  else if (key == "denoiser") d.kind = wrap(key, [&] { return denoiser_kind_from_string(value); });
  else if (key == "lambda") d.lambda = num();
  else if (key == "map_prox") d.map_prox = parse_bool(key, value);
  else if (key == "wavelet_levels") d.wavelet_levels = integer();
  else if (key == "sigma") d.sigma = num();
  else if (key == "endpoint") d.endpoint = value;
  else if (key == "timeout") d.timeout_seconds = num();
  else if (key == "complex_policy") d.complex_policy = wrap(key, [&] { return complex_policy_from_string(value); });
  else if (key == "beta") {
    if (value.empty() || value == "auto") cfg.amp_beta.reset();
    else cfg.amp_beta = num();
  }
  else if (key == "gamma") cfg.admm_gamma = num();
  else if (key == "admm_classical") cfg.admm_classical = parse_bool(key, value);
  else if (key == "gamma2_init") cfg.vamp_gamma2_init = num();
  else if (key == "theta") cfg.vamp_theta = num();
  else if (key == "zeta_rule") {
    if (value == "fixed") cfg.vamp_zeta_rule = ZetaRule::fixed;
    else if (value == "adaptive") cfg.vamp_zeta_rule = ZetaRule::adaptive;
    else throw ConfigError(key + ": expected fixed or adaptive, got '" + value + "'");
  }
  else if (key == "zeta") cfg.vamp_zeta = num();
  else if (key == "t_switch") cfg.t_switch = integer();
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "probes") cfg.probes = integer();
  else if (key == "probe_epsilon") cfg.probe_epsilon = num();
  else return false;
  return true;
}

KeyValues describe(const SolverConfig& cfg) {
  const auto& d = cfg.denoiser;
  const auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"algorithm", to_string(cfg.algorithm)},
      {"iters", std::to_string(cfg.max_iters)},
      {"denoiser", to_string(d.kind)},
      {"lambda", format_double(d.lambda)},
      {"map_prox", b(d.map_prox)},
      {"wavelet_levels", std::to_string(d.wavelet_levels)},
      {"sigma", format_double(d.sigma)},
      {"endpoint", d.endpoint},
      {"timeout", format_double(d.timeout_seconds)},
      {"complex_policy", to_string(d.complex_policy)},
      {"beta", cfg.amp_beta ? format_double(*cfg.amp_beta) : "auto"},
      {"gamma", format_double(cfg.admm_gamma)},
      {"admm_classical", b(cfg.admm_classical)},
      {"gamma2_init", format_double(cfg.vamp_gamma2_init)},
      {"theta", format_double(cfg.vamp_theta)},
      {"zeta_rule", cfg.vamp_zeta_rule == ZetaRule::fixed ? "fixed" : "adaptive"},
      {"zeta", format_double(cfg.vamp_zeta)},
      {"t_switch", std::to_string(cfg.t_switch)},
      {"seed", std::to_string(cfg.seed)},
      {"probes", std::to_string(cfg.probes)},
      {"probe_epsilon", format_double(cfg.probe_epsilon)},
  };
}

}  // namespace pnp
