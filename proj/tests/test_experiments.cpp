#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pnprecon/config.hpp"
#include "pnprecon/experiments.hpp"
#include "pnprecon/metrics.hpp"
#include "pnprecon/phantom.hpp"
#include "support.hpp"

using namespace pnp;

namespace {

// Reference SSIM through summed-area tables of a, b, a^2, b^2, ab.
double ssim_oracle(const std::vector<double>& a, const std::vector<double>& b, std::size_t h, std::size_t w,
                   double range) {
  const std::size_t W = w + 1;
  std::vector<double> sa((h + 1) * W), sb(sa.size()), saa(sa.size()), sbb(sa.size()), sab(sa.size());
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const double x = a[r * w + c], y = b[r * w + c];
      const std::size_t k = (r + 1) * W + c + 1, up = r * W + c + 1, left = (r + 1) * W + c, diag = r * W + c;
      sa[k] = x + sa[up] + sa[left] - sa[diag];
      sb[k] = y + sb[up] + sb[left] - sb[diag];
      saa[k] = x * x + saa[up] + saa[left] - saa[diag];
      sbb[k] = y * y + sbb[up] + sbb[left] - sbb[diag];
      sab[k] = x * y + sab[up] + sab[left] - sab[diag];
    }
  const auto box = [&](const std::vector<double>& s, std::size_t r, std::size_t c) {
    return s[(r + 8) * W + c + 8] - s[r * W + c + 8] - s[(r + 8) * W + c] + s[r * W + c];
  };
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
  double total = 0.0;
  int count = 0;
  for (std::size_t r = 0; r + 8 <= h; ++r)
    for (std::size_t c = 0; c + 8 <= w; ++c) {
      const double n = 64.0;
      const double ma = box(sa, r, c) / n, mb = box(sb, r, c) / n;
      const double va = (box(saa, r, c) - n * ma * ma) / (n - 1);
      const double vb = (box(sbb, r, c) - n * mb * mb) / (n - 1);
      const double cov = (box(sab, r, c) - n * ma * mb) / (n - 1);
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

Problem cartesian_phantom(Shape s, std::uint64_t seed) {
  auto op = std::make_shared<MaskedFourierOperator>(make_cartesian_mask(s, 4.0, 0.08, seed));
  return simulate_problem(make_phantom(s, PhantomKind::shepp_logan, seed), op, 40.0, seed + 1);
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("nmse examples") {
  const auto x0 = test::random_image({16, 16}, 1);
  CHECK(nmse_db(x0, x0) == kNmseFloorDb);
  CHECK(nmse_db(ComplexImage(x0.shape()), x0) == doctest::Approx(0.0).epsilon(1e-15));
  auto e = test::random_image({16, 16}, 2);
  const double scale = std::sqrt(0.01 * squared_norm(x0) / squared_norm(e));
  const auto xhat = lincomb(1.0, x0, scale, e);
  CHECK(nmse_db(xhat, x0) == doctest::Approx(-20.0).epsilon(1e-12));
  CHECK_THROWS_AS(nmse_db(x0, ComplexImage(x0.shape())), std::invalid_argument);

  // Invariance to a common complex scale factor.
  const Complex c = std::polar(3.0, 0.7);
  ComplexImage cx = xhat, cx0 = x0;
  for (auto& v : cx.data()) v *= c;
  for (auto& v : cx0.data()) v *= c;
  CHECK(nmse_db(cx, cx0) == doctest::Approx(nmse_db(xhat, x0)).epsilon(1e-12));
}

TEST_CASE("ssim examples") {
  const auto x0 = make_phantom({32, 32}, PhantomKind::shepp_logan, 0);
  CHECK(ssim(x0, x0) == 1.0);
  // Negation is anti-correlated only where window means vanish; every 8x8
  // window of a checkerboard has mean zero.
  ComplexImage board({24, 24}), neg({24, 24});
  for (std::size_t i = 0; i < 24; ++i)
    for (std::size_t j = 0; j < 24; ++j) {
      board(i, j) = ((i + j) % 2) ? 1.0 : -1.0;
      neg(i, j) = -board(i, j);
    }
  CHECK(ssim(neg, board) < 0.0);
  ComplexImage k1({16, 16}), k2({16, 16});
  for (auto& v : k1.data()) v = 0.4;
  for (auto& v : k2.data()) v = 0.4;
  CHECK(ssim(k1, k2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(ssim(ComplexImage({4, 4}), ComplexImage({4, 4})));
  CHECK_THROWS(ssim(ComplexImage({8, 8}), ComplexImage({8, 9})));
}

TEST_CASE("ssim agrees with a summed-area-table reference") {
  for (std::uint64_t seed : {3u, 4u}) {
    const Shape s{20, 27};
    auto x0 = make_phantom(s, PhantomKind::blocks, seed);
    auto noisy = test::random_image(s, seed, false);
    auto xhat = lincomb(1.0, x0, 0.1, noisy);
    std::vector<double> a(s.size()), b(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      a[i] = xhat[i].real();
      b[i] = x0[i].real();
    }
    const auto [lo, hi] = std::minmax_element(b.begin(), b.end());
    CHECK(ssim(xhat, x0) == doctest::Approx(ssim_oracle(a, b, s.height, s.width, *hi - *lo)).epsilon(1e-10));

    // Complex input: compared on magnitudes.
    auto cplx = lincomb(1.0, x0, 0.1, test::random_image(s, seed + 9));
    for (std::size_t i = 0; i < s.size(); ++i) a[i] = std::abs(cplx[i]);
    CHECK(ssim(cplx, x0) == doctest::Approx(ssim_oracle(a, b, s.height, s.width, *hi - *lo)).epsilon(1e-10));
  }
}

TEST_CASE("lower median and trajectory score") {
  CHECK(lower_median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(lower_median({4.0, 1.0, 3.0, 2.0}) == 2.0);
  CHECK(lower_median({1.0, INFINITY, INFINITY}) == INFINITY);
  CHECK(lower_median({1.0, 2.0, INFINITY, INFINITY}) == 2.0);

  SolverResult r;
  for (int t = 1; t <= 5; ++t) {
    IterationRecord rec;
    rec.iteration = t;
    rec.nmse_db = to_db(0.1 * t);
    r.trace.records.push_back(rec);
  }
  CHECK(trajectory_score(r, 2, 4) == doctest::Approx((0.2 + 0.3 + 0.4) / 3).epsilon(1e-12));
  CHECK(trajectory_score(r, 1, 6) == INFINITY);
}

TEST_CASE("tune: single grid point") {
  TuningSpec spec;
  spec.t_meas = 3;
  spec.t_max = 6;
  spec.images = {cartesian_phantom({32, 32}, 1)};
  spec.grid = {{{"gamma", 2.0}}};
  SolverConfig cfg;
  cfg.algorithm = Algorithm::admm;
  const auto res = tune(spec, cfg);
  REQUIRE(res.table.size() == 1);
  CHECK(res.best == 0);
  cfg.admm_gamma = 2.0;
  cfg.max_iters = 6;
  const auto run = run_solver(spec.images[0], cfg);
  CHECK(res.table[0].score_db == doctest::Approx(to_db(trajectory_score(run, 3, 6))).epsilon(1e-12));
}

TEST_CASE("tune: AMP picks the stable beta over the divergent one") {
  TuningSpec spec;
  spec.t_meas = 5;
  spec.t_max = 40;
  spec.images = {cartesian_phantom({64, 64}, 2), cartesian_phantom({64, 64}, 3), cartesian_phantom({64, 64}, 4)};
  spec.grid = {{{"beta", 50.0}}, {{"beta", 1.0}}};
  SolverConfig cfg;
  cfg.algorithm = Algorithm::damp;
  const auto res = tune(spec, cfg);
  CHECK(res.best == 1);
  CHECK(res.table[0].score_db == INFINITY);
  CHECK(res.table[0].diverged == 3);
  CHECK(std::isfinite(res.table[1].score_db));

  // Pure function of its inputs.
  const auto again = tune(spec, cfg);
  CHECK(again.best == res.best);
  CHECK(again.table[1].score_db == res.table[1].score_db);

  spec.grid = {{{"beta", 50.0}}, {{"beta", 60.0}}};
  CHECK_THROWS_AS(tune(spec, cfg), AllDiverged);
}

TEST_CASE("tune: ties go to the first grid point") {
  TuningSpec spec;
  spec.t_meas = 1;
  spec.t_max = 3;
  spec.images = {cartesian_phantom({32, 32}, 5)};
  // ADMM ignores theta, so both points score identically.
  spec.grid = {{{"theta", 0.3}}, {{"theta", 0.9}}};
  SolverConfig cfg;
  cfg.algorithm = Algorithm::admm;
  const auto res = tune(spec, cfg);
  CHECK(res.table[0].score_db == res.table[1].score_db);
  CHECK(res.best == 0);
}

TEST_CASE("tune validation") {
  TuningSpec spec;
  spec.images = {cartesian_phantom({32, 32}, 6)};
  CHECK_THROWS(spec.validate());  // empty grid
  spec.grid = {{{"gamma", 1.0}}};
  spec.t_meas = 0;
  CHECK_THROWS(spec.validate());
  spec.t_meas = 10;
  spec.t_max = 5;
  CHECK_THROWS(spec.validate());
  SolverConfig cfg;
  CHECK_THROWS_AS(apply_param(cfg, "no_such_key", 1.0), ConfigError);
  apply_param(cfg, "t_switch", 7.0);
  CHECK(cfg.t_switch == 7);
}

TEST_CASE("batch_run aggregation") {
  SolverConfig cfg;
  cfg.algorithm = Algorithm::admm;
  cfg.max_iters = 8;
  const auto p = cartesian_phantom({32, 32}, 7);
  const auto single = run_solver(p, cfg);

  SUBCASE("one problem") {
    const auto b = batch_run({p}, cfg);
    REQUIRE(b.aggregate.size() == 8);
    for (std::size_t t = 0; t < 8; ++t) {
      CHECK(b.aggregate[t].median_nmse_db == *single.trace.records[t].nmse_db);
      CHECK(b.aggregate[t].n_alive == 1);
    }
  }
  SUBCASE("duplicated three times") {
    const auto b = batch_run({p, p, p}, cfg);
    for (std::size_t t = 0; t < 8; ++t) {
      CHECK(b.aggregate[t].median_nmse_db == *single.trace.records[t].nmse_db);
      CHECK(b.aggregate[t].n_alive == 3);
    }
  }
  SUBCASE("mixed success, divergence and failure") {
    // Auto beta is 1 on a full mask and N/M = 4 on the Cartesian masks.
    SolverConfig amp;
    amp.algorithm = Algorithm::damp;
    amp.max_iters = 40;
    const Shape s{64, 64};
    auto full = std::make_shared<MaskedFourierOperator>(make_full_mask(s));
    const auto ok = simulate_problem(make_phantom(s, PhantomKind::shepp_logan, 0), full, 40.0, 1);
    auto broken = ok;
    broken.y.resize(10);
    const auto b = batch_run({ok, cartesian_phantom(s, 8), broken, cartesian_phantom(s, 9)}, amp);
    CHECK(b.divergence_count == 2);
    CHECK(b.failure_count == 1);
    CHECK_FALSE(b.runs[2].error.empty());
    CHECK(b.runs[0].error.empty());
    REQUIRE(b.aggregate.size() == 40);
    CHECK(b.aggregate.back().n_alive == 1);
    CHECK(b.aggregate.back().median_nmse_db == *b.runs[0].result.trace.records.back().nmse_db);
    CHECK(b.aggregate.front().n_alive == 3);
  }
}

TEST_CASE("metric report uses lower medians") {
  const Shape s{16, 16};
  std::vector<ComplexImage> truth, est;
  for (std::uint64_t i = 0; i < 4; ++i) {
    truth.push_back(make_phantom(s, PhantomKind::blocks, i));
    est.push_back(lincomb(1.0, truth.back(), 0.05 * (i + 1), test::random_image(s, i, false)));
  }
  const auto rep = metric_report(est, truth);
  REQUIRE(rep.per_image.size() == 4);
  std::vector<double> n;
  for (const auto& m : rep.per_image) n.push_back(m.nmse_db);
  std::sort(n.begin(), n.end());
  CHECK(rep.nmse_db == n[1]);
  CHECK_THROWS(metric_report({}, {}));
}

TEST_CASE("csv writers") {
  const auto dir = std::filesystem::temp_directory_path();
  TuningResult tr;
  tr.table = {{{{"gamma", 0.5}, {"theta", 1.0}}, -3.5, {}, 0},
              {{{"gamma", 2.0}, {"theta", 1.0}}, -7.25, {}, 0},
              {{{"gamma", 8.0}, {"theta", 1.0}}, INFINITY, {}, 2}};
  tr.best = 1;
  write_tuning_csv(dir / "pnp_tune.csv", tr);
  const auto t = lines_of(dir / "pnp_tune.csv");
  REQUIRE(t.size() == 4);
  CHECK(t[0] == "gamma,theta,score_db,best");
  CHECK(t[1] == "0.5,1,-3.5,0");
  CHECK(t[2] == "2,1,-7.25,1");
  CHECK(t[3] == "8,1,inf,0");

  write_aggregate_csv(dir / "pnp_agg.csv", {{1, -2.5, 3}, {2, -4.0, 2}});
  const auto a = lines_of(dir / "pnp_agg.csv");
  REQUIRE(a.size() == 3);
  CHECK(a[0] == "iteration,median_nmse_db,n_alive");
  CHECK(a[1] == "1,-2.5,3");
  CHECK(a[2] == "2,-4,2");
}

TEST_CASE("config parsing") {
  std::istringstream is("# header\nalgorithm = dd_vamp\n\n  gamma=2.5 # trailing\ntheta = 0.5\ngamma = 3\n");
  const auto kv = parse_config(is);
  REQUIRE(kv.size() == 4);
  CHECK(kv[1] == std::pair<std::string, std::string>{"gamma", "2.5"});
  SolverConfig cfg;
  for (const auto& [k, v] : kv) CHECK(apply_solver_option(cfg, k, v));
  CHECK(cfg.algorithm == Algorithm::dd_vamp);
  CHECK(cfg.admm_gamma == 3.0);
  CHECK(cfg.vamp_theta == 0.5);
  CHECK_FALSE(apply_solver_option(cfg, "output", "x"));

  std::istringstream bad("just words\n");
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  CHECK_THROWS_AS(apply_solver_option(cfg, "gamma", "abc"), ConfigError);
  CHECK_THROWS_AS(apply_solver_option(cfg, "iters", "1.5"), ConfigError);
  CHECK_THROWS_AS(apply_solver_option(cfg, "algorithm", "vamp"), ConfigError);
  CHECK_THROWS_AS(apply_solver_option(cfg, "zeta_rule", "sometimes"), ConfigError);
  CHECK_THROWS_AS(apply_solver_option(cfg, "map_prox", "maybe"), ConfigError);
  CHECK(apply_solver_option(cfg, "beta", "auto"));
  CHECK_FALSE(cfg.amp_beta.has_value());
}

TEST_CASE("describe round-trips through the config format") {
  SolverConfig cfg;
  cfg.algorithm = Algorithm::dd_vamp_pp;
  cfg.admm_gamma = 0.1 + 0.2;  // needs 17 digits
  cfg.amp_beta = 1.0 / 3.0;
  cfg.t_switch = 11;
  cfg.denoiser.lambda = 1e-7;
  const auto path = std::filesystem::temp_directory_path() / "pnp_describe.cfg";
  write_config(path, describe(cfg));
  SolverConfig back;
  for (const auto& [k, v] : read_config(path)) REQUIRE(apply_solver_option(back, k, v));
  CHECK(describe(back) == describe(cfg));
  CHECK(back.admm_gamma == cfg.admm_gamma);
  CHECK(*back.amp_beta == *cfg.amp_beta);
  CHECK(format_double(INFINITY) == "inf");
  CHECK(format_double(0.5) == "0.5");
}
