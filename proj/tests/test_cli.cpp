#include <catch2/catch_amalgamated.hpp>
#include <sstream>

#include "sspcache/sweep.hpp"

using namespace sspcache;

namespace {

ScenarioConfig small_cfg() {
  auto cfg = default_scenario();
  cfg.n_services = 4;
  cfg.cache_size = 2;
  cfg.populate_default_services();
  return cfg;
}

}  // namespace

TEST_CASE("scenario_at applies the sweep variable") {
  auto base = small_cfg();
  SECTION("R scales all three target delays jointly") {
    auto cfg = scenario_at(base, SweepSpec::Variable::target_delay_scale, 2.0);
    for (int n = 0; n < 4; ++n) {
      REQUIRE_THAT(cfg.service(n).gamma_u_s,
                   Catch::Matchers::WithinRel(2.0 * base.service(n).gamma_u_s, 1e-12));
      REQUIRE_THAT(cfg.service(n).gamma_q_s,
                   Catch::Matchers::WithinRel(2.0 * base.service(n).gamma_q_s, 1e-12));
      REQUIRE_THAT(cfg.service(n).gamma_d_s,
                   Catch::Matchers::WithinRel(2.0 * base.service(n).gamma_d_s, 1e-12));
    }
  }
  SECTION("F_bs and K") {
    REQUIRE(scenario_at(base, SweepSpec::Variable::f_bs, 9e6).f_bs == 9e6);
    REQUIRE(scenario_at(base, SweepSpec::Variable::cache_size, 3.0).cache_size == 3);
    REQUIRE_THROWS_AS(scenario_at(base, SweepSpec::Variable::cache_size, 9.0),
                      invalid_config_error);
  }
}

TEST_CASE("sweep specification") {
  SECTION("empty pieces are config errors") {
    SweepSpec spec;
    spec.grid = {};
    spec.schemes = {Scheme::ucps};
    REQUIRE_THROWS_AS(spec.check(), invalid_config_error);
    spec.grid = {1.0};
    spec.schemes = {};
    REQUIRE_THROWS_AS(spec.check(), invalid_config_error);
  }
  SECTION("parsed from a config file") {
    std::istringstream in(
        "n_services = 4\ncache_size = 2\n"
        "sweep_var = K\nsweep_grid = 1, 2, 3\nschemes = ucps, gcps\ncases = dt\n"
        "trials = 500\nseed = 9\n");
    auto kv = KeyValueFile::parse(in);
    auto cfg = scenario_from_kv(kv);
    auto spec = sweep_from_kv(kv);
    REQUIRE(kv.unused_keys().empty());
    REQUIRE(spec.variable == SweepSpec::Variable::cache_size);
    REQUIRE(spec.grid == std::vector<double>{1.0, 2.0, 3.0});
    REQUIRE(spec.schemes == std::vector<Scheme>{Scheme::ucps, Scheme::gcps});
    REQUIRE(spec.cases == std::vector<ServiceTimeCase>{ServiceTimeCase::deterministic});
    REQUIRE(spec.trials == 500);
    REQUIRE(spec.seed == 9);
    (void)cfg;
  }
  SECTION("unknown scheme rejected") {
    REQUIRE_THROWS_AS(parse_scheme("bogus"), invalid_config_error);
  }
}

TEST_CASE("run_experiment") {
  auto base = small_cfg();
  SECTION("row count and determinism") {
    SweepSpec spec;
    spec.variable = SweepSpec::Variable::f_bs;
    spec.grid = {7.5e6, 1.2e7};
    spec.schemes = {Scheme::ucps, Scheme::gcps, Scheme::alg3};
    spec.cases = {ServiceTimeCase::random, ServiceTimeCase::deterministic};
    spec.trials = 2000;
    spec.seed = 4;
    auto rows = run_experiment(spec, base);
    REQUIRE(rows.size() == 2 * 3 * 2);
    std::ostringstream c1, c2;
    emit_csv(rows, c1);
    emit_csv(run_experiment(spec, base), c2);
    REQUIRE(c1.str() == c2.str()); // byte-identical replay
    for (const auto& r : rows) {
      REQUIRE(r.ssp_analytic >= 0.0);
      REQUIRE(r.ssp_analytic <= 1.0);
      REQUIRE(r.ssp_sim >= 0.0);
      REQUIRE(r.ssp_sim <= 1.0);
    }
  }
  SECTION("per-cell failures become error rows and the run continues") {
    SweepSpec spec;
    spec.variable = SweepSpec::Variable::f_bs;
    spec.grid = {1e5, 1.2e7}; // first point cannot stabilise any queue
    spec.schemes = {Scheme::pcos};
    spec.cases = {ServiceTimeCase::random};
    auto rows = run_experiment(spec, base);
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].status.rfind("error", 0) == 0);
    REQUIRE(rows[1].status == "ok");
    REQUIRE(std::isnan(rows[0].ssp_analytic));
  }
  SECTION("analytic-only sweep leaves simulation columns empty") {
    SweepSpec spec;
    spec.variable = SweepSpec::Variable::cache_size;
    spec.grid = {1, 2};
    spec.schemes = {Scheme::tcps};
    spec.cases = {ServiceTimeCase::random};
    spec.trials = 0;
    auto rows = run_experiment(spec, base);
    std::ostringstream out;
    emit_csv(rows, out);
    const auto text = out.str();
    REQUIRE(text.find(",tcps,rt,0.") != std::string::npos);
    // empty sim fields: two consecutive commas after the analytic column
    REQUIRE(text.find(",,,,") != std::string::npos);
  }
}

TEST_CASE("emit_csv shape") {
  SweepRow row;
  row.sweep_var = "K";
  row.value = 3;
  row.scheme = Scheme::alg1;
  row.stc = ServiceTimeCase::deterministic;
  row.ssp_analytic = 0.5;
  row.iterations = 7;
  row.grad_norm = 1e-5;
  row.seed = 42;
  std::ostringstream out;
  emit_csv({row}, out);
  const auto text = out.str();
  REQUIRE(text.find("sweep_var,value,scheme,case,ssp_analytic,ssp_sim,ci_low,ci_high,"
                    "iterations,grad_norm,seed,status\n") == 0);
  REQUIRE(text.find("K,3,alg1,dt,0.5,,,,7,1e-05,42,ok\n") != std::string::npos);
}

TEST_CASE("validate_command rejects zero trials") {
  auto cfg = small_cfg();
  REQUIRE_THROWS_AS(validate_command(cfg, 0, 1), invalid_config_error);
}
