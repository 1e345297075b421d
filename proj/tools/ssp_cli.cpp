// Command-line runner: solves, sweeps and validates edge-caching scenarios.
#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "sspcache/sweep.hpp"

using namespace sspcache;

namespace {

ServiceTimeCase parse_case(const std::string& name) {
  if (name == "rt") return ServiceTimeCase::random;
  if (name == "dt") return ServiceTimeCase::deterministic;
  throw invalid_config_error("--case must be rt or dt");
}

ScenarioConfig load_or_default(const std::string& path, KeyValueFile* kv_out = nullptr) {
  if (path.empty()) return default_scenario();
  auto kv = KeyValueFile::load(path);
  auto cfg = scenario_from_kv(kv);
  if (kv_out) *kv_out = kv;
  return cfg;
}

void print_solution(const ScenarioConfig& cfg, const DerivedConstants& d,
                    const std::vector<SupportEntry>& support, ServiceTimeCase stc,
                    StabilityPolicy policy) {
  auto rep = evaluate_ssp(cfg, d, support, stc, policy);
  std::printf("case=%s ssp=%.8f%s\n", case_name(stc), rep.total_ssp,
              rep.unstable_pairs > 0 ? " (lenient: unstable pairs contribute zero)" : "");
  const auto t = t_from_support(support, cfg.n_services);
  std::printf("T =");
  for (double v : t) std::printf(" %.4f", v);
  std::printf("\n");
  std::printf("support (%zu combinations):\n", support.size());
  std::size_t shown = 0;
  for (const auto& e : support) {
    if (e.weight < 1e-6) continue;
    if (++shown > 12) {
      std::printf("  ...\n");
      break;
    }
    std::printf("  a=%.5f %s b=(", e.weight, combo_to_string(e.combo).c_str());
    for (std::size_t i = 0; i < e.shares.size(); ++i)
      std::printf("%s%.4f", i ? "," : "", e.shares[i]);
    std::printf(")\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"successful-service-probability solver for edge service caching"};
  app.require_subcommand(1);

  std::string config_path, case_name_str = "rt", out_path, scheme_name_str;
  long long trials = 0;
  std::uint64_t seed = 1;

  auto add_common = [&](CLI::App* cmd, bool with_case) {
    cmd->add_option("--config", config_path, "scenario config file (key = value)");
    if (with_case) cmd->add_option("--case", case_name_str, "service time case: rt or dt");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--out", out_path, "output CSV path");
  };

  auto* solve = app.add_subcommand("solve", "stationary point of the joint SSP maximization");
  add_common(solve, true);
  auto* near = app.add_subcommand("near", "near-optimal solution via the asymptotic design");
  add_common(near, true);
  auto* baseline = app.add_subcommand("baseline", "evaluate a baseline scheme");
  baseline->add_option("name", scheme_name_str, "ucps | gcps | tcps | pcos")->required();
  add_common(baseline, true);
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep defined in the config");
  add_common(sweep, false);
  auto* validate = app.add_subcommand("validate", "Monte Carlo versus closed-form checks");
  add_common(validate, false);
  validate->add_option("--trials", trials, "simulation trials per estimator");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed() || near->parsed()) {
      auto cfg = load_or_default(config_path);
      auto d = derive_constants(cfg);
      const auto stc = parse_case(case_name_str);
      if (solve->parsed()) {
        auto idx = enumerate_combinations(cfg.n_services, cfg.cache_size);
        auto res = run_algorithm1(cfg, d, idx, stc);
        std::printf("iterations=%d converged=%d grad_norm_sq=%.3e\n", res.iterations,
                    res.converged ? 1 : 0, res.grad_sq);
        print_solution(cfg, d,
                       make_support(idx, CachingDistribution{res.a}, ComputingAllocation{res.b}),
                       stc, StabilityPolicy::strict_error);
        if (!out_path.empty()) write_trace_csv(out_path, res.trace);
      } else {
        auto res = run_algorithm3(cfg, d, stc);
        std::printf("cccp_iterations=%d sca_iterations=%d p_infinity=%.8f duality_residual=%.2e\n",
                    res.cccp_iterations, res.sca_iterations, res.p_infinity,
                    res.duality_residual);
        print_solution(cfg, d, res.solution, stc, StabilityPolicy::strict_error);
        if (!out_path.empty()) write_trace_csv(out_path, res.trace);
      }
    } else if (baseline->parsed()) {
      auto cfg = load_or_default(config_path);
      auto d = derive_constants(cfg);
      const auto stc = parse_case(case_name_str);
      const auto scheme = parse_scheme(scheme_name_str);
      if (scheme == Scheme::alg1 || scheme == Scheme::alg3)
        throw invalid_config_error("use the solve/near subcommands for the proposed schemes");
      auto sol = compute_scheme(cfg, d, scheme, stc);
      print_solution(cfg, d, sol.support, stc,
                     sol.lenient ? StabilityPolicy::lenient_zero : StabilityPolicy::strict_error);
    } else if (sweep->parsed()) {
      if (config_path.empty()) throw invalid_config_error("sweep requires --config");
      KeyValueFile kv = KeyValueFile::load(config_path);
      auto cfg = scenario_from_kv(kv);
      auto spec = sweep_from_kv(kv);
      for (const auto& k : kv.unused_keys())
        throw invalid_config_error("unknown config key: " + k);
      if (seed != 1) spec.seed = seed;
      auto rows = run_experiment(spec, cfg);
      if (out_path.empty())
        emit_csv(rows, std::cout);
      else
        emit_csv(rows, out_path);
      long long failures = 0;
      for (const auto& r : rows)
        if (r.status.rfind("error", 0) == 0) ++failures;
      std::fprintf(stderr, "sweep: %zu cells, %lld errored\n", rows.size(), failures);
    } else if (validate->parsed()) {
      auto cfg = load_or_default(config_path);
      std::ofstream csv;
      if (!out_path.empty()) {
        csv.open(out_path);
        if (!csv) throw error("cannot open output file: " + out_path);
        csv << "estimator,service,trials,mean,ci_low,ci_high,uplink_mode,correlation_mode,"
               "queue_mode,seed\n";
      }
      auto sum = validate_command(cfg, trials > 0 ? trials : 1000000, seed,
                                  out_path.empty() ? nullptr : &csv);
      for (const auto& line : sum.lines) {
        if (line.informational)
          std::printf("REPORT %-42s analytic=%.6f simulated=%.6f gap=%+.6f\n", line.name.c_str(),
                      line.analytic, line.simulated, line.simulated - line.analytic);
        else
          std::printf("%s   %-42s analytic=%.6f simulated=%.6f tol=%.2e\n",
                      line.pass ? "PASS" : "FAIL", line.name.c_str(), line.analytic,
                      line.simulated, line.tolerance);
      }
      return sum.all_passed ? 0 : 1;
    }
  } catch (const error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
