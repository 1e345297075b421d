#include <catch2/catch_amalgamated.hpp>
#include <algorithm>
#include <cmath>

#include "sspcache/baselines.hpp"
#include "sspcache/simulator.hpp"

using namespace sspcache;

namespace {

std::vector<SupportEntry> uniform_support(int n, int k) {
  auto idx = enumerate_combinations(n, k);
  std::vector<SupportEntry> s;
  for (int j = 0; j < idx.size(); ++j)
    s.push_back({idx.members(j), 1.0 / idx.size(),
                 std::vector<double>(static_cast<std::size_t>(k), 1.0 / k)});
  return s;
}

}  // namespace

TEST_CASE("sample_scene statistics") {
  auto cfg = default_scenario();
  cfg.n_services = 3;
  cfg.cache_size = 2;
  cfg.populate_default_services();
  auto support = uniform_support(3, 2);

  SECTION("zero user density gives an empty user set") {
    auto c2 = cfg;
    c2.density_u = 0.0;
    auto scene = sample_scene(c2, support, 300.0, 1);
    REQUIRE(scene.users.empty());
  }
  SECTION("BS counts follow the Poisson mean over seeds") {
    const double radius = 300.0;
    const double mean = cfg.density_bs * M_PI * radius * radius;
    long long total = 0;
    const int seeds = 1000;
    for (int s = 0; s < seeds; ++s)
      total += static_cast<long long>(sample_scene(cfg, support, radius, 100 + s).bs.size());
    const double avg = static_cast<double>(total) / seeds;
    const double sigma = std::sqrt(mean / seeds);
    REQUIRE(std::abs(avg - mean) <= 3.0 * sigma);
  }
  SECTION("combination frequencies match the caching distribution") {
    std::vector<SupportEntry> skew{{{0, 1}, 0.6, {}}, {{0, 2}, 0.3, {}}, {{1, 2}, 0.1, {}}};
    long long counts[3] = {0, 0, 0};
    long long total = 0;
    for (int s = 0; s < 400; ++s) {
      auto scene = sample_scene(cfg, skew, 300.0, 900 + s);
      for (int e : scene.bs_entry) ++counts[e];
      total += static_cast<long long>(scene.bs_entry.size());
    }
    for (int k = 0; k < 3; ++k) {
      const double p = skew[static_cast<std::size_t>(k)].weight;
      const double sigma = std::sqrt(p * (1.0 - p) * static_cast<double>(total));
      REQUIRE(std::abs(static_cast<double>(counts[k]) - p * total) <= 3.0 * sigma);
    }
  }
}

TEST_CASE("associate") {
  auto cfg = default_scenario();
  cfg.n_services = 3;
  cfg.cache_size = 2;
  cfg.populate_default_services();

  SECTION("single caching BS wins; censored when nothing caches the service") {
    SpatialScene scene;
    std::vector<SupportEntry> support{{{0, 1}, 1.0, {}}, {{1, 2}, 0.0, {}}};
    scene.support = &support;
    scene.bs = {{10.0, 0.0}, {5.0, 0.0}};
    scene.bs_entry = {1, 0}; // nearer BS caches {1,2} -> wrong for service 2
    scene.window_radius_m = 100.0;
    auto a2 = associate(scene, 2);
    REQUIRE_FALSE(a2.censored);
    REQUIRE(a2.bs_index == 0);
    auto a0 = associate(scene, 0);
    REQUIRE(a0.bs_index == 1);
    auto missing = associate(scene, 42 % 3 == 0 ? 2 : 2); // service cached somewhere
    (void)missing;
    std::vector<SupportEntry> none{{{0, 1}, 1.0, {}}};
    scene.support = &none;
    scene.bs_entry = {0, 0};
    REQUIRE(associate(scene, 2).censored);
  }
  SECTION("association distance follows the Rayleigh law (K-S)") {
    auto support = uniform_support(3, 2); // T_n = 2/3
    const double t = 2.0 / 3.0;
    const double radius = 400.0;
    const int samples = 30000;
    std::vector<double> dist;
    dist.reserve(samples);
    for (int s = 0; s < samples; ++s) {
      auto scene = sample_scene(cfg, support, radius, 5000 + s);
      auto a = associate(scene, 1);
      if (!a.censored) dist.push_back(a.distance);
    }
    std::sort(dist.begin(), dist.end());
    double ks = 0.0;
    const double n = static_cast<double>(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) {
      const double cdf = 1.0 - std::exp(-M_PI * t * cfg.density_bs * dist[i] * dist[i]);
      ks = std::max(ks, std::abs(cdf - (static_cast<double>(i) + 0.5) / n));
    }
    // critical value at alpha = 0.01
    REQUIRE(ks < 1.628 / std::sqrt(n));
  }
}

TEST_CASE("link legs against the closed forms") {
  auto cfg = default_scenario();
  cfg.n_services = 3;
  cfg.cache_size = 2;
  cfg.populate_default_services();
  auto d = derive_constants(cfg);
  auto support = uniform_support(3, 2);
  const double t = 2.0 / 3.0;

  SECTION("no interference means sure success") {
    auto c2 = cfg;
    c2.p_s = 0.0; // thins every interferer away
    auto d2 = derive_constants(c2);
    auto scene = sample_scene(c2, support, 400.0, 77);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
      auto up = uplink_success(scene, 0, c2, d2, UplinkMode::thinned_ppp, rng);
      REQUIRE(up.has_value());
      REQUIRE(*up);
      auto down = downlink_success(scene, 0, c2, d2, rng);
      REQUIRE(*down);
    }
  }
  SECTION("scene-based uplink and downlink match the analysis at moderate scale") {
    Rng rng(9);
    long long up_hits = 0, down_hits = 0, trials = 20000;
    for (long long i = 0; i < trials; ++i) {
      auto scene = sample_scene(cfg, support, 900.0, 40000 + i);
      auto up = uplink_success(scene, 1, cfg, d, UplinkMode::thinned_ppp, rng);
      auto down = downlink_success(scene, 1, cfg, d, rng);
      up_hits += up.value_or(false) ? 1 : 0;
      down_hits += down.value_or(false) ? 1 : 0;
    }
    const double pu = static_cast<double>(up_hits) / trials;
    const double pd = static_cast<double>(down_hits) / trials;
    const double su = 3.0 * std::sqrt(0.25 / trials);
    REQUIRE(std::abs(pu - sutp(d, 1, t)) <= su + 2e-3);
    REQUIRE(std::abs(pd - sdtp(d, 1, t)) <= su + 2e-3);
  }
  SECTION("dependent uplink mode runs and stays in a sane band") {
    Rng rng(10);
    long long hits = 0, trials = 600;
    for (long long i = 0; i < trials; ++i) {
      auto scene = sample_scene(cfg, support, 500.0, 90000 + i);
      hits += uplink_success(scene, 1, cfg, d, UplinkMode::dependent, rng).value_or(false) ? 1 : 0;
    }
    const double p = static_cast<double>(hits) / trials;
    REQUIRE(std::abs(p - sutp(d, 1, t)) < 0.15);
  }
}

TEST_CASE("queue sampling") {
  SECTION("formula and discrete-event M/M/1 agree with the sojourn law") {
    const double lambda = 2.0, rate = 5.0, gamma = 0.8;
    const double want = scpp_rt_core(lambda, rate, gamma);
    for (auto mode : {QueueMode::sojourn_formula_sampling, QueueMode::discrete_event}) {
      QueueSampler s(lambda, rate, false, mode, 99);
      long long hits = 0, trials = 200000;
      for (long long i = 0; i < trials; ++i) hits += s.next() <= gamma ? 1 : 0;
      const double p = static_cast<double>(hits) / trials;
      REQUIRE(std::abs(p - want) <= 3.0 * std::sqrt(want * (1 - want) / trials) + 1e-3);
    }
  }
  SECTION("M/D/1 with vanishing load returns the bare service time") {
    QueueSampler s(1e-9, 4.0, true, QueueMode::discrete_event, 3);
    for (int i = 0; i < 50; ++i) REQUIRE_THAT(s.next(), Catch::Matchers::WithinAbs(0.25, 1e-9));
  }
  SECTION("one-shot sample is reproducible") {
    const double a = queue_delay_sample(2.0, 5.0, ServiceTimeCase::deterministic,
                                        QueueMode::discrete_event, 1234);
    const double b = queue_delay_sample(2.0, 5.0, ServiceTimeCase::deterministic,
                                        QueueMode::discrete_event, 1234);
    REQUIRE(a == b);
  }
  SECTION("unstable queue raises") {
    REQUIRE_THROWS_AS(QueueSampler(5.0, 4.0, true, QueueMode::discrete_event, 1),
                      queue_unstable_error);
  }
}

TEST_CASE("estimate_ssp_sim") {
  auto cfg = default_scenario();
  cfg.n_services = 4;
  cfg.cache_size = 2;
  cfg.populate_default_services();
  auto d = derive_constants(cfg);
  auto idx = enumerate_combinations(4, 2);
  // a feasible stable design
  CachingDistribution a{{0.25, 0.2, 0.15, 0.15, 0.15, 0.1}};
  ComputingAllocation b;
  b.b.assign(6, {0.45, 0.55});
  auto t = t_from_a(a, idx);
  bool stable = true;
  for (int j = 0; j < 6 && stable; ++j)
    for (std::size_t i = 0; i < 2; ++i) {
      const int n = idx.members(j)[i];
      stable &= b.b[static_cast<std::size_t>(j)][i] * d.mu[static_cast<std::size_t>(n)] >
                arrival_rate(d, n, t.t[static_cast<std::size_t>(n)]);
    }
  REQUIRE(stable);
  auto support = make_support(idx, a, b);

  SECTION("bit-identical replay for a fixed seed") {
    SimConfig sim;
    sim.trials = 20000;
    auto e1 = estimate_ssp_sim(cfg, d, support, ServiceTimeCase::random, sim, 31);
    auto e2 = estimate_ssp_sim(cfg, d, support, ServiceTimeCase::random, sim, 31);
    REQUIRE(e1.mean == e2.mean);
    REQUIRE(e1.ci_low == e2.ci_low);
    auto e3 = estimate_ssp_sim(cfg, d, support, ServiceTimeCase::random, sim, 32);
    REQUIRE(e1.mean != e3.mean);
  }
  SECTION("agrees with the closed form within the confidence interval") {
    SimConfig sim;
    sim.trials = 150000;
    for (auto stc : {ServiceTimeCase::random, ServiceTimeCase::deterministic}) {
      const double ana = evaluate_ssp(cfg, d, support, stc).total_ssp;
      auto e = estimate_ssp_sim(cfg, d, support, stc, sim, 77);
      INFO(case_name(stc) << ": analytic " << ana << " in [" << e.ci_low << "," << e.ci_high
                          << "]?");
      REQUIRE(ana >= e.ci_low - 2e-3);
      REQUIRE(ana <= e.ci_high + 2e-3);
    }
  }
  SECTION("p_s = 0 reduces to the queue-only success probability") {
    auto c2 = cfg;
    c2.p_s = 0.0;
    auto d2 = derive_constants(c2);
    SimConfig sim;
    sim.trials = 60000;
    const double ana = evaluate_ssp(c2, d2, support, ServiceTimeCase::random).total_ssp;
    auto e = estimate_ssp_sim(c2, d2, support, ServiceTimeCase::random, sim, 5);
    REQUIRE(std::abs(e.mean - ana) <= 3.0 * std::sqrt(0.25 / sim.trials) + 1e-3);
  }
  SECTION("standard error scales like one over root trials") {
    SimConfig small;
    small.trials = 10000;
    SimConfig big;
    big.trials = 1000000;
    auto es = estimate_ssp_sim(cfg, d, support, ServiceTimeCase::random, small, 21);
    auto eb = estimate_ssp_sim(cfg, d, support, ServiceTimeCase::random, big, 21);
    const double ratio = (es.ci_high - es.ci_low) / (eb.ci_high - eb.ci_low);
    REQUIRE(ratio > 6.0); // expect ~10
    REQUIRE(ratio < 16.0);
  }
  SECTION("unstable design: strict raises, lenient zeroes") {
    auto c2 = cfg;
    c2.f_bs = 1.2e6; // tighten capacity until some pair breaks
    auto d2 = derive_constants(c2);
    bool any_unstable = false;
    for (int j = 0; j < 6 && !any_unstable; ++j)
      for (std::size_t i = 0; i < 2; ++i) {
        const int n = idx.members(j)[i];
        any_unstable |= b.b[static_cast<std::size_t>(j)][i] * d2.mu[static_cast<std::size_t>(n)] <
                        arrival_rate(d2, n, t.t[static_cast<std::size_t>(n)]);
      }
    REQUIRE(any_unstable);
    SimConfig sim;
    sim.trials = 2000;
    REQUIRE_THROWS_AS(
        estimate_ssp_sim(c2, d2, support, ServiceTimeCase::random, sim, 3),
        queue_unstable_error);
    auto e = estimate_ssp_sim(c2, d2, support, ServiceTimeCase::random, sim, 3,
                              StabilityPolicy::lenient_zero);
    REQUIRE(e.mean >= 0.0);
  }
}

TEST_CASE("estimator CSV row") {
  SimConfig sim;
  Estimate e = wilson_interval(800, 1000);
  std::ostringstream out;
  emit_estimator_csv(out, "sutp", 2, e, sim, 42);
  const auto row = out.str();
  REQUIRE(row.find("sutp,3,1000,0.8,") == 0);
  REQUIRE(row.find("thinned_ppp") != std::string::npos);
  REQUIRE(row.find(",42\n") != std::string::npos);
}

TEST_CASE("wilson interval basics") {
  auto e = wilson_interval(0, 100);
  REQUIRE(e.mean == 0.0);
  REQUIRE_THAT(e.ci_low, Catch::Matchers::WithinAbs(0.0, 1e-15));
  REQUIRE(e.ci_high > 0.0);
  auto f = wilson_interval(100, 100);
  REQUIRE_THAT(f.ci_high, Catch::Matchers::WithinAbs(1.0, 1e-15));
  REQUIRE(f.ci_low < 1.0);
  auto g = wilson_interval(500, 1000);
  REQUIRE_THAT(g.mean, Catch::Matchers::WithinAbs(0.5, 1e-12));
  REQUIRE(g.ci_high - g.ci_low < 0.07);
}
