#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>
#include <sstream>

#include "sspcache/analysis.hpp"
#include "sspcache/combinations.hpp"
#include "sspcache/config.hpp"
#include "sspcache/scenario.hpp"

using namespace sspcache;

TEST_CASE("enumerate_combinations tiny cases") {
  auto idx = enumerate_combinations(3, 2);
  REQUIRE(idx.size() == 3);
  REQUIRE(idx.members(0) == std::vector<int>{0, 1});
  REQUIRE(idx.members(1) == std::vector<int>{0, 2});
  REQUIRE(idx.members(2) == std::vector<int>{1, 2});
  REQUIRE(idx.containing(0) == std::vector<int>{0, 1});

  REQUIRE(enumerate_combinations(10, 3).size() == 120);

  auto full = enumerate_combinations(5, 5);
  REQUIRE(full.size() == 1);
  REQUIRE(full.members(0) == std::vector<int>{0, 1, 2, 3, 4});

  REQUIRE_THROWS_AS(enumerate_combinations(3, 4), invalid_config_error);
}

TEST_CASE("enumerate_combinations sizes and membership are exhaustive") {
  for (int n = 1; n <= 12; ++n)
    for (int k = 1; k <= n; ++k) {
      auto idx = enumerate_combinations(n, k);
      REQUIRE(idx.size() == static_cast<int>(std::lround(binomial(n, k))));
      for (int s = 0; s < n; ++s)
        REQUIRE(static_cast<int>(idx.containing(s).size()) ==
                static_cast<int>(std::lround(binomial(n - 1, k - 1))));
      // j in J_n  <=>  n in N_j, and lexicographic rank round-trips.
      for (int j = 0; j < idx.size(); ++j) {
        REQUIRE(idx.rank(idx.members(j)) == j);
        for (int s : idx.members(j)) {
          const auto& js = idx.containing(s);
          REQUIRE(std::binary_search(js.begin(), js.end(), j));
        }
      }
    }
}

TEST_CASE("t_from_a") {
  auto idx = enumerate_combinations(3, 2);
  SECTION("degenerate mass") {
    CachingDistribution a{{1.0, 0.0, 0.0}};
    auto t = t_from_a(a, idx);
    REQUIRE(t.t == std::vector<double>{1.0, 1.0, 0.0});
  }
  SECTION("uniform") {
    CachingDistribution a{{1.0 / 3, 1.0 / 3, 1.0 / 3}};
    auto t = t_from_a(a, idx);
    for (double v : t.t) REQUIRE_THAT(v, Catch::Matchers::WithinAbs(2.0 / 3, 1e-15));
  }
  SECTION("hand summation") {
    CachingDistribution a{{0.5, 0.3, 0.2}};
    auto t = t_from_a(a, idx);
    REQUIRE_THAT(t.t[0], Catch::Matchers::WithinAbs(0.8, 1e-15));
    REQUIRE_THAT(t.t[1], Catch::Matchers::WithinAbs(0.7, 1e-15));
    REQUIRE_THAT(t.t[2], Catch::Matchers::WithinAbs(0.5, 1e-15));
  }
}

TEST_CASE("t_from_a sums to K for random caching distributions") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const int k = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
    auto idx = enumerate_combinations(n, k);
    std::exponential_distribution<double> ex(1.0);
    CachingDistribution a;
    a.a.resize(static_cast<std::size_t>(idx.size()));
    double s = 0.0;
    for (auto& v : a.a) s += (v = ex(rng));
    for (auto& v : a.a) v /= s;
    auto t = t_from_a(a, idx);
    double tot = 0.0;
    for (double v : t.t) tot += v;
    REQUIRE_THAT(tot, Catch::Matchers::WithinAbs(k, 1e-12));
    REQUIRE_NOTHROW(t.check(k));
  }
}

TEST_CASE("a_from_t block filling") {
  auto idx = enumerate_combinations(3, 2);
  SECTION("forced support") {
    ServiceProbabilities t{{1.0, 1.0, 0.0}};
    auto a = a_from_t(t, idx);
    REQUIRE_THAT(a.a[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  SECTION("hand block filling") {
    ServiceProbabilities t{{1.0, 0.6, 0.4}};
    auto a = a_from_t(t, idx);
    REQUIRE_THAT(a.a[0], Catch::Matchers::WithinAbs(0.6, 1e-12));
    REQUIRE_THAT(a.a[1], Catch::Matchers::WithinAbs(0.4, 1e-12));
    REQUIRE_THAT(a.a[2], Catch::Matchers::WithinAbs(0.0, 1e-12));
  }
  SECTION("infeasible T rejected") {
    ServiceProbabilities t{{0.9, 0.9, 0.9}}; // sums to 2.7, K = 2
    REQUIRE_THROWS_AS(a_from_t(t, idx), infeasibility_error);
  }
}

TEST_CASE("a_from_t round trip preserves T") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 60; ++rep) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const int k = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
    auto idx = enumerate_combinations(n, k);
    std::exponential_distribution<double> ex(1.0);
    CachingDistribution a0;
    a0.a.resize(static_cast<std::size_t>(idx.size()));
    double s = 0.0;
    for (auto& v : a0.a) s += (v = ex(rng));
    for (auto& v : a0.a) v /= s;
    auto t = t_from_a(a0, idx); // a random feasible T
    auto a = a_from_t(t, idx);
    auto t2 = t_from_a(a, idx);
    for (int i = 0; i < n; ++i)
      REQUIRE_THAT(t2.t[static_cast<std::size_t>(i)],
                   Catch::Matchers::WithinAbs(t.t[static_cast<std::size_t>(i)], 1e-9));
  }
}

TEST_CASE("zipf popularity as printed") {
  REQUIRE(zipf_popularity(1, 1.1) == std::vector<double>{1.0});
  auto flat = zipf_popularity(2, 0.0);
  REQUIRE_THAT(flat[0], Catch::Matchers::WithinAbs(0.5, 1e-15));
  REQUIRE_THAT(flat[1], Catch::Matchers::WithinAbs(0.5, 1e-15));
  auto p = zipf_popularity(3, 1.1);
  const double z = 1.0 + std::pow(2.0, 1.1) + std::pow(3.0, 1.1);
  REQUIRE_THAT(p[0], Catch::Matchers::WithinAbs(1.0 / z, 1e-15));
  REQUIRE_THAT(p[1], Catch::Matchers::WithinAbs(std::pow(2.0, 1.1) / z, 1e-15));
  REQUIRE_THAT(p[2], Catch::Matchers::WithinAbs(std::pow(3.0, 1.1) / z, 1e-15));
  // printed sign: higher index more popular; negate flag flips it
  REQUIRE(p[2] > p[0]);
  auto q = zipf_popularity(3, 1.1, true);
  REQUIRE(q[0] > q[2]);
}

TEST_CASE("scenario validation") {
  auto cfg = default_scenario();
  REQUIRE_NOTHROW(cfg.validate());
  SECTION("alpha") {
    cfg.alpha = 2.0;
    REQUIRE_THROWS_AS(cfg.validate(), invalid_config_error);
  }
  SECTION("cache size") {
    cfg.cache_size = 11;
    REQUIRE_THROWS_AS(cfg.validate(), invalid_config_error);
  }
  SECTION("popularity sum") {
    cfg.services[0].popularity += 0.1;
    REQUIRE_THROWS_AS(cfg.validate(), invalid_config_error);
  }
  SECTION("delays positive") {
    cfg.services[3].gamma_q_s = 0.0;
    REQUIRE_THROWS_AS(cfg.validate(), invalid_config_error);
  }
}

TEST_CASE("config parsing") {
  SECTION("defaults round trip") {
    std::istringstream in("n_services = 10\ncache_size = 3\n");
    auto kv = KeyValueFile::parse(in);
    auto cfg = scenario_from_kv(kv);
    REQUIRE(cfg.n_services == 10);
    REQUIRE(cfg.cache_size == 3);
    REQUIRE_THAT(cfg.f_bs, Catch::Matchers::WithinRel(7.5e6, 1e-12));
    REQUIRE_THAT(cfg.services[9].popularity, Catch::Matchers::WithinRel(
        zipf_popularity(10, 1.1)[9], 1e-12));
    REQUIRE(kv.unused_keys().empty());
  }
  SECTION("comments, lists and per-service values") {
    std::istringstream in(
        "# scenario\n"
        "n_services = 3\ncache_size = 2\n"
        "popularity = 0.5, 0.25, 0.25\n"
        "gamma_q_s = 1.0, 2.0, 3.0\n");
    auto kv = KeyValueFile::parse(in);
    auto cfg = scenario_from_kv(kv);
    REQUIRE_THAT(cfg.services[0].popularity, Catch::Matchers::WithinAbs(0.5, 1e-15));
    REQUIRE_THAT(cfg.services[2].gamma_q_s, Catch::Matchers::WithinAbs(3.0, 1e-15));
  }
  SECTION("unequal software sizes rejected") {
    std::istringstream in("n_services = 3\ncache_size = 1\nsoftware_size_bits = 1e6, 2e6, 1e6\n");
    auto kv = KeyValueFile::parse(in);
    REQUIRE_THROWS_AS(scenario_from_kv(kv), invalid_config_error);
  }
  SECTION("equal software sizes accepted") {
    std::istringstream in("n_services = 3\ncache_size = 1\nsoftware_size_bits = 1e6\n");
    auto kv = KeyValueFile::parse(in);
    REQUIRE_NOTHROW(scenario_from_kv(kv));
  }
  SECTION("malformed") {
    std::istringstream in("alpha 4\n");
    REQUIRE_THROWS_AS(KeyValueFile::parse(in), invalid_config_error);
  }
}

TEST_CASE("derive_constants") {
  SECTION("zero traffic") {
    auto cfg = default_scenario();
    cfg.p_s = 0.0;
    auto d = derive_constants(cfg);
    for (int n = 0; n < cfg.n_services; ++n) {
      REQUIRE(d.a_u[static_cast<std::size_t>(n)] == 0.0);
      REQUIRE(d.b_d[static_cast<std::size_t>(n)] == 0.0);
      REQUIRE(d.c_d[static_cast<std::size_t>(n)] == 0.0);
      REQUIRE(d.d_n[static_cast<std::size_t>(n)] == 1.0);
      REQUIRE(d.e_n[static_cast<std::size_t>(n)] == 0.0);
    }
  }
  SECTION("theta = 1, p_s = kappa gives A = Z(1,4,0) = pi/2") {
    ScenarioConfig cfg;
    cfg.n_services = 1;
    cfg.cache_size = 1;
    cfg.services.assign(1, ServiceSpec{});
    cfg.services[0].popularity = 1.0;
    cfg.reuse_kappa = 1;
    cfg.p_s = 1.0; // p_s = kappa
    // kappa L / (W gamma) = 1  =>  theta = 1
    cfg.services[0].input_bits = cfg.bandwidth_hz * cfg.services[0].gamma_u_s;
    cfg.validate();
    auto d = derive_constants(cfg);
    REQUIRE_THAT(d.theta_u[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(d.a_u[0], Catch::Matchers::WithinRel(M_PI / 2.0, 1e-12));
  }
  SECTION("default scenario constants are finite and positive") {
    auto cfg = default_scenario();
    auto d = derive_constants(cfg);
    for (int n = 0; n < cfg.n_services; ++n) {
      const auto i = static_cast<std::size_t>(n);
      REQUIRE(std::isfinite(d.a_u[i]));
      REQUIRE(d.a_u[i] > 0.0);
      REQUIRE(d.d_n[i] > 0.0);
      REQUIRE(d.e_n[i] > 0.0);
      REQUIRE(d.j_n[i] == 25.0);
    }
  }
}

TEST_CASE("validate_point reporting") {
  auto cfg = default_scenario();
  auto d = derive_constants(cfg);
  auto idx = enumerate_combinations(cfg.n_services, cfg.cache_size);

  SECTION("uniform design with tiny user density passes") {
    auto cfg2 = cfg;
    cfg2.density_u = 1e-9; // tiny load
    auto d2 = derive_constants(cfg2);
    CachingDistribution a;
    a.a.assign(static_cast<std::size_t>(idx.size()), 1.0 / idx.size());
    ComputingAllocation b;
    b.b.assign(static_cast<std::size_t>(idx.size()),
               std::vector<double>(static_cast<std::size_t>(cfg.cache_size),
                                   1.0 / cfg.cache_size));
    auto support = make_support(idx, a, b);
    auto rep = validate_point(cfg2, d2, &support, nullptr);
    REQUIRE(rep.ok());
  }
  SECTION("zero share for an active loaded service is flagged") {
    auto idx2 = enumerate_combinations(2, 2);
    std::vector<SupportEntry> support{{{0, 1}, 1.0, {0.0, 1.0}}};
    ScenarioConfig cfg2 = cfg;
    cfg2.n_services = 2;
    cfg2.cache_size = 2;
    cfg2.services.assign(2, cfg.services[0]);
    cfg2.services[0].popularity = 0.5;
    cfg2.services[1].popularity = 0.5;
    cfg2.validate();
    auto d2 = derive_constants(cfg2);
    auto rep = validate_point(cfg2, d2, &support, nullptr);
    REQUIRE_FALSE(rep.ok());
    bool found = false;
    for (const auto& i : rep.issues) found |= i.constraint == "b mu >= lambda";
    REQUIRE(found);
  }
  SECTION("simplex deficit residual") {
    std::vector<SupportEntry> support{{{0, 1, 2}, 0.9, {}}};
    auto rep = validate_point(cfg, d, &support, nullptr);
    REQUIRE_FALSE(rep.ok());
    REQUIRE(rep.issues.size() == 1);
    REQUIRE(rep.issues[0].constraint == "sum_j a_j = 1");
    REQUIRE_THAT(rep.issues[0].residual, Catch::Matchers::WithinAbs(0.1, 1e-12));
  }
}
