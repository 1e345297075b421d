#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sspcache/errors.hpp"
#include "sspcache/scenario.hpp"

namespace sspcache {

// `key = value` file with '#' comments. Values may be scalars, words or
// comma-separated lists; consumers mark keys as used so unknown keys can be
// rejected at the end.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in) {
    KeyValueFile kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw invalid_config_error("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw invalid_config_error("config line " + std::to_string(lineno) + ": empty key");
      kv.values_[key] = value;
    }
    return kv;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_config_error("cannot open config file: " + path);
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    used_.insert(key);
    return it->second;
  }

  double get_double(const std::string& key, double fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    used_.insert(key);
    return to_double(key, it->second);
  }

  int get_int(const std::string& key, int fallback) {
    const double v = get_double(key, static_cast<double>(fallback));
    return static_cast<int>(std::llround(v));
  }

  bool get_bool(const std::string& key, bool fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    used_.insert(key);
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw invalid_config_error("key '" + key + "': expected boolean, got '" + it->second + "'");
  }

  // Comma list of any length; the key must exist.
  std::vector<double> get_list_free(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) throw invalid_config_error("missing required key '" + key + "'");
    used_.insert(key);
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
    if (out.empty()) throw invalid_config_error("key '" + key + "' has no values");
    return out;
  }

  // Scalar (broadcast) or comma list of exactly n values.
  std::vector<double> get_list(const std::string& key, double fallback, int n) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::vector<double>(static_cast<std::size_t>(n), fallback);
    used_.insert(key);
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
    if (out.size() == 1) return std::vector<double>(static_cast<std::size_t>(n), out[0]);
    if (static_cast<int>(out.size()) != n)
      throw invalid_config_error("key '" + key + "': expected 1 or " + std::to_string(n) +
                                 " values, got " + std::to_string(out.size()));
    return out;
  }

  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }
  static double to_double(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw invalid_config_error("key '" + key + "': cannot parse number '" + v + "'");
    }
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

inline ScenarioConfig scenario_from_kv(KeyValueFile& kv) {
  ScenarioConfig cfg;
  cfg.alpha = kv.get_double("alpha", cfg.alpha);
  cfg.bandwidth_hz = kv.get_double("bandwidth_hz", cfg.bandwidth_hz);
  cfg.reuse_kappa = kv.get_int("reuse_kappa", cfg.reuse_kappa);
  cfg.p_s = kv.get_double("p_s", cfg.p_s);
  cfg.density_bs = kv.get_double("density_bs", cfg.density_bs);
  cfg.density_u = kv.get_double("density_u", cfg.density_u);
  cfg.f_bs = kv.get_double("f_bs", cfg.f_bs);
  cfg.n_services = kv.get_int("n_services", cfg.n_services);
  cfg.cache_size = kv.get_int("cache_size", cfg.cache_size);
  cfg.sigmoid_delta = kv.get_double("sigmoid_delta", cfg.sigmoid_delta);
  cfg.barrier_omega = kv.get_double("barrier_omega", cfg.barrier_omega);
  cfg.grad_tol_tau = kv.get_double("grad_tol_tau", cfg.grad_tol_tau);
  cfg.zipf_exponent = kv.get_double("zipf_exponent", cfg.zipf_exponent);
  cfg.zipf_negate = kv.get_bool("zipf_negate", cfg.zipf_negate);
  cfg.power_bs_w = kv.get_double("power_bs_w", cfg.power_bs_w);
  cfg.power_u_w = kv.get_double("power_u_w", cfg.power_u_w);
  cfg.step_a0 = kv.get_double("step_a0", cfg.step_a0);
  cfg.step_exponent = kv.get_double("step_exponent", cfg.step_exponent);
  cfg.max_iterations = kv.get_int("max_iterations", cfg.max_iterations);

  const std::string lemma1 = kv.get_string("lemma1_denominator", "printed");
  if (lemma1 == "printed")
    cfg.lemma1_consistent_denominator = false;
  else if (lemma1 == "consistent")
    cfg.lemma1_consistent_denominator = true;
  else
    throw invalid_config_error("lemma1_denominator must be 'printed' or 'consistent'");
  const std::string lstar = kv.get_string("lambda_star", "printed");
  if (lstar == "printed")
    cfg.lambda_star_prop1 = false;
  else if (lstar == "prop1")
    cfg.lambda_star_prop1 = true;
  else
    throw invalid_config_error("lambda_star must be 'printed' or 'prop1'");

  const int n = cfg.n_services;
  if (n < 1) throw invalid_config_error("n_services must be at least 1");
  cfg.services.assign(static_cast<std::size_t>(n), ServiceSpec{});
  auto in_bits = kv.get_list("input_bits", ServiceSpec{}.input_bits, n);
  auto out_bits = kv.get_list("output_bits", ServiceSpec{}.output_bits, n);
  auto cycles = kv.get_list("workload_cycles", ServiceSpec{}.workload_cycles, n);
  auto gu = kv.get_list("gamma_u_s", ServiceSpec{}.gamma_u_s, n);
  auto gq = kv.get_list("gamma_q_s", ServiceSpec{}.gamma_q_s, n);
  auto gd = kv.get_list("gamma_d_s", ServiceSpec{}.gamma_d_s, n);
  for (int i = 0; i < n; ++i) {
    auto& s = cfg.services[static_cast<std::size_t>(i)];
    s.input_bits = in_bits[static_cast<std::size_t>(i)];
    s.output_bits = out_bits[static_cast<std::size_t>(i)];
    s.workload_cycles = cycles[static_cast<std::size_t>(i)];
    s.gamma_u_s = gu[static_cast<std::size_t>(i)];
    s.gamma_q_s = gq[static_cast<std::size_t>(i)];
    s.gamma_d_s = gd[static_cast<std::size_t>(i)];
  }

  // Equal-size software is a modelling assumption: a per-service size list is
  // only accepted when all entries coincide.
  if (kv.has("software_size_bits")) {
    auto sizes = kv.get_list("software_size_bits", 0.0, n);
    for (double v : sizes)
      if (v != sizes[0])
        throw invalid_config_error(
            "unequal per-service software sizes are not supported; all cached software must "
            "have the same size");
  }

  const std::string pop = kv.get_string("popularity", "zipf");
  if (pop == "zipf") {
    auto p = zipf_popularity(n, cfg.zipf_exponent, cfg.zipf_negate);
    for (int i = 0; i < n; ++i) cfg.services[static_cast<std::size_t>(i)].popularity = p[static_cast<std::size_t>(i)];
  } else {
    std::vector<double> p;
    std::stringstream ss(pop);
    std::string item;
    while (std::getline(ss, item, ',')) p.push_back(std::stod(item));
    if (static_cast<int>(p.size()) != n)
      throw invalid_config_error("popularity list must have n_services entries");
    for (int i = 0; i < n; ++i) cfg.services[static_cast<std::size_t>(i)].popularity = p[static_cast<std::size_t>(i)];
  }

  cfg.validate();
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  auto kv = KeyValueFile::load(path);
  auto cfg = scenario_from_kv(kv);
  return cfg;
}

}  // namespace sspcache
