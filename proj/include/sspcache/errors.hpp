#pragma once

#include <stdexcept>
#include <string>

namespace sspcache {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or self-contradictory scenario/sweep configuration.
struct invalid_config_error : error {
  using error::error;
};

// A requested point (T, a, ...) violates a feasibility constraint.
struct infeasibility_error : error {
  using error::error;
};

// Queue stability b*mu >= lambda violated where it is required to hold.
struct queue_unstable_error : error {
  queue_unstable_error(int service, const std::string& combo, double rate, double lambda)
      : error("queue unstable for service " + std::to_string(service + 1) + " in combination " +
              combo + ": service rate " + std::to_string(rate) + " < arrival rate " +
              std::to_string(lambda)),
        service(service) {}
  explicit queue_unstable_error(const std::string& what) : error(what), service(-1) {}
  int service;
};

// Quadrature/bisection/series evaluation failed to converge.
struct numeric_error : error {
  using error::error;
};

// A root bracketing step could not enclose a solution.
struct bracket_failure_error : error {
  using error::error;
};

}  // namespace sspcache
