#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace certctl::audit {

/// One property of the suite. `numeric` holds only deterministic values.
struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;  // first failure, empty on success
  nlohmann::json numeric = nlohmann::json::object();
  double seconds = 0.0;
};

struct Sizes {
  std::size_t evt_functionals = 50;
  std::size_t danskin_points = 8;  // (x, v, delta) samples per objective
  std::size_t selector_svfs = 10;
  std::size_t selector_points = 1000;
  std::size_t eigen_matrices = 1000;
  std::size_t eigen_max_dim = 8;
  double eigen_eps = 1e-8;
  std::size_t hurwitz_matrices = 200;
  double ode_eps = 1e-6;
  std::size_t gronwall_systems = 50;
  std::size_t lyapunov_simulations = 20;

  static Sizes full() { return {}; }
  static Sizes quick();
};

PropertyResult evt_guarantee(std::uint64_t seed, const Sizes& s);
PropertyResult danskin_sandwich(std::uint64_t seed, const Sizes& s);
PropertyResult selector_guarantee(std::uint64_t seed, const Sizes& s);
PropertyResult eigen_residuals(std::uint64_t seed, const Sizes& s);
PropertyResult caratheodory_solver(std::uint64_t seed, const Sizes& s);
PropertyResult lyapunov_certification(std::uint64_t seed, const Sizes& s);
PropertyResult sample_hold_stabilization(std::uint64_t seed, const Sizes& s);

/// Runs every property in order.
std::vector<PropertyResult> run_all(std::uint64_t seed, const Sizes& s);

}  // namespace certctl::audit
