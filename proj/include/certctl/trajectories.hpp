#pragma once

#include <iosfwd>
#include <optional>

#include "certctl/core.hpp"
#include "certctl/selector.hpp"

namespace certctl::traj {

/// out = f(x, t); out has the state dimension.
using FieldFn = std::function<void(std::span<const double> x, double t, std::span<double> out)>;

/// f on the time block [t0, t1]: Lipschitz in x with constant lipschitz_x on
/// the state box, and |f(x, t) - f(x, s)| <= t_modulus(|t - s|).
struct TimeBlock {
  double t0 = 0.0;
  double t1 = 0.0;
  FieldFn field;
  double lipschitz_x = 0.0;
  Modulus t_modulus;
};

/// Right-hand side regular in time: blocks partition [blocks.front().t0,
/// blocks.back().t1], in order.
struct RegularRHS {
  std::size_t dim = 0;
  Box state_box;
  std::vector<TimeBlock> blocks;

  static RegularRHS autonomous(std::size_t dim, Box box, double horizon, FieldFn f, double lipschitz_x);
  void validate() const;
  double max_lipschitz() const;
  // Checks the Lipschitz constant on pairs of random box points in every block.
  bool lipschitz_sampled(std::size_t pairs, std::uint64_t seed) const;
};

struct ExtendedSolution {
  std::size_t dim = 0;
  Vec times;
  std::vector<Vec> values;
  Vec node_errors;                 // |x(t) - y(t)| bound on [t_0, t_k]
  CertifiedReal error_bound;       // sup-norm error over the horizon
  std::vector<Vec> controls;       // held control per node (sample-and-hold)
  Vec contraction;                 // largest iterate contraction ratio per window
  std::size_t windows = 0;
  std::size_t steps = 0;
  selector::RepresentableDomain validity;  // horizon minus block-boundary slabs

  /// Piecewise-linear interpolant.
  Vec at(double t) const;
  const Vec& final_state() const { return values.back(); }
};

struct SolveOptions {
  std::size_t step_budget = std::size_t{1} << 23;
  std::size_t initial_steps_per_window = 16;
  std::size_t max_picard_iterations = 200;
};

/// Picard iteration on contraction windows with certified a-posteriori error.
/// Throws DomainExitError if the trajectory leaves the state box and
/// ResourceError if eps is not reached within the step budget.
ExtendedSolution picard_solve(const RegularRHS& rhs, const Vec& x0, double horizon, double eps,
                              const SolveOptions& opts = {});

/// Gronwall modulus exp(int L) * t of the initial-condition dependence.
Modulus dependence_modulus(const RegularRHS& rhs, double horizon);

/// out = f(x, u, t).
using ControlFieldFn =
    std::function<void(std::span<const double> x, std::span<const double> u, double t, std::span<double> out)>;

struct ControlledRHS {
  std::size_t dim = 0;
  std::size_t control_dim = 0;
  Box state_box;
  ControlFieldFn field;
  double lipschitz_x = 0.0;
  double lipschitz_u = 0.0;
  Modulus t_modulus;
};

struct SampleHoldPolicy {
  std::function<Vec(std::span<const double>)> kappa;
  double eta = 0.0;
  // Lipschitz constant of kappa. When set, the error bound covers the
  // closed loop with kappa evaluated at the true sampled states; otherwise
  // it covers the system driven by the recorded held controls.
  std::optional<double> lipschitz;
};

ExtendedSolution sample_hold_trajectory(const ControlledRHS& f, const SampleHoldPolicy& policy, const Vec& x0,
                                        double horizon, double eps, const SolveOptions& opts = {});

/// Columns t, x1..xn, u1..um (if any), error.
void write_trajectory_csv(std::ostream& os, const ExtendedSolution& sol);

}  // namespace certctl::traj
