#pragma once

#include <optional>
#include <string>

#include "certctl/core.hpp"
#include "certctl/trajectories.hpp"

namespace certctl::stability {

using StateFn = std::function<double(std::span<const double>)>;
using CertFn = std::function<CertifiedReal(std::span<const double> x, double t)>;
using GradFn = std::function<Vec(std::span<const double>)>;

/// nu(x, y) > 0 with w(y) - w(x) > nu(x, y) whenever |x| < |y|.
using StrictIncreaseWitness = std::function<double(std::span<const double> x, std::span<const double> y)>;

/// Positive-definite function of the state with its modulus (queried with
/// the cell center and radius) and strict-increase witness.
struct PositiveDefinite {
  StateFn w;
  std::optional<Modulus> modulus;
  StrictIncreaseWitness nu;
};

/// w(x) = sum_k c_k |x|^k with c_k >= 0 and c_0 = 0.
struct RadialPolynomial {
  Vec coeffs;

  double operator()(std::span<const double> x) const;
  // Local Lipschitz bound sum k c_k (|c| + r)^(k-1) on B_r(c).
  Modulus modulus() const;
  // nu(x, y) = (w(y) - w(x)) / 2, rounded down.
  StrictIncreaseWitness witness() const;
  PositiveDefinite positive_definite() const;
};

/// Lyapunov certificate data. x-moduli are queried as
/// variation(t, cell_center, cell_radius); t-moduli likewise with the cell
/// as center, so they may scale with the state.
struct LyapunovData {
  std::size_t dim = 0;
  Box domain;
  CertFn V;
  std::optional<Modulus> V_x_modulus;
  std::optional<Modulus> V_t_modulus;
  CertFn Vdot;  // along-system derivative dV/dx f + dV/dt
  std::optional<Modulus> Vdot_x_modulus;
  std::optional<Modulus> Vdot_t_modulus;
  PositiveDefinite w1, w2, w3;
  double xi = 1.0;
};

enum class Status { certified, counterexample, undecided };
const char* to_string(Status s);

struct CheckOptions {
  // Cells within this radius of the origin are exempt from the positive
  // margin rule; <= 0 selects 5% of the inscribed radius of the domain.
  double exemption = 0.0;
  std::size_t witness_pairs = 20000;
  std::uint64_t seed = 1;
};

struct CheckResult {
  Status status = Status::certified;
  std::string condition;
  CertifiedReal margin;    // worst node margin outside the exemption ball
  double slack = 0.0;      // inter-node variation at the worst node
  Vec point;               // worst or violating node
  Vec other;               // second point of a violating pair
  double time = 0.0;
  double undecided_radius = 0.0;  // largest |x| of an uncovered cell
};

/// w1(x) <= V(x, t) <= w2(x) at every cell.
CheckResult check_sandwich(const LyapunovData& data, double eps, const Vec& t_samples, const CheckOptions& opts = {});
/// Vdot(x, t) <= -w3(x) at every cell.
CheckResult check_decay(const LyapunovData& data, double eps, const Vec& t_samples, const CheckOptions& opts = {});
/// w2(x) - w2(y) >= xi (|x| - |y|) for mesh pairs with |x| >= |y|, with a
/// positive gap required whenever |x| > |y|.
CheckResult check_linear_growth(const PositiveDefinite& w2, double xi, const FiniteMesh& mesh);
/// w(0) = 0, w > 0 at nonzero nodes, and nu sampled on random node pairs.
CheckResult check_positive_definite(const PositiveDefinite& w, const std::string& name, const FiniteMesh& mesh,
                                    const CheckOptions& opts);

struct StabilityCertificate {
  Status verdict = Status::undecided;
  double x0_threshold = 0.0;  // X0 = {x : w2(x) <= threshold}
  double x0_radius = 0.0;     // ball of this radius lies in X0
  double mesh_eps = 0.0;
  double exemption = 0.0;
  double t_min = 0.0, t_max = 0.0;
  double suggested_eps = 0.0;  // set when undecided
  std::vector<CheckResult> checks;
  CheckResult failing;  // first counterexample or undecided check
};

StabilityCertificate certify(const LyapunovData& data, double eps, const Vec& t_samples,
                             const CheckOptions& opts = {});

struct CLFProblem {
  std::size_t dim = 0;
  std::size_t control_dim = 0;
  Box state_box;
  Box control_box;
  traj::ControlFieldFn f;
  double lipschitz_x = 0.0;
  double lipschitz_u = 0.0;
  StateFn V;
  GradFn grad_V;
  std::optional<Modulus> V_modulus;
  StateFn w3;  // optional decay target per unit time
  double r = 0.1;
  double R = 1.0;

  void validate() const;
  traj::ControlledRHS controlled_rhs() const;
};

struct FeedbackResult {
  Vec u;
  CertifiedReal value;  // <grad V(x), f(x, u)>; the infimum is >= value.lo() - eps
  std::size_t index = 0;
  std::size_t mesh_size = 0;
};

/// eps-minimizer of u -> <grad V(x), f(x, u)> over the control box.
FeedbackResult clf_feedback(const CLFProblem& p, std::span<const double> x, double eps);

struct SamplingOptions {
  double mesh_eps = 0.0;      // annulus mesh resolution; <= 0 selects r / 40
  double sim_eps = 1e-6;      // trajectory error target per interval
  double eta_floor = 1e-6;    // smallest eta tried
  std::size_t bisection_steps = 24;
  bool verify_practical = true;
};

struct SamplingResult {
  bool ok = false;
  double eta = 0.0;
  CertifiedReal margin;  // worst certified decrease minus eta * eps
  Vec worst_point;
  std::size_t nodes = 0;
  std::size_t candidates = 0;
  std::string diagnostic;
  bool practical_ok = false;      // every node reached the r-ball
  double practical_horizon = 0.0;
};

/// Largest mesh-certified sampling time in (0, eta_max] for the
/// sample-and-hold CLF feedback computed at optimizer error eps. Each cell
/// meeting the annulus must lose V by more than eta * eps (plus eta * w3)
/// over one interval under its node's held control.
SamplingResult find_sampling_time(const CLFProblem& p, double eta_max, double eps, const SamplingOptions& opts = {});

/// Closed-loop sample-and-hold run from x0 with the eps-optimal feedback.
traj::ExtendedSolution simulate_closed_loop(const CLFProblem& p, double eta, double eps, const Vec& x0,
                                            double horizon, double sim_eps);

}  // namespace certctl::stability
