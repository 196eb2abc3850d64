#pragma once

#include <optional>
#include <vector>

#include "certctl/danskin.hpp"
#include "certctl/forms.hpp"
#include "certctl/selector.hpp"
#include "certctl/stability.hpp"
#include "certctl/trajectories.hpp"

/// Problem data assembled from registry forms, with moduli and Lipschitz
/// constants derived from derivative enclosures.
namespace certctl::builders {

using forms::FormPtr;

/// Cartesian product of boxes.
Box join(const Box& a, const Box& b);

/// phi over (x_1..x_n, theta_1..theta_k). Constants hold on x_box x theta_box.
danskin::ParametricObjective danskin_objective(const FormPtr& phi, const Box& x_box, const Box& theta_box);

/// x' = f(x, t) with f_i over (x_1..x_n, t) on [0, horizon].
traj::RegularRHS ode_rhs(const std::vector<FormPtr>& field, const Box& state_box, double horizon);

/// x' = f(x, u) with f_i over (x_1..x_n, u_1..u_m) and V over x.
stability::CLFProblem clf_problem(const std::vector<FormPtr>& field, const Box& state_box, const Box& control_box,
                                  const FormPtr& V, double r, double R);

/// x' = f(x, t) with V over (x, t) for t in [t_min, t_max]; w_i radial
/// polynomial coefficients.
stability::LyapunovData lyapunov_data(const std::vector<FormPtr>& field, const Box& domain, const FormPtr& V,
                                      const Vec& w1, const Vec& w2, const Vec& w3, double xi, double t_min,
                                      double t_max);

/// [alpha(x), beta(x)] with x in R^dim.
selector::Chunk chunk(const FormPtr& alpha, const FormPtr& beta, std::size_t dim);

}  // namespace certctl::builders
