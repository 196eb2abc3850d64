#pragma once

#include <iosfwd>
#include <vector>

#include "certctl/core.hpp"

namespace certctl::danskin {

/// phi(x, theta) with its x-gradient and continuity certificates.
struct ParametricObjective {
  std::function<CertifiedReal(std::span<const double> x, std::span<const double> theta)> eval;
  std::function<Vec(std::span<const double> x, std::span<const double> theta)> grad_x;
  Modulus modulus_x;      // in x, uniform over theta
  Modulus modulus_theta;  // in theta, uniform over x
  Modulus grad_modulus;   // of grad_x in the joint variable (x, theta)
};

struct ThetaDomain {
  Box box;
  FiniteMesh mesh(double eps, std::size_t budget = kDefaultMeshBudget) const {
    return build_mesh(box, eps, budget);
  }
};

/// Outer approximation of the delta-optimizers on a theta mesh.
struct DeltaOptimizerSet {
  Vec x;
  double delta = 0.0;
  double mesh_eps = 0.0;
  std::vector<std::size_t> indices;  // into the theta mesh, increasing
  std::vector<Vec> points;
  std::vector<CertifiedReal> values;  // phi(x, theta) at each point
  CertifiedReal psi_hat;
};

CertifiedReal psi(const ParametricObjective& obj, const ThetaDomain& theta, std::span<const double> x,
                  double eps);

/// mesh_eps <= 0 picks the theta resolution at which phi varies by at most delta/4.
DeltaOptimizerSet delta_optimizers(const ParametricObjective& obj, const ThetaDomain& theta,
                                   std::span<const double> x, double delta, double mesh_eps = 0.0);

struct DirectionalDerivative {
  CertifiedReal value;  // max over the set of <grad_x phi, v>
  double spread = 0.0;  // max - min of <grad_x phi, v> over the set
  std::size_t witness = 0;  // theta mesh index attaining the max (lowest)
  Vec witness_theta;
  DeltaOptimizerSet set;
};

DirectionalDerivative directional_derivative(const ParametricObjective& obj, const ThetaDomain& theta,
                                             std::span<const double> x, std::span<const double> v,
                                             double delta, double mesh_eps = 0.0);

/// psi inherits the x-modulus of phi.
Modulus psi_modulus(const ParametricObjective& obj);

struct AuditRow {
  double h = 0.0;
  CertifiedReal quotient;  // (psi(x + h v) - psi(x)) / h
  double lower = 0.0;
  double upper = 0.0;      // +inf where the upper bound does not apply at this h
  bool upper_applies = false;
  bool sandwiched = false;
};

struct AuditReport {
  DirectionalDerivative derivative;
  std::vector<AuditRow> rows;
  double spread_bound = 0.0;  // certified bound on the member spread
  double slack = 0.0;         // spread_bound - delta
  bool sandwich_ok = true;
};

AuditReport finite_difference_audit(const ParametricObjective& obj, const ThetaDomain& theta,
                                    std::span<const double> x, std::span<const double> v, double delta,
                                    const std::vector<double>& hs, double mesh_eps = 0.0);

/// CSV with columns h, quotient, lower, upper.
void write_audit_csv(std::ostream& os, const AuditReport& report);

}  // namespace certctl::danskin
