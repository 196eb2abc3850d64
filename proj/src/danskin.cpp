#include "certctl/danskin.hpp"

#include <algorithm>
#include <ostream>

namespace certctl::danskin {

namespace {

struct ThetaBall {
  Vec center;
  double radius;
};

ThetaBall theta_ball(const ThetaDomain& theta) {
  return {theta.box.center(), 0.5 * theta.box.diameter()};
}

struct Scan {
  FiniteMesh mesh;
  std::vector<CertifiedReal> values;
  CertifiedReal psi_hat;
};

Scan scan(const ParametricObjective& obj, const ThetaDomain& theta, std::span<const double> x, double rho) {
  if (!obj.eval) throw ContractError("danskin: objective has no evaluator");
  Scan s;
  s.mesh = theta.mesh(rho);
  s.values.resize(s.mesh.size());
  parallel_for(s.mesh.size(), [&](std::size_t i) { s.values[i] = obj.eval(x, s.mesh.point(i)); });
  double lo = -INFINITY, hi = -INFINITY;
  for (const auto& v : s.values) {
    lo = std::max(lo, v.lo());
    hi = std::max(hi, v.hi());
  }
  const ThetaBall b = theta_ball(theta);
  const double gap = s.mesh.size() == 1 ? obj.modulus_theta.variation(b.radius, b.center, b.radius)
                                        : obj.modulus_theta.variation(rho, b.center, b.radius);
  s.psi_hat = CertifiedReal::from_interval(lo, up(hi + gap));
  return s;
}

// Resolutions beyond the diameter all give the center node.
double capped(double rho, const ThetaDomain& theta) {
  const double d = theta.box.diameter();
  return std::min(rho, d > 0.0 ? d : 1.0);
}

double mesh_resolution(const ParametricObjective& obj, const ThetaDomain& theta, double delta,
                       double mesh_eps) {
  if (mesh_eps > 0.0) return mesh_eps;
  const ThetaBall b = theta_ball(theta);
  return capped(obj.modulus_theta.step(0.25 * delta, b.center, b.radius), theta);
}

double dot_bound(std::span<const double> g, std::span<const double> v, double& err) {
  double s = 0.0, mag = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    s += g[k] * v[k];
    mag += std::abs(g[k] * v[k]);
  }
  err = mag == 0.0 ? 0.0 : static_cast<double>(v.size() + 1) * ulp_of(mag);
  return s;
}

double grad_variation(const ParametricObjective& obj, const ThetaDomain& theta, std::span<const double> x,
                      double t) {
  const ThetaBall b = theta_ball(theta);
  Vec joint(x.begin(), x.end());
  joint.insert(joint.end(), b.center.begin(), b.center.end());
  return obj.grad_modulus.variation(t, joint, std::hypot(b.radius, t));
}

}  // namespace

CertifiedReal psi(const ParametricObjective& obj, const ThetaDomain& theta, std::span<const double> x,
                  double eps) {
  if (!(eps > 0.0)) throw ArgumentError("psi: eps must be positive");
  const ThetaBall b = theta_ball(theta);
  const double rho = capped(obj.modulus_theta.step(0.5 * eps, b.center, b.radius), theta);
  return scan(obj, theta, x, rho).psi_hat;
}

DeltaOptimizerSet delta_optimizers(const ParametricObjective& obj, const ThetaDomain& theta,
                                   std::span<const double> x, double delta, double mesh_eps) {
  if (!(delta > 0.0)) throw ArgumentError("delta_optimizers: delta must be positive");
  const double rho = mesh_resolution(obj, theta, delta, mesh_eps);
  Scan s = scan(obj, theta, x, rho);
  DeltaOptimizerSet out;
  out.x.assign(x.begin(), x.end());
  out.delta = delta;
  out.mesh_eps = rho;
  out.psi_hat = s.psi_hat;
  // Keep every node that could be a delta-optimizer.
  const double threshold = down(s.psi_hat.lo() - delta);
  for (std::size_t i = 0; i < s.mesh.size(); ++i) {
    if (s.values[i].hi() >= threshold) {
      out.indices.push_back(i);
      out.points.push_back(s.mesh.point_vec(i));
      out.values.push_back(s.values[i]);
    }
  }
  return out;
}

DirectionalDerivative directional_derivative(const ParametricObjective& obj, const ThetaDomain& theta,
                                             std::span<const double> x, std::span<const double> v,
                                             double delta, double mesh_eps) {
  if (!(delta > 0.0)) throw ArgumentError("directional_derivative: delta must be positive");
  if (v.size() != x.size()) throw ArgumentError("directional_derivative: direction has wrong dimension");
  if (!obj.grad_x) throw ContractError("directional_derivative: objective has no gradient");
  DirectionalDerivative d;
  d.set = delta_optimizers(obj, theta, x, delta, mesh_eps);
  const auto& pts = d.set.points;
  std::vector<double> dv(pts.size()), err(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    const Vec g = obj.grad_x(x, pts[i]);
    dv[i] = dot_bound(g, v, err[i]);
  });
  std::size_t best = 0;
  double lo = dv[0];
  for (std::size_t i = 1; i < dv.size(); ++i) {
    if (dv[i] > dv[best]) best = i;
    lo = std::min(lo, dv[i]);
  }
  const double nv = norm(v);
  const double mesh_term = nv == 0.0 ? 0.0 : grad_variation(obj, theta, x, d.set.mesh_eps) * nv;
  const double r = mesh_term + err[best];
  d.value = CertifiedReal(dv[best], r == 0.0 ? 0.0 : up(r));
  d.spread = dv[best] - lo;
  d.witness = d.set.indices[best];
  d.witness_theta = pts[best];
  return d;
}

Modulus psi_modulus(const ParametricObjective& obj) { return obj.modulus_x; }

AuditReport finite_difference_audit(const ParametricObjective& obj, const ThetaDomain& theta,
                                    std::span<const double> x, std::span<const double> v, double delta,
                                    const std::vector<double>& hs, double mesh_eps) {
  for (std::size_t i = 0; i < hs.size(); ++i) {
    if (!(hs[i] > 0.0)) throw ArgumentError("finite_difference_audit: step sizes must be positive");
    if (i > 0 && !(hs[i] < hs[i - 1]))
      throw ArgumentError("finite_difference_audit: step sizes must be decreasing");
  }
  AuditReport rep;
  rep.derivative = directional_derivative(obj, theta, x, v, delta, mesh_eps);
  const auto& set = rep.derivative.set;
  const double rho = set.mesh_eps;
  const double nv = norm(v);
  const ThetaBall b = theta_ball(theta);
  const double theta_var = obj.modulus_theta.variation(rho, b.center, b.radius);
  const double mesh_grad = rep.derivative.value.radius;

  const CertifiedReal psi0 = set.psi_hat;
  // Witness gap psi(x) - phi(x, theta_w) and the largest gap over the set.
  std::size_t w = 0;
  while (set.indices[w] != rep.derivative.witness) ++w;
  const double gap_w = std::max(0.0, up(psi0.hi() - set.values[w].lo()));
  double gap_max = 0.0;
  for (const auto& val : set.values) gap_max = std::max(gap_max, up(psi0.hi() - val.lo()));

  auto shifted = [&](double h, double sign) {
    Vec y(x.begin(), x.end());
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += sign * h * v[k];
    return scan(obj, theta, y, rho).psi_hat;
  };
  auto quotient = [&](const CertifiedReal& p1, double h) {
    return CertifiedReal((p1.value - psi0.value) / h, up((p1.radius + psi0.radius) / h * (1.0 + 1e-15)) +
                                                           ulp_of((p1.value - psi0.value) / h));
  };

  rep.spread_bound = INFINITY;
  const double d_hat = rep.derivative.value.value;
  for (double h_in : hs) {
    const double h = std::min(h_in, 1.0);
    AuditRow row;
    row.h = h;
    row.quotient = quotient(shifted(h, 1.0), h);
    const double hv = h * nv;
    const double gv = nv == 0.0 ? 0.0 : grad_variation(obj, theta, x, hv) * nv;
    row.lower = down(d_hat - gap_w / h - gv - row.quotient.radius - 4.0 * ulp_of(d_hat));
    const double tau = 2.0 * obj.modulus_x.variation(hv, x, hv) + theta_var;
    row.upper_applies = tau <= delta;
    row.upper = row.upper_applies ? up(d_hat + gv + mesh_grad + row.quotient.radius) : INFINITY;
    row.sandwiched = row.lower <= row.quotient.value && row.quotient.value <= row.upper;
    rep.sandwich_ok = rep.sandwich_ok && row.sandwiched;

    const CertifiedReal qm = quotient(shifted(h, -1.0), h);
    const double bound = row.quotient.value + row.quotient.radius + qm.value + qm.radius + 2.0 * gap_max / h +
                         2.0 * gv + 2.0 * mesh_grad;
    rep.spread_bound = std::min(rep.spread_bound, up(bound));
    rep.rows.push_back(row);
  }
  rep.slack = rep.spread_bound - delta;
  return rep;
}

void write_audit_csv(std::ostream& os, const AuditReport& report) {
  os << "h,quotient,lower,upper\n";
  os.precision(17);
  for (const auto& r : report.rows) os << r.h << ',' << r.quotient.value << ',' << r.lower << ',' << r.upper << '\n';
}

}  // namespace certctl::danskin
