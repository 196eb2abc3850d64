#include "certctl/builders.hpp"

#include <cmath>

#include "certctl/errors.hpp"

namespace certctl::builders {

namespace {

Vec concat(std::span<const double> a, std::span<const double> b) {
  Vec v(a.begin(), a.end());
  v.insert(v.end(), b.begin(), b.end());
  return v;
}

// Frobenius bound of the Jacobian block d f / d v_first..first+count-1.
double jacobian_bound(const std::vector<FormPtr>& f, const Box& box, std::size_t first, std::size_t count) {
  double s = 0.0;
  for (const auto& fi : f) {
    const double g = fi->gradient_bound(box, first, count);
    s = sum_up(s, product_up(g, g));
  }
  return up(std::sqrt(s));
}

double sup_abs(const CertifiedReal& e) { return std::max(std::abs(e.lo()), std::abs(e.hi())); }

// Local bound of |d/dt g| over B_r(c) x [t_min, t_max].
Modulus time_modulus(const FormPtr& g, std::size_t n, double t_min, double t_max) {
  if (g->arity() <= n) return Modulus::lipschitz(0.0);
  const FormPtr dt = g->derivative(n);
  return Modulus::local_lipschitz([dt, n, t_min, t_max](std::span<const double> c, double r) {
    std::vector<CertifiedReal> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(CertifiedReal::from_interval(down(c[i] - r), up(c[i] + r)));
    v.push_back(CertifiedReal::from_interval(t_min, t_max));
    return sup_abs(dt->eval(v));
  });
}

void check_arity(const FormPtr& f, std::size_t limit, const char* what) {
  if (f->arity() > limit)
    throw ConfigError(std::string(what) + ": form uses variable " + std::to_string(f->arity() - 1) + " but only " +
                      std::to_string(limit) + " variables exist");
}

}  // namespace

Box join(const Box& a, const Box& b) { return Box(concat(a.lo, b.lo), concat(a.hi, b.hi)); }

danskin::ParametricObjective danskin_objective(const FormPtr& phi, const Box& x_box, const Box& theta_box) {
  const std::size_t n = x_box.dim(), k = theta_box.dim();
  check_arity(phi, n + k, "danskin objective");
  const Box all = join(x_box, theta_box);
  std::vector<FormPtr> grad;
  for (std::size_t i = 0; i < n; ++i) grad.push_back(phi->derivative(i));

  danskin::ParametricObjective o;
  o.eval = [phi](std::span<const double> x, std::span<const double> t) { return (*phi)(concat(x, t)); };
  o.grad_x = [grad](std::span<const double> x, std::span<const double> t) {
    const Vec v = concat(x, t);
    Vec g;
    for (const auto& d : grad) g.push_back(d->value(v));
    return g;
  };
  o.modulus_x = Modulus::lipschitz(phi->gradient_bound(all, 0, n));
  o.modulus_theta = Modulus::lipschitz(phi->gradient_bound(all, n, k));
  o.grad_modulus = Modulus::lipschitz(jacobian_bound(grad, all, 0, n + k));
  return o;
}

traj::RegularRHS ode_rhs(const std::vector<FormPtr>& field, const Box& state_box, double horizon) {
  const std::size_t n = state_box.dim();
  if (field.size() != n) throw ConfigError("ode: field needs one form per state coordinate");
  for (const auto& f : field) check_arity(f, n + 1, "ode field");
  if (!(horizon > 0.0)) throw ConfigError("ode: horizon must be positive");
  const Box all = join(state_box, Box({0.0}, {horizon}));

  traj::TimeBlock b;
  b.t0 = 0.0;
  b.t1 = horizon;
  b.field = [field, n](std::span<const double> x, double t, std::span<double> out) {
    Vec v(x.begin(), x.end());
    v.push_back(t);
    for (std::size_t i = 0; i < n; ++i) out[i] = field[i]->value(v);
  };
  b.lipschitz_x = jacobian_bound(field, all, 0, n);
  b.t_modulus = Modulus::lipschitz(jacobian_bound(field, all, n, 1));

  traj::RegularRHS r;
  r.dim = n;
  r.state_box = state_box;
  r.blocks.push_back(std::move(b));
  return r;
}

stability::CLFProblem clf_problem(const std::vector<FormPtr>& field, const Box& state_box, const Box& control_box,
                                  const FormPtr& V, double r, double R) {
  const std::size_t n = state_box.dim(), m = control_box.dim();
  if (field.size() != n) throw ConfigError("shh: field needs one form per state coordinate");
  for (const auto& f : field) check_arity(f, n + m, "shh field");
  check_arity(V, n, "shh V");
  const Box all = join(state_box, control_box);

  std::vector<FormPtr> grad;
  for (std::size_t i = 0; i < n; ++i) grad.push_back(V->derivative(i));

  stability::CLFProblem p;
  p.dim = n;
  p.control_dim = m;
  p.state_box = state_box;
  p.control_box = control_box;
  p.f = [field](std::span<const double> x, std::span<const double> u, double, std::span<double> out) {
    const Vec v = concat(x, u);
    for (std::size_t i = 0; i < field.size(); ++i) out[i] = field[i]->value(v);
  };
  p.lipschitz_x = jacobian_bound(field, all, 0, n);
  p.lipschitz_u = jacobian_bound(field, all, n, m);
  p.V = [V](std::span<const double> x) { return V->value(x); };
  p.grad_V = [grad](std::span<const double> x) {
    Vec g;
    for (const auto& d : grad) g.push_back(d->value(x));
    return g;
  };
  p.V_modulus = forms::modulus(V, n);
  p.r = r;
  p.R = R;
  return p;
}

stability::LyapunovData lyapunov_data(const std::vector<FormPtr>& field, const Box& domain, const FormPtr& V,
                                      const Vec& w1, const Vec& w2, const Vec& w3, double xi, double t_min,
                                      double t_max) {
  const std::size_t n = domain.dim();
  if (field.size() != n) throw ConfigError("certify: field needs one form per state coordinate");
  for (const auto& f : field) check_arity(f, n + 1, "certify field");
  check_arity(V, n + 1, "certify V");
  if (!(t_min <= t_max)) throw ConfigError("certify: t_min > t_max");
  const Box times({t_min}, {t_max});

  std::vector<FormPtr> vdot_terms{forms::lie_derivative(V, field)};
  if (V->arity() > n) vdot_terms.push_back(V->derivative(n));
  const FormPtr vdot = forms::sum(std::move(vdot_terms));

  auto cert = [](FormPtr f) {
    return [f](std::span<const double> x, double t) {
      Vec v(x.begin(), x.end());
      v.push_back(t);
      return (*f)(v);
    };
  };

  stability::LyapunovData d;
  d.dim = n;
  d.domain = domain;
  d.V = cert(V);
  d.V_x_modulus = forms::modulus(V, n, times);
  d.V_t_modulus = time_modulus(V, n, t_min, t_max);
  d.Vdot = cert(vdot);
  d.Vdot_x_modulus = forms::modulus(vdot, n, times);
  d.Vdot_t_modulus = time_modulus(vdot, n, t_min, t_max);
  d.w1 = stability::RadialPolynomial{w1}.positive_definite();
  d.w2 = stability::RadialPolynomial{w2}.positive_definite();
  d.w3 = stability::RadialPolynomial{w3}.positive_definite();
  d.xi = xi;
  return d;
}

selector::Chunk chunk(const FormPtr& alpha, const FormPtr& beta, std::size_t dim) {
  check_arity(alpha, dim, "selector alpha");
  check_arity(beta, dim, "selector beta");
  selector::Chunk c;
  c.alpha = [alpha](std::span<const double> x) { return alpha->value(x); };
  c.beta = [beta](std::span<const double> x) { return beta->value(x); };
  c.alpha_modulus = forms::modulus(alpha, dim);
  c.beta_modulus = forms::modulus(beta, dim);
  return c;
}

}  // namespace certctl::builders
