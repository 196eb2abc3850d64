#include "certctl/trajectories.hpp"

#include <algorithm>
#include <ostream>
#include <random>

namespace certctl::traj {

namespace {

constexpr double kUnit = std::numeric_limits<double>::epsilon() / 2.0;

double exp_up(double x) { return x == 0.0 ? 1.0 : up(std::exp(x) * (1.0 + 4.0 * kUnit)); }

double norm_up(std::span<const double> v) { return up(norm(v) * (1.0 + 4.0 * kUnit * static_cast<double>(v.size()))); }

std::size_t pow2_ceil(double x) {
  std::size_t p = 1;
  while (static_cast<double>(p) < x && p < (std::size_t{1} << 40)) p <<= 1;
  return p;
}

// Integrates piece by piece with a common step target, carrying the node
// values and the Gronwall error bound.
class Integrator {
 public:
  Integrator(std::size_t dim, const Box& box, double h, const SolveOptions& opts)
      : dim_(dim), box_(box), h_(h), opts_(opts) {}

  ExtendedSolution sol;
  Vec y;
  double e = 0.0;
  bool uncertain = false;
  double uncertain_time = 0.0;

  void start(double t0, const Vec& x0) {
    sol = {};
    sol.dim = dim_;
    y = x0;
    e = 0.0;
    sol.times.push_back(t0);
    sol.values.push_back(x0);
    sol.node_errors.push_back(0.0);
    check_node(y, 0.0, t0);
  }

  // Integrates f on [a, b] with windows of length <= 1/(2L).
  void run(const FieldFn& f, double lipschitz, const Modulus& t_mod, double a, double b, double extra_rate,
           const Vec* control) {
    if (!(b > a)) return;
    if (control) {
      sol.controls.resize(sol.times.size(), *control);
      sol.controls.back() = *control;
    }
    const double len = b - a;
    std::size_t windows = 1;
    if (lipschitz > 0.0) windows = static_cast<std::size_t>(std::ceil(len * 2.0 * lipschitz * (1.0 + 1e-12)));
    windows = std::max<std::size_t>(windows, 1);
    const double mu_half = t_mod.variation(h_ / 2.0);
    for (std::size_t w = 0; w < windows; ++w) {
      const double wa = w == 0 ? a : a + len * static_cast<double>(w) / static_cast<double>(windows);
      const double wb = w + 1 == windows ? b : a + len * static_cast<double>(w + 1) / static_cast<double>(windows);
      const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((wb - wa) / h_)));
      window(f, lipschitz, mu_half, wa, wb, n, extra_rate, control);
    }
  }

 private:
  std::size_t dim_;
  Box box_;
  double h_;
  SolveOptions opts_;

  // Exit certified when y is outside the box by more than e; uncertain when
  // the error tube touches the boundary.
  void check_node(std::span<const double> v, double err, double t) {
    for (std::size_t i = 0; i < dim_; ++i) {
      if (v[i] < box_.lo[i] - err || v[i] > box_.hi[i] + err)
        throw DomainExitError("trajectory leaves the state box by time " + std::to_string(t), t);
      if (v[i] - err < box_.lo[i] || v[i] + err > box_.hi[i]) {
        if (!uncertain) uncertain_time = t;
        uncertain = true;
      }
    }
  }

  void window(const FieldFn& f, double lipschitz, double mu_half, double a, double b, std::size_t n,
              double extra_rate, const Vec* control) {
    const std::size_t d = dim_;
    Vec t(n + 1);
    for (std::size_t k = 0; k <= n; ++k)
      t[k] = k == n ? b : a + (b - a) * (static_cast<double>(k) / static_cast<double>(n));
    Vec Y((n + 1) * d), Z((n + 1) * d), F(n * d), mid(d), k1(d);
    std::copy(y.begin(), y.end(), Y.begin());

    // Second-order predictor.
    for (std::size_t k = 0; k < n; ++k) {
      const double h = t[k + 1] - t[k];
      f({&Y[k * d], d}, t[k], k1);
      for (std::size_t i = 0; i < d; ++i) mid[i] = Y[k * d + i] + 0.5 * h * k1[i];
      f(mid, 0.5 * (t[k] + t[k + 1]), {&F[k * d], d});
      for (std::size_t i = 0; i < d; ++i) Y[(k + 1) * d + i] = Y[k * d + i] + h * F[k * d + i];
    }

    auto midpoint_fields = [&](const Vec& nodes) {
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < d; ++i) mid[i] = 0.5 * (nodes[k * d + i] + nodes[(k + 1) * d + i]);
        f(mid, 0.5 * (t[k] + t[k + 1]), {&F[k * d], d});
      }
    };

    // Picard iteration x <- x0 + int f(x) with midpoint quadrature.
    double prev = INFINITY, worst_ratio = 0.0;
    for (std::size_t it = 0; it < opts_.max_picard_iterations; ++it) {
      midpoint_fields(Y);
      std::copy(y.begin(), y.end(), Z.begin());
      double diff = 0.0, scale = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double h = t[k + 1] - t[k];
        double dn = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double v = Z[k * d + i] + h * F[k * d + i];
          Z[(k + 1) * d + i] = v;
          const double dv = v - Y[(k + 1) * d + i];
          dn += dv * dv;
          scale = std::max(scale, std::abs(v));
        }
        diff = std::max(diff, std::sqrt(dn));
      }
      Y.swap(Z);
      const double floor = 64.0 * kUnit * static_cast<double>(n + 1) * (1.0 + scale);
      if (std::isfinite(prev) && prev > 1e3 * floor && diff > 1e3 * floor)
        worst_ratio = std::max(worst_ratio, diff / prev);
      if (diff <= floor || (it > 3 && diff >= prev)) break;
      prev = diff;
    }
    sol.contraction.push_back(worst_ratio);
    ++sol.windows;

    // A-posteriori certificate for the piecewise-linear interpolant.
    midpoint_fields(Y);
    const double growth_rate = lipschitz;
    Vec gap(d), slope(d);
    for (std::size_t k = 0; k < n; ++k) {
      const double h = t[k + 1] - t[k];
      double fm_norm = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        slope[i] = (Y[(k + 1) * d + i] - Y[k * d + i]) / h;
        gap[i] = slope[i] - F[k * d + i];
        fm_norm = std::max(fm_norm, std::abs(F[k * d + i]));
      }
      const double sn = norm_up(slope);
      double rho = product_up(h, norm_up(gap));
      rho = up(rho + product_up(product_up(lipschitz, sn), up(h * h / 4.0)));
      rho = up(rho + product_up(h, mu_half));
      rho = up(rho + product_up(h, 16.0 * kUnit * (sn + fm_norm * std::sqrt(static_cast<double>(d)))));
      rho = up(rho + product_up(h, extra_rate));
      e = product_up(up(e + rho), exp_up(product_up(growth_rate, h)));
      check_node({&Y[k * d], d}, e, t[k]);
      check_node({&Y[(k + 1) * d], d}, e, t[k + 1]);
      sol.times.push_back(t[k + 1]);
      sol.values.emplace_back(Y.begin() + static_cast<std::ptrdiff_t>((k + 1) * d),
                              Y.begin() + static_cast<std::ptrdiff_t>((k + 2) * d));
      sol.node_errors.push_back(e);
      if (control) sol.controls.push_back(*control);
      ++sol.steps;
    }
    std::copy(Y.end() - static_cast<std::ptrdiff_t>(d), Y.end(), y.begin());
  }
};

std::size_t count_steps(const std::vector<std::pair<double, double>>& spans, double h) {
  std::size_t total = 0;
  for (const auto& [len, lip] : spans) {
    std::size_t w = lip > 0.0 ? static_cast<std::size_t>(std::ceil(len * 2.0 * lip * (1.0 + 1e-12))) : 1;
    w = std::max<std::size_t>(w, 1);
    total += w * std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / static_cast<double>(w) / h)));
  }
  return total;
}

selector::RepresentableDomain validity_domain(double t0, double t1, Vec boundaries) {
  selector::RepresentableDomain dom;
  dom.base.blocks.push_back({{t0}, {t1}});
  dom.base.proper = true;
  dom.exception = [boundaries = std::move(boundaries)](double eta) {
    selector::GeneralizedBlock gb;
    gb.proper = true;
    if (boundaries.empty()) return gb;
    const double w = down(eta / (2.0 * static_cast<double>(boundaries.size())));
    for (double b : boundaries) gb.blocks.push_back({{b - w / 2.0}, {b + w / 2.0}});
    return gb;
  };
  return dom;
}

// Shrinks the step until the certified bound reaches eps.
ExtendedSolution refine(std::size_t dim, const Box& box, double eps, double h0,
                        const std::vector<std::pair<double, double>>& spans, const SolveOptions& opts,
                        const std::function<void(Integrator&)>& attempt) {
  double h = h0, last = INFINITY;
  for (int round = 0; round < 64; ++round) {
    const std::size_t steps = count_steps(spans, h);
    if (steps > opts.step_budget)
      throw ResourceError("trajectory: eps = " + std::to_string(eps) + " needs more than the step budget of " +
                          std::to_string(opts.step_budget) + " steps (last bound " + std::to_string(last) + ")");
    Integrator in(dim, box, h, opts);
    attempt(in);
    const double bound = in.e;
    if (bound <= eps && !in.uncertain) {
      in.sol.error_bound = CertifiedReal::from_interval(0.0, bound);
      return std::move(in.sol);
    }
    if (std::isfinite(last) && bound > 0.9 * last) {
      if (in.uncertain && bound <= eps)
        throw DomainExitError("trajectory stays within its error bound of the state-box boundary", in.uncertain_time);
      throw ResourceError("trajectory: error bound stalls at " + std::to_string(bound) + " above eps = " +
                          std::to_string(eps));
    }
    last = bound;
    const double ratio = bound > eps ? bound / eps * 1.25 : 2.0;
    h /= static_cast<double>(std::clamp<std::size_t>(pow2_ceil(ratio), 2, std::size_t{1} << 20));
  }
  throw ResourceError("trajectory: refinement did not converge");
}

void check_start(const Box& box, const Vec& x0, std::size_t dim, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("trajectory: eps must be positive");
  if (x0.size() != dim) throw ArgumentError("trajectory: initial state has wrong dimension");
  if (!box.contains(x0)) throw ArgumentError("trajectory: initial state outside the state box");
}

}  // namespace

RegularRHS RegularRHS::autonomous(std::size_t dim, Box box, double horizon, FieldFn f, double lipschitz_x) {
  RegularRHS r;
  r.dim = dim;
  r.state_box = std::move(box);
  r.blocks.push_back({0.0, horizon, std::move(f), lipschitz_x, Modulus::lipschitz(0.0)});
  return r;
}

void RegularRHS::validate() const {
  if (dim == 0 || state_box.dim() != dim) throw ArgumentError("RegularRHS: state box dimension mismatch");
  if (blocks.empty()) throw ArgumentError("RegularRHS: no time blocks");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (!(b.t0 < b.t1)) throw ArgumentError("RegularRHS: time block " + std::to_string(i) + " is empty");
    if (!b.field) throw ArgumentError("RegularRHS: time block " + std::to_string(i) + " has no field");
    if (!(b.lipschitz_x >= 0.0) || !std::isfinite(b.lipschitz_x))
      throw ContractError("RegularRHS: time block " + std::to_string(i) + " needs a finite Lipschitz constant");
    if (i > 0 && blocks[i - 1].t1 != b.t0) throw ArgumentError("RegularRHS: time blocks must be contiguous");
  }
}

double RegularRHS::max_lipschitz() const {
  double l = 0.0;
  for (const auto& b : blocks) l = std::max(l, b.lipschitz_x);
  return l;
}

bool RegularRHS::lipschitz_sampled(std::size_t pairs, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  Vec x(dim), z(dim), fx(dim), fz(dim), diff(dim);
  for (const auto& b : blocks) {
    std::uniform_real_distribution<double> ut(b.t0, b.t1);
    for (std::size_t p = 0; p < pairs; ++p) {
      for (std::size_t i = 0; i < dim; ++i) {
        std::uniform_real_distribution<double> u(state_box.lo[i], state_box.hi[i]);
        x[i] = u(rng);
        z[i] = u(rng);
      }
      const double t = ut(rng);
      b.field(x, t, fx);
      b.field(z, t, fz);
      for (std::size_t i = 0; i < dim; ++i) diff[i] = fx[i] - fz[i];
      if (norm(diff) > b.lipschitz_x * distance(x, z) * (1.0 + 1e-12) + 1e-300) return false;
    }
  }
  return true;
}

Vec ExtendedSolution::at(double t) const {
  if (times.empty()) throw ArgumentError("ExtendedSolution: empty");
  if (t <= times.front()) return values.front();
  if (t >= times.back()) return values.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
  const double s = (t - times[k]) / (times[k + 1] - times[k]);
  Vec out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = values[k][i] + s * (values[k + 1][i] - values[k][i]);
  return out;
}

ExtendedSolution picard_solve(const RegularRHS& rhs, const Vec& x0, double horizon, double eps,
                              const SolveOptions& opts) {
  rhs.validate();
  check_start(rhs.state_box, x0, rhs.dim, eps);
  const double t0 = rhs.blocks.front().t0;
  if (!(horizon > t0)) throw ArgumentError("picard_solve: horizon must exceed the start time");
  if (horizon > rhs.blocks.back().t1) throw ArgumentError("picard_solve: horizon beyond the last time block");

  std::vector<std::pair<double, double>> spans;
  Vec boundaries;
  double shortest = horizon - t0;
  for (const auto& b : rhs.blocks) {
    if (b.t0 >= horizon) break;
    const double len = std::min(b.t1, horizon) - b.t0;
    spans.emplace_back(len, b.lipschitz_x);
    shortest = std::min(shortest, b.lipschitz_x > 0.0 ? std::min(len, 0.5 / b.lipschitz_x) : len);
    if (b.t1 < horizon) boundaries.push_back(b.t1);
  }
  const double h0 = shortest / static_cast<double>(std::max<std::size_t>(1, opts.initial_steps_per_window));

  auto sol = refine(rhs.dim, rhs.state_box, eps, h0, spans, opts, [&](Integrator& in) {
    in.start(t0, x0);
    for (const auto& b : rhs.blocks) {
      if (b.t0 >= horizon) break;
      in.run(b.field, b.lipschitz_x, b.t_modulus, b.t0, std::min(b.t1, horizon), 0.0, nullptr);
    }
  });
  sol.validity = validity_domain(t0, horizon, boundaries);
  return sol;
}

Modulus dependence_modulus(const RegularRHS& rhs, double horizon) {
  rhs.validate();
  double s = 0.0;
  for (const auto& b : rhs.blocks) {
    if (b.t0 >= horizon) break;
    s = sum_up(s, product_up(b.lipschitz_x, std::min(b.t1, horizon) - b.t0));
  }
  return Modulus::lipschitz(exp_up(s));
}

ExtendedSolution sample_hold_trajectory(const ControlledRHS& f, const SampleHoldPolicy& policy, const Vec& x0,
                                        double horizon, double eps, const SolveOptions& opts) {
  if (!f.field || f.dim == 0 || f.state_box.dim() != f.dim)
    throw ArgumentError("sample_hold_trajectory: incomplete controlled system");
  if (!policy.kappa) throw ArgumentError("sample_hold_trajectory: missing policy");
  if (!(policy.eta > 0.0)) throw ArgumentError("sample_hold_trajectory: sampling period must be positive");
  if (!(horizon > 0.0)) throw ArgumentError("sample_hold_trajectory: horizon must be positive");
  check_start(f.state_box, x0, f.dim, eps);

  const auto intervals = static_cast<std::size_t>(std::ceil(horizon / policy.eta));
  std::vector<std::pair<double, double>> spans, samples;
  Vec boundaries;
  for (std::size_t k = 0; k < intervals; ++k) {
    const double a = static_cast<double>(k) * policy.eta;
    const double b = std::min(horizon, static_cast<double>(k + 1) * policy.eta);
    if (b <= a) break;
    samples.emplace_back(a, b);
    spans.emplace_back(b - a, f.lipschitz_x);
    if (b < horizon) boundaries.push_back(b);
  }
  double shortest = std::min(policy.eta, horizon);
  if (f.lipschitz_x > 0.0) shortest = std::min(shortest, 0.5 / f.lipschitz_x);
  const double h0 = shortest / static_cast<double>(std::max<std::size_t>(1, opts.initial_steps_per_window));
  const double coupling = policy.lipschitz ? product_up(f.lipschitz_u, *policy.lipschitz) : 0.0;

  auto sol = refine(f.dim, f.state_box, eps, h0, spans, opts, [&](Integrator& in) {
    in.start(0.0, x0);
    for (const auto& [a, b] : samples) {
      const Vec u = policy.kappa(in.y);
      if (u.size() != f.control_dim) throw ArgumentError("sample_hold_trajectory: policy returned wrong control size");
      const FieldFn held = [&f, u](std::span<const double> x, double t, std::span<double> out) {
        f.field(x, u, t, out);
      };
      in.run(held, f.lipschitz_x, f.t_modulus, a, b, product_up(coupling, in.e), &u);
    }
  });
  sol.validity = validity_domain(0.0, horizon, boundaries);
  return sol;
}

void write_trajectory_csv(std::ostream& os, const ExtendedSolution& sol) {
  os << "t";
  for (std::size_t i = 0; i < sol.dim; ++i) os << ",x" << i + 1;
  const std::size_t m = sol.controls.empty() ? 0 : sol.controls.front().size();
  for (std::size_t i = 0; i < m; ++i) os << ",u" << i + 1;
  os << ",error\n";
  const auto old = os.precision(17);
  for (std::size_t k = 0; k < sol.times.size(); ++k) {
    os << sol.times[k];
    for (double v : sol.values[k]) os << ',' << v;
    if (m)
      for (double v : sol.controls[k]) os << ',' << v;
    os << ',' << sol.node_errors[k] << '\n';
  }
  os.precision(old);
}

}  // namespace certctl::traj
