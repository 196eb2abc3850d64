#include "certctl/stability.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace certctl::stability {

namespace {

const Modulus& require(const std::optional<Modulus>& m, const char* what) {
  if (!m) throw ContractError(std::string("missing modulus for ") + what);
  return *m;
}

CertifiedReal rounded(double v) { return CertifiedReal(v, 4.0 * ulp_of(v)); }

// Largest half-gap between consecutive time samples.
double time_gap(Vec& ts) {
  if (ts.empty()) throw ArgumentError("stability: need at least one time sample");
  std::sort(ts.begin(), ts.end());
  double g = 0.0;
  for (std::size_t i = 1; i < ts.size(); ++i) g = std::max(g, up((ts[i] - ts[i - 1]) / 2.0));
  return g;
}

double exemption_radius(const Box& domain, const CheckOptions& opts) {
  return opts.exemption > 0.0 ? opts.exemption : 0.05 * domain.inscribed_radius_at_origin();
}

struct NodeEval {
  Status status = Status::certified;
  double score = INFINITY;  // margin.lo - slack
  CertifiedReal margin;
  double slack = 0.0;
  double time = 0.0;
  bool uncovered = false;
};

// Shared cell scan: margin(x, t) must be non-negative on every cell.
CheckResult scan_cells(const FiniteMesh& mesh, const Vec& ts, double exemption, const std::string& condition,
                       const std::function<std::pair<CertifiedReal, double>(std::span<const double>, double)>& eval) {
  std::vector<NodeEval> nodes(mesh.size());
  parallel_for(mesh.size(), [&](std::size_t i) {
    const auto c = mesh.point(i);
    const bool exempt = norm(c) <= exemption;
    NodeEval& ne = nodes[i];
    for (double t : ts) {
      const auto [m, slack] = eval(c, t);
      if (m.hi() < 0.0) {
        ne.status = Status::counterexample;
        ne.margin = m;
        ne.slack = slack;
        ne.time = t;
        ne.score = -INFINITY;
        return;
      }
      if (exempt) continue;
      const double score = m.lo() - slack;
      if (score < ne.score) {
        ne.score = score;
        ne.margin = m;
        ne.slack = slack;
        ne.time = t;
      }
      if (!(score > 0.0)) ne.uncovered = true;
    }
  });
  CheckResult res;
  res.condition = condition;
  double worst = INFINITY;
  bool have_worst = false;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& ne = nodes[i];
    if (ne.status == Status::counterexample) {
      res.status = Status::counterexample;
      res.margin = ne.margin;
      res.slack = ne.slack;
      res.point = mesh.point_vec(i);
      res.time = ne.time;
      return res;
    }
    if (ne.uncovered) {
      res.status = Status::undecided;
      res.undecided_radius = std::max(res.undecided_radius, up(norm(mesh.point(i)) + mesh.resolution()));
    }
    if (ne.score < worst) {
      worst = ne.score;
      have_worst = true;
      res.margin = ne.margin;
      res.slack = ne.slack;
      res.point = mesh.point_vec(i);
      res.time = ne.time;
    }
  }
  if (!have_worst) res.margin = CertifiedReal(0.0);
  return res;
}

double norm_up(std::span<const double> v) {
  return up(norm(v) * (1.0 + 4.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(v.size())));
}

double var(const Modulus& m, double t, std::span<const double> c, double r) { return m.variation(t, c, r); }

}  // namespace

const char* to_string(Status s) {
  switch (s) {
    case Status::certified: return "certified";
    case Status::counterexample: return "counterexample";
    default: return "undecided";
  }
}

double RadialPolynomial::operator()(std::span<const double> x) const {
  const double r = norm(x);
  double v = 0.0;
  for (std::size_t k = coeffs.size(); k-- > 0;) v = v * r + coeffs[k];
  return v;
}

Modulus RadialPolynomial::modulus() const {
  const Vec c = coeffs;
  return Modulus::local_lipschitz([c](std::span<const double> center, double r) {
    const double rr = up(norm(center) + r);
    double l = 0.0, p = 1.0;
    for (std::size_t k = 1; k < c.size(); ++k) {
      l = up(l + product_up(static_cast<double>(k) * std::abs(c[k]), p));
      p = product_up(p, rr);
    }
    return l;
  });
}

StrictIncreaseWitness RadialPolynomial::witness() const {
  const RadialPolynomial w = *this;
  return [w](std::span<const double> x, std::span<const double> y) {
    const double d = w(y) - w(x);
    return d > 0.0 ? down(d / 2.0) : std::numeric_limits<double>::denorm_min();
  };
}

PositiveDefinite RadialPolynomial::positive_definite() const {
  const RadialPolynomial w = *this;
  return {[w](std::span<const double> x) { return w(x); }, modulus(), witness()};
}

CheckResult check_sandwich(const LyapunovData& data, double eps, const Vec& t_samples, const CheckOptions& opts) {
  if (!data.V) throw ArgumentError("check_sandwich: missing V");
  const auto& vx = require(data.V_x_modulus, "V in x");
  const auto& vt = require(data.V_t_modulus, "V in t");
  const auto& m1 = require(data.w1.modulus, "w1");
  const auto& m2 = require(data.w2.modulus, "w2");
  Vec ts = t_samples;
  const double tau = time_gap(ts);
  const auto mesh = build_mesh(data.domain, eps);
  const double ex = exemption_radius(data.domain, opts);
  CheckResult lower = scan_cells(mesh, ts, ex, "w1(x) <= V(x,t)", [&](std::span<const double> c, double t) {
    const CertifiedReal m = data.V(c, t) - rounded(data.w1.w(c));
    const double slack = up(up(var(vx, eps, c, eps) + var(vt, tau, c, eps)) + var(m1, eps, c, eps));
    return std::pair{m, slack};
  });
  if (lower.status == Status::counterexample) return lower;
  CheckResult upper = scan_cells(mesh, ts, ex, "V(x,t) <= w2(x)", [&](std::span<const double> c, double t) {
    const CertifiedReal m = rounded(data.w2.w(c)) - data.V(c, t);
    const double slack = up(up(var(vx, eps, c, eps) + var(vt, tau, c, eps)) + var(m2, eps, c, eps));
    return std::pair{m, slack};
  });
  if (upper.status == Status::counterexample) return upper;
  if (upper.status == Status::undecided && lower.status != Status::undecided) return upper;
  if (lower.status == Status::undecided) return lower;
  return lower.margin.lo() - lower.slack <= upper.margin.lo() - upper.slack ? lower : upper;
}

CheckResult check_decay(const LyapunovData& data, double eps, const Vec& t_samples, const CheckOptions& opts) {
  if (!data.Vdot) throw ArgumentError("check_decay: missing Vdot");
  const auto& dx = require(data.Vdot_x_modulus, "Vdot in x");
  const auto& dt = require(data.Vdot_t_modulus, "Vdot in t");
  const auto& m3 = require(data.w3.modulus, "w3");
  Vec ts = t_samples;
  const double tau = time_gap(ts);
  const auto mesh = build_mesh(data.domain, eps);
  return scan_cells(mesh, ts, exemption_radius(data.domain, opts), "Vdot(x,t) <= -w3(x)",
                    [&](std::span<const double> c, double t) {
                      const CertifiedReal m = -data.Vdot(c, t) - rounded(data.w3.w(c));
                      const double slack = up(up(var(dx, eps, c, eps) + var(dt, tau, c, eps)) + var(m3, eps, c, eps));
                      return std::pair{m, slack};
                    });
}

CheckResult check_linear_growth(const PositiveDefinite& w2, double xi, const FiniteMesh& mesh) {
  if (!(xi > 0.0)) throw ArgumentError("check_linear_growth: xi must be positive");
  const std::size_t n = mesh.size();
  Vec norms(n), g(n), rad(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = norm(mesh.point(i));
    const double w = w2.w(mesh.point(i));
    g[i] = w - xi * norms[i];
    rad[i] = up(4.0 * ulp_of(w) + xi * static_cast<double>(mesh.dim() + 2) * ulp_of(norms[i]) + ulp_of(g[i]));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norms[a] < norms[b]; });

  CheckResult res;
  res.condition = "w2(x) - w2(y) >= xi (|x| - |y|)";
  double best = -INFINITY, best_rad = 0.0;
  std::size_t best_idx = 0;
  double worst = INFINITY;
  bool any = false;
  std::size_t k = 0;
  while (k < n) {
    std::size_t end = k;
    while (end < n && norms[order[end]] == norms[order[k]]) ++end;
    if (std::isfinite(best)) {
      for (std::size_t q = k; q < end; ++q) {
        const std::size_t i = order[q];
        const double gap = g[i] - best;
        const double r = up(rad[i] + best_rad);
        if (gap < -r) {
          res.status = Status::counterexample;
          res.margin = CertifiedReal(gap, r);
          res.point = mesh.point_vec(i);
          res.other = mesh.point_vec(best_idx);
          return res;
        }
        if (gap <= r) res.status = Status::undecided;
        if (!any || gap - r < worst) {
          worst = gap - r;
          any = true;
          res.margin = CertifiedReal(gap, r);
          res.point = mesh.point_vec(i);
          res.other = mesh.point_vec(best_idx);
        }
      }
    }
    for (std::size_t q = k; q < end; ++q)
      if (g[order[q]] > best) {
        best = g[order[q]];
        best_rad = rad[order[q]];
        best_idx = order[q];
      }
    k = end;
  }
  return res;
}

CheckResult check_positive_definite(const PositiveDefinite& w, const std::string& name, const FiniteMesh& mesh,
                                    const CheckOptions& opts) {
  if (!w.w) throw ArgumentError("stability: missing " + name);
  if (!w.nu) throw ContractError("missing strict-increase witness for " + name);
  CheckResult res;
  res.condition = name + " positive definite and strictly increasing in norm";
  const Vec zero(mesh.dim(), 0.0);
  if (w.w(zero) != 0.0) {
    res.status = Status::counterexample;
    res.margin = CertifiedReal(w.w(zero));
    res.point = zero;
    return res;
  }
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const auto x = mesh.point(i);
    if (norm(x) > 0.0 && !(w.w(x) > 0.0)) {
      res.status = Status::counterexample;
      res.margin = CertifiedReal(w.w(x));
      res.point = mesh.point_vec(i);
      return res;
    }
  }
  if (mesh.size() < 2) return res;
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick(0, mesh.size() - 1);
  for (std::size_t p = 0; p < opts.witness_pairs; ++p) {
    std::size_t a = pick(rng), b = pick(rng);
    if (norm(mesh.point(a)) > norm(mesh.point(b))) std::swap(a, b);
    if (!(norm(mesh.point(a)) < norm(mesh.point(b)))) continue;
    const double nu = w.nu(mesh.point(a), mesh.point(b));
    const double gap = w.w(mesh.point(b)) - w.w(mesh.point(a));
    if (!(nu > 0.0) || !(gap > nu)) {
      res.status = Status::counterexample;
      res.margin = CertifiedReal(gap - nu);
      res.point = mesh.point_vec(a);
      res.other = mesh.point_vec(b);
      return res;
    }
  }
  return res;
}

StabilityCertificate certify(const LyapunovData& data, double eps, const Vec& t_samples, const CheckOptions& opts) {
  if (!(eps > 0.0)) throw ArgumentError("certify: eps must be positive");
  if (data.domain.dim() != data.dim || data.dim == 0) throw ArgumentError("certify: domain dimension mismatch");
  const double rho = data.domain.inscribed_radius_at_origin();
  if (!(rho > 0.0)) throw ContractError("certify: the domain must contain a ball around the origin");
  StabilityCertificate cert;
  cert.mesh_eps = eps;
  cert.exemption = exemption_radius(data.domain, opts);
  Vec ts = t_samples;
  time_gap(ts);
  cert.t_min = ts.front();
  cert.t_max = ts.back();

  const auto mesh = build_mesh(data.domain, eps);
  cert.checks.push_back(check_positive_definite(data.w1, "w1", mesh, opts));
  cert.checks.push_back(check_positive_definite(data.w2, "w2", mesh, opts));
  cert.checks.push_back(check_positive_definite(data.w3, "w3", mesh, opts));
  cert.checks.push_back(check_sandwich(data, eps, ts, opts));
  cert.checks.push_back(check_decay(data, eps, ts, opts));
  cert.checks.push_back(check_linear_growth(data.w2, data.xi, mesh));

  cert.verdict = Status::certified;
  for (const auto& c : cert.checks)
    if (c.status == Status::counterexample) {
      cert.verdict = Status::counterexample;
      cert.failing = c;
      return cert;
    }
  for (const auto& c : cert.checks)
    if (c.status == Status::undecided) {
      cert.verdict = Status::undecided;
      cert.failing = c;
      cert.suggested_eps = eps / 4.0;
      return cert;
    }

  // X0 = {w2 <= min of w1 on the sphere of the inscribed radius}.
  const Vec origin(data.dim, 0.0);
  const auto sphere = build_sphere_mesh(origin, rho, eps);
  const auto& m1 = *data.w1.modulus;
  const auto& m2 = *data.w2.modulus;
  double threshold = INFINITY;
  for (std::size_t i = 0; i < sphere.size(); ++i) {
    const auto y = sphere.point(i);
    threshold = std::min(threshold, down(data.w1.w(y) - 4.0 * ulp_of(data.w1.w(y)) - var(m1, eps, y, eps)));
  }
  cert.x0_threshold = threshold;
  double bad = rho + 2.0 * eps;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const auto x = mesh.point(i);
    if (up(data.w2.w(x) + var(m2, eps, x, eps)) > threshold) bad = std::min(bad, norm(x));
  }
  cert.x0_radius = std::clamp(down(bad - 2.0 * eps), 0.0, rho);
  return cert;
}

void CLFProblem::validate() const {
  if (dim == 0 || state_box.dim() != dim) throw ArgumentError("CLFProblem: state box dimension mismatch");
  if (control_dim == 0 || control_box.dim() != control_dim)
    throw ArgumentError("CLFProblem: control box dimension mismatch");
  if (!f || !V || !grad_V) throw ArgumentError("CLFProblem: dynamics, V and grad V are required");
  if (!(r > 0.0 && r < R)) throw ArgumentError("CLFProblem: need 0 < r < R");
  if (R > state_box.inscribed_radius_at_origin())
    throw ArgumentError("CLFProblem: R exceeds the inscribed radius of the state box");
}

traj::ControlledRHS CLFProblem::controlled_rhs() const {
  traj::ControlledRHS c;
  c.dim = dim;
  c.control_dim = control_dim;
  c.state_box = state_box;
  c.field = f;
  c.lipschitz_x = lipschitz_x;
  c.lipschitz_u = lipschitz_u;
  c.t_modulus = Modulus::lipschitz(0.0);
  return c;
}

FeedbackResult clf_feedback(const CLFProblem& p, std::span<const double> x, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("clf_feedback: eps must be positive");
  if (x.size() != p.dim) throw ArgumentError("clf_feedback: state has wrong dimension");
  const Vec g = p.grad_V(x);
  const double lg = product_up(norm_up(g), p.lipschitz_u);
  const double delta = lg > 0.0 ? eps / lg : INFINITY;
  const double res = std::isfinite(delta) ? down(delta) : p.control_box.diameter() + 1.0;
  const auto mesh = build_mesh(p.control_box, res);
  FeedbackResult out;
  out.mesh_size = mesh.size();
  Vec fx(p.dim);
  double best = INFINITY, best_mag = 0.0;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    p.f(x, mesh.point(i), 0.0, fx);
    double v = 0.0, mag = 0.0;
    for (std::size_t k = 0; k < p.dim; ++k) {
      v += g[k] * fx[k];
      mag += std::abs(g[k] * fx[k]);
    }
    if (v < best) {
      best = v;
      best_mag = mag;
      out.index = i;
    }
  }
  out.u = mesh.point_vec(out.index);
  out.value = CertifiedReal(best, up(static_cast<double>(p.dim + 2) * std::numeric_limits<double>::epsilon() *
                                     best_mag) + ulp_of(best));
  return out;
}

traj::ExtendedSolution simulate_closed_loop(const CLFProblem& p, double eta, double eps, const Vec& x0,
                                            double horizon, double sim_eps) {
  p.validate();
  traj::SampleHoldPolicy policy{[&p, eps](std::span<const double> x) { return clf_feedback(p, x, eps).u; }, eta,
                                std::nullopt};
  return traj::sample_hold_trajectory(p.controlled_rhs(), policy, x0, horizon, sim_eps);
}

namespace {

struct Candidate {
  bool ok = true;
  CertifiedReal margin;
  Vec worst;
};

}  // namespace

SamplingResult find_sampling_time(const CLFProblem& p, double eta_max, double eps, const SamplingOptions& opts) {
  p.validate();
  if (!(eta_max > 0.0)) throw ArgumentError("find_sampling_time: eta_max must be positive");
  if (!(eps > 0.0)) throw ArgumentError("find_sampling_time: eps must be positive");
  const Modulus& vmod = require(p.V_modulus, "V");

  // Annulus r <= |x| <= R on the state mesh.
  Vec lo = p.state_box.lo, hi = p.state_box.hi;
  for (std::size_t i = 0; i < p.dim; ++i) {
    lo[i] = std::max(lo[i], -p.R);
    hi[i] = std::min(hi[i], p.R);
  }
  const auto mesh = build_mesh(Box(lo, hi), opts.mesh_eps > 0.0 ? opts.mesh_eps : p.r / 40.0);
  const double cell = mesh.resolution();
  // Every cell meeting the annulus.
  std::vector<Vec> nodes;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double nx = norm(mesh.point(i));
    if (nx + cell >= p.r && nx <= p.R) nodes.push_back(mesh.point_vec(i));
  }
  SamplingResult res;
  res.nodes = nodes.size();
  if (nodes.empty()) throw ArgumentError("find_sampling_time: annulus mesh is empty; refine mesh_eps");

  std::vector<FeedbackResult> fb(nodes.size());
  Vec v0(nodes.size());
  parallel_for(nodes.size(), [&](std::size_t i) {
    fb[i] = clf_feedback(p, nodes[i], eps);
    v0[i] = p.V(nodes[i]);
  });
  const auto rhs = p.controlled_rhs();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (norm(nodes[i]) >= p.r && down(fb[i].value.lo() - eps) >= 0.0) {
      res.diagnostic = "CLF inadequate: inf_u <grad V, f> >= 0 at a node of norm " + std::to_string(norm(nodes[i]));
      res.worst_point = nodes[i];
      return res;
    }
  }

  auto evaluate = [&](double eta) {
    std::vector<Candidate> per(nodes.size());
    parallel_for(nodes.size(), [&](std::size_t i) {
      traj::SampleHoldPolicy hold{[u = fb[i].u](std::span<const double>) { return u; }, eta, std::nullopt};
      try {
        const auto sol = traj::sample_hold_trajectory(rhs, hold, nodes[i], eta, opts.sim_eps);
        const Vec& y = sol.final_state();
        // Cell points start within `cell` of the node and end within
        // e + exp(L eta) cell of the computed endpoint.
        const double e = up(sol.error_bound.hi() + product_up(std::exp(p.lipschitz_x * eta) * 1.0000001, cell));
        const double v1 = up(p.V(y) + 4.0 * ulp_of(p.V(y)) + vmod.variation(e, y, e));
        double need = product_up(eta, eps);
        if (p.w3) need = up(need + product_up(eta, p.w3(nodes[i])));
        const double lo0 = down(v0[i] - 4.0 * ulp_of(v0[i]) - vmod.variation(cell, nodes[i], cell));
        per[i].margin = CertifiedReal::from_interval(down(down(lo0 - v1) - need), up(up(v0[i] - p.V(y)) - need));
        per[i].ok = per[i].margin.lo() > 0.0;
      } catch (const DomainExitError&) {
        per[i].ok = false;
        per[i].margin = CertifiedReal(std::numeric_limits<double>::lowest());
      }
      per[i].worst = nodes[i];
    });
    Candidate out;
    for (std::size_t i = 0; i < per.size(); ++i) {
      if (!per[i].ok) out.ok = false;
      if (i == 0 || per[i].margin.lo() < out.margin.lo()) {
        out.margin = per[i].margin;
        out.worst = per[i].worst;
      }
    }
    ++res.candidates;
    return out;
  };

  double eta = eta_max, good = 0.0, bad = 0.0;
  Candidate best;
  while (eta >= opts.eta_floor) {
    const Candidate c = evaluate(eta);
    if (c.ok) {
      good = eta;
      best = c;
      break;
    }
    bad = eta;
    eta /= 2.0;
  }
  if (good == 0.0) {
    // Failure diagnostic: certified CLF inadequacy versus optimizer error.
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (up(fb[i].value.hi() + eps) >= 0.0) {
        res.diagnostic = "optimizer error eps = " + std::to_string(eps) +
                         " exceeds the CLF decay margin at a node of norm " + std::to_string(norm(nodes[i]));
        res.worst_point = nodes[i];
        return res;
      }
    }
    res.diagnostic = "no sampling time down to " + std::to_string(opts.eta_floor) + " certifies decrease";
    return res;
  }
  if (bad > 0.0) {
    for (std::size_t s = 0; s < opts.bisection_steps && bad - good > opts.eta_floor; ++s) {
      const double mid = 0.5 * (good + bad);
      const Candidate c = evaluate(mid);
      if (c.ok) {
        good = mid;
        best = c;
      } else {
        bad = mid;
      }
    }
  }
  res.ok = true;
  res.eta = good;
  res.margin = best.margin;
  res.worst_point = best.worst;

  if (opts.verify_practical) {
    // Every interval lowers V by at least the margin, so the ball is reached
    // within (max V) / margin intervals.
    const double vmax = *std::max_element(v0.begin(), v0.end());
    const double steps = std::min(1e4, std::ceil(vmax / std::max(best.margin.lo(), 1e-300)) + 1.0);
    res.practical_horizon = steps * good;
    bool all = true;
    std::vector<char> reached(nodes.size(), 0);
    parallel_for(nodes.size(), [&](std::size_t i) {
      Vec x = nodes[i];
      double slack = 0.0;
      for (double k = 0; k < steps; ++k) {
        const auto u = clf_feedback(p, x, eps).u;
        traj::SampleHoldPolicy hold{[u](std::span<const double>) { return u; }, good, std::nullopt};
        try {
          const auto sol = traj::sample_hold_trajectory(rhs, hold, x, good, opts.sim_eps);
          x = sol.final_state();
          slack = up(slack + sol.error_bound.hi());
        } catch (const Error&) {
          return;
        }
        if (norm(x) <= p.r + slack) {
          reached[i] = 1;
          return;
        }
      }
    });
    for (char c : reached) all = all && c;
    res.practical_ok = all;
  }
  return res;
}

}  // namespace certctl::stability
