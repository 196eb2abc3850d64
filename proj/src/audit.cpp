#include "certctl/audit.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <chrono>
#include <map>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "certctl/builders.hpp"
#include "certctl/eigen.hpp"
#include "certctl/errors.hpp"
#include "certctl/evt.hpp"

namespace certctl::audit {

using nlohmann::json;
namespace fm = forms;

Sizes Sizes::quick() {
  Sizes s;
  s.evt_functionals = 10;
  s.danskin_points = 3;
  s.selector_svfs = 4;
  s.selector_points = 200;
  s.eigen_matrices = 100;
  s.hurwitz_matrices = 50;
  s.gronwall_systems = 10;
  s.lyapunov_simulations = 5;
  return s;
}

namespace {

// Records the first failure and times the property.
class Recorder {
 public:
  explicit Recorder(std::string name) : start_(std::chrono::steady_clock::now()) {
    r_.name = std::move(name);
    r_.pass = true;
  }
  void require(bool ok, const std::string& what) {
    if (ok || !r_.pass) {
      if (!ok) ++failures_;
      return;
    }
    r_.pass = false;
    r_.detail = what;
    ++failures_;
  }
  json& numeric() { return r_.numeric; }
  PropertyResult finish() {
    r_.numeric["failures"] = failures_;
    r_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return std::move(r_);
  }
  // Runs a block, turning library errors into property failures.
  template <class F>
  void guard(const std::string& what, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      require(false, what + ": " + e.what());
    }
  }

 private:
  PropertyResult r_;
  std::size_t failures_ = 0;
  std::chrono::steady_clock::time_point start_;
};

std::string str(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

fm::FormPtr parse(const char* text) { return fm::parse(json::parse(text)); }

// ---------------------------------------------------------------------------
// evt

struct EvtInstance {
  evt::Functional j;
  double infimum = 0.0;
  std::string kind;
};

EvtInstance random_functional(std::mt19937_64& rng, double l, double k) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int kind = static_cast<int>(rng() % 3);
  EvtInstance inst;
  if (kind == 0) {
    // |kappa(x0) - c| + d; infimum d at the constant c.
    const double x0 = unit(rng), c = k * (2.0 * unit(rng) - 1.0), d = unit(rng);
    inst.j.evaluate = [=](const evt::PiecewisePolicy& p) {
      const double e = std::abs(p(Vec{x0})[0] - c);
      return CertifiedReal(e + d, 2.0 * ulp_of(e + d));
    };
    inst.j.modulus = Modulus::lipschitz(1.0);
    inst.infimum = d;
    inst.kind = "point";
  } else if (kind == 1) {
    // max_i |kappa(x_i) - c_i| with c on an admissible line; infimum 0.
    const double x1 = unit(rng), x2 = unit(rng);
    const double slope = l * (2.0 * unit(rng) - 1.0);
    const double b = (k - std::abs(slope)) * (2.0 * unit(rng) - 1.0);
    const double c1 = b + slope * x1, c2 = b + slope * x2;
    inst.j.evaluate = [=](const evt::PiecewisePolicy& p) {
      const double e = std::max(std::abs(p(Vec{x1})[0] - c1), std::abs(p(Vec{x2})[0] - c2));
      return CertifiedReal(e, 2.0 * ulp_of(e));
    };
    inst.j.modulus = Modulus::lipschitz(1.0);
    inst.kind = "two-point";
  } else {
    // mean over 16 midpoints of |kappa(x) - a x - b|; infimum 0.
    const double a = l * (2.0 * unit(rng) - 1.0);
    const double b = (k - std::abs(a)) * (2.0 * unit(rng) - 1.0);
    inst.j.evaluate = [=](const evt::PiecewisePolicy& p) {
      double s = 0.0;
      for (int i = 0; i < 16; ++i) {
        const double x = (i + 0.5) / 16.0;
        s += std::abs(p(Vec{x})[0] - a * x - b);
      }
      return CertifiedReal(s / 16.0, 64.0 * ulp_of(s + 2.0 * k));
    };
    inst.j.modulus = Modulus::lipschitz(1.0);
    inst.kind = "line-tracking";
  }
  return inst;
}

}  // namespace

PropertyResult evt_guarantee(std::uint64_t seed, const Sizes& s) {
  Recorder rec("evt_guarantee");
  std::mt19937_64 rng(seed);
  evt::PolicyClass cls;
  cls.domain = Hypercube({0.5}, 1.0);
  cls.lipschitz = 0.5;
  cls.bound = 1.0;
  const double eps = 0.5;
  double worst_gap = -INFINITY;
  std::size_t total_net = 0;
  json values = json::array();
  for (std::size_t t = 0; t < s.evt_functionals; ++t) {
    const auto inst = random_functional(rng, cls.lipschitz, cls.bound);
    rec.guard("functional " + std::to_string(t), [&] {
      const auto r = evt::epsilon_minimize(inst.j, cls, eps);
      // Certified: J[kappa] <= value.hi(), so value.hi() - eps <= inf proves the guarantee.
      const double gap = r.value.hi() - eps - inst.infimum;
      worst_gap = std::max(worst_gap, gap);
      rec.require(gap <= 0.0, "functional " + std::to_string(t) + " (" + inst.kind + "): J - eps exceeds inf by " +
                                  str(gap));
      // Exhaustive net evaluation.
      const auto net = evt::enumerate_policy_net(cls, r.net_precision);
      std::size_t best = 0;
      double best_v = INFINITY;
      for (std::size_t i = 0; i < net.size(); ++i) {
        const double v = inst.j.evaluate(net[i]).value;
        if (v < best_v) {
          best_v = v;
          best = i;
        }
      }
      rec.require(net.size() == r.net_size && best == r.index && best_v == r.value.value,
                  "functional " + std::to_string(t) + ": returned policy is not the net minimum");
      total_net += net.size();
      values.push_back({inst.kind, r.value.value, r.value.radius, r.index});
    });
  }
  rec.numeric()["worst_gap"] = worst_gap;
  rec.numeric()["net_members_evaluated"] = total_net;
  rec.numeric()["values"] = values;
  return rec.finish();
}

// ---------------------------------------------------------------------------
// danskin

PropertyResult danskin_sandwich(std::uint64_t seed, const Sizes& s) {
  Recorder rec("danskin_sandwich");
  struct Objective {
    const char* name;
    const char* phi;
    Box theta;
  };
  const std::vector<Objective> objectives{
      {"tent", R"({"form":"product","factors":[{"form":"linear","coeffs":[1]},{"form":"polynomial","var":1,"coeffs":[0,1]}]})",
       Box({-1.0}, {1.0})},
      {"negative_square",
       R"({"form":"composition","outer":{"form":"polynomial","coeffs":[0,0,-1]},"inner":{"form":"linear","coeffs":[-1,1]}})",
       Box({-2.0}, {2.0})},
      {"sine_shift", R"({"form":"sum","terms":[{"form":"trig","var":1},{"form":"linear","coeffs":[1]}]})",
       Box({0.0}, {std::numbers::pi})},
      {"cosine_quadratic", R"({"form":"sum","terms":[
          {"form":"product","factors":[{"form":"trig","fn":"cos","var":1},{"form":"linear","coeffs":[1]}]},
          {"form":"product","factors":[{"form":"polynomial","var":2,"coeffs":[0,0.1]},{"form":"polynomial","coeffs":[0,0,1]}]}]})",
       Box({0.0, -1.0}, {std::numbers::pi, 1.0})},
      {"constant", "1.5", Box({-1.0}, {1.0})},
  };
  const Box x_box({-2.0}, {2.0});
  const std::vector<double> hs{1e-1, 1e-2, 1e-3, 1e-4};
  const std::vector<double> deltas{0.05, 0.1, 0.2};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(-1.0, 1.0), uv(-2.0, 2.0);
  double worst_spread_excess = -INFINITY;
  json rows = json::array();
  for (const auto& o : objectives) {
    rec.guard(o.name, [&] {
      const auto obj = builders::danskin_objective(parse(o.phi), x_box, o.theta);
      const danskin::ThetaDomain theta{o.theta};
      std::vector<std::tuple<double, double, double>> cases;
      if (std::string(o.name) == "tent") cases.emplace_back(0.0, 1.0, 0.05);
      for (std::size_t i = 0; i < s.danskin_points; ++i)
        cases.emplace_back(ux(rng), uv(rng), deltas[rng() % deltas.size()]);
      for (const auto& [x, v, delta] : cases) {
        const auto rep = danskin::finite_difference_audit(obj, theta, Vec{x}, Vec{v}, delta, hs);
        const std::string at = std::string(o.name) + " at x=" + str(x) + ", v=" + str(v);
        rec.require(rep.sandwich_ok, at + ": difference quotient outside the certified bracket");
        rec.require(rep.derivative.spread <= rep.spread_bound, at + ": member spread exceeds delta + slack");
        worst_spread_excess = std::max(worst_spread_excess, rep.derivative.spread - rep.spread_bound);
        rows.push_back({o.name, x, v, delta, rep.derivative.value.value, rep.derivative.spread, rep.spread_bound});
      }
    });
  }
  rec.numeric()["worst_spread_minus_bound"] = worst_spread_excess;
  rec.numeric()["cases"] = rows;
  return rec.finish();
}

// ---------------------------------------------------------------------------
// selector

PropertyResult selector_guarantee(std::uint64_t seed, const Sizes& s) {
  Recorder rec("selector_guarantee");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto lin = [](double a, double b) { return fm::linear({a}, b); };
  json rows = json::array();
  for (std::size_t t = 0; t < s.selector_svfs; ++t) {
    selector::RegularSVF f;
    f.lo = 0.0;
    f.hi = 1.0;
    const selector::Block whole{{0.0}, {1.0}};
    const int kind = static_cast<int>(t % 3);
    std::string name;
    if (kind == 0) {
      const double a = 0.9 * unit(rng), w = 0.1 * unit(rng);
      f.blocks.push_back({whole, {builders::chunk(fm::constant(a), fm::constant(a + w), 1)}});
      name = "constant";
    } else if (kind == 1) {
      const double slope = 0.5 * (2.0 * unit(rng) - 1.0);
      const double b = 0.5 - 0.5 * slope + 0.2 * (unit(rng) - 0.5), w = 0.05 * unit(rng);
      f.blocks.push_back({whole, {builders::chunk(lin(slope, b), lin(slope, b + w), 1)}});
      name = "linear-chunk";
    } else {
      const double a = 0.3 * unit(rng), b = 0.6 + 0.3 * unit(rng);
      f.blocks.push_back({whole,
                          {builders::chunk(fm::constant(a), lin(0.1, a), 1),
                           builders::chunk(lin(-0.1, b + 0.1), fm::constant(b + 0.1), 1)}});
      name = "two-chunk";
    }
    const double eps = (t % 2 == 0) ? 0.125 : 0.0625;
    rec.guard("svf " + std::to_string(t), [&] {
      const selector::Selector sel = selector::extract_selector(f, eps);
      const std::string at = "svf " + std::to_string(t) + " (" + name + ")";
      // Distance guarantee off the exception set.
      std::size_t tested = 0;
      double worst = 0.0;
      for (std::size_t i = 0; i < s.selector_points; ++i) {
        const Vec x{unit(rng)};
        if (sel.excluded(x)) continue;
        ++tested;
        const auto v = sel(x);
        if (!v) {
          rec.require(false, at + ": selector undefined at an admissible point");
          continue;
        }
        const double d = selector::interval_distance(*v, f.at(x));
        worst = std::max(worst, d);
        rec.require(d <= sel.epsilon, at + ": distance " + str(d) + " exceeds eps at x=" + str(x[0]));
      }
      rec.require(tested > 0, at + ": every sample fell in the exception set");
      const auto exception = sel.domain.exception(sel.exception_volume);
      const double vol = selector::volume(exception).hi();
      const bool within = exception.finite()
                              ? selector::exact_volume(exception) <= selector::Rational(sel.exception_volume)
                              : vol <= sel.exception_volume;
      rec.require(within, at + ": exception volume exceeds the budget");
      // Exact properness of each stage's pieces and of their union.
      const std::size_t cells = sel.approx.cells.size();
      selector::Rational union_volume = 0;
      for (std::size_t k = 0; k < sel.stage_index.size(); ++k) {
        std::map<std::size_t, selector::GeneralizedBlock> q;
        for (std::size_t c = 0; c < cells; ++c) q[sel.stage_index[k][c]].blocks.push_back(sel.approx.cells[c]);
        selector::GeneralizedBlock all;
        for (auto& [i, gb] : q) {
          rec.require(selector::is_proper(gb), at + ": stage piece is not proper");
          all.blocks.insert(all.blocks.end(), gb.blocks.begin(), gb.blocks.end());
        }
        rec.require(selector::is_proper(all), at + ": stage pieces overlap");
        union_volume = selector::exact_volume(all);
      }
      rec.require(union_volume == whole.exact_volume(), at + ": pieces do not tile the domain");
      rows.push_back({name, eps, sel.pieces.size(), tested, worst, vol});
    });
  }
  rec.numeric()["svfs"] = rows;
  return rec.finish();
}

// ---------------------------------------------------------------------------
// eigen

namespace {

using Quad = boost::multiprecision::cpp_bin_float_quad;

double quad_residual(const eigen::ComplexMatrix& a, const eigen::CVec& v, eigen::Complex lambda) {
  const std::size_t n = a.size();
  Quad s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Quad re = -Quad(lambda.real()) * v[i].real() + Quad(lambda.imag()) * v[i].imag();
    Quad im = -Quad(lambda.real()) * v[i].imag() - Quad(lambda.imag()) * v[i].real();
    for (std::size_t j = 0; j < n; ++j) {
      const auto x = a(i, j);
      re += Quad(x.real()) * v[j].real() - Quad(x.imag()) * v[j].imag();
      im += Quad(x.real()) * v[j].imag() + Quad(x.imag()) * v[j].real();
    }
    s += re * re + im * im;
  }
  return static_cast<double>(sqrt(s));
}

}  // namespace

PropertyResult eigen_residuals(std::uint64_t seed, const Sizes& s) {
  Recorder rec("eigen_residuals");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_residual = 0.0, min_gram = INFINITY;
  std::size_t pairs = 0;
  for (std::size_t t = 0; t < s.eigen_matrices; ++t) {
    const std::size_t n = 1 + rng() % s.eigen_max_dim;
    std::vector<eigen::Complex> e(n * n);
    for (auto& x : e) x = {u(rng), u(rng)};
    const eigen::ComplexMatrix a(n, e);
    rec.guard("matrix " + std::to_string(t), [&] {
      const auto r = eigen::approx_eigenpairs(a, s.eigen_eps);
      const std::string at = "matrix " + std::to_string(t) + " (n=" + std::to_string(n) + ")";
      rec.require(!r.failed, at + ": no eigenpair reached eps");
      std::vector<eigen::CVec> vs;
      for (const auto& p : r.pairs) {
        const double q = quad_residual(a, p.v, p.lambda);
        worst_residual = std::max(worst_residual, q);
        rec.require(p.residual.hi() <= s.eigen_eps, at + ": certified residual above eps");
        rec.require(q <= s.eigen_eps, at + ": quad-precision residual " + str(q) + " above eps");
        vs.push_back(p.v);
      }
      const double g = eigen::gram_min_eigenvalue(vs);
      min_gram = std::min(min_gram, g);
      rec.require(g >= r.tau, at + ": Gram independence below tau");
      pairs += r.pairs.size();
    });
  }
  // 2x2 real matrices with quarter-integer entries: exact trace and determinant.
  std::size_t agree = 0, boundary = 0;
  for (std::size_t t = 0; t < s.hurwitz_matrices; ++t) {
    std::vector<double> e(4);
    for (auto& x : e) x = static_cast<double>(static_cast<int>(rng() % 17) - 8) / 4.0;
    const double tr = e[0] + e[3], det = e[0] * e[3] - e[1] * e[2];
    eigen::Verdict oracle = eigen::Verdict::undecided;  // max Re = 0
    if (tr < 0.0 && det > 0.0) oracle = eigen::Verdict::stable;
    if (tr > 0.0 || det < 0.0) oracle = eigen::Verdict::unstable;
    if (oracle == eigen::Verdict::undecided) ++boundary;
    rec.guard("hurwitz " + std::to_string(t), [&] {
      const auto v = eigen::hurwitz_verdict(eigen::ComplexMatrix::real(2, e), s.eigen_eps);
      const bool ok = v.verdict == oracle;
      rec.require(ok, "hurwitz " + std::to_string(t) + ": verdict " + eigen::to_string(v.verdict) + ", oracle " +
                          eigen::to_string(oracle));
      if (ok) ++agree;
    });
  }
  rec.numeric()["pairs"] = pairs;
  rec.numeric()["worst_quad_residual"] = worst_residual;
  rec.numeric()["min_gram"] = min_gram;
  rec.numeric()["hurwitz_agree"] = agree;
  rec.numeric()["hurwitz_boundary"] = boundary;
  return rec.finish();
}

// ---------------------------------------------------------------------------
// trajectories

PropertyResult caratheodory_solver(std::uint64_t seed, const Sizes& s) {
  Recorder rec("caratheodory_solver");
  const double eps = s.ode_eps;
  rec.guard("decay", [&] {
    const auto rhs = builders::ode_rhs({fm::linear({-1.0}, 0.0)}, Box({-2.0}, {2.0}), 1.0);
    const auto sol = traj::picard_solve(rhs, {1.0}, 1.0, eps);
    const double err = std::abs(sol.final_state()[0] - std::exp(-1.0));
    rec.require(sol.error_bound.hi() <= eps && err <= eps, "x' = -x: endpoint off exp(-1) by " + str(err));
    rec.numeric()["decay_endpoint"] = sol.final_state()[0];
    rec.numeric()["decay_error_bound"] = sol.error_bound.hi();
    rec.numeric()["decay_steps"] = sol.steps;
  });
  rec.guard("tent", [&] {
    traj::RegularRHS r;
    r.dim = 1;
    r.state_box = Box({-5.0}, {5.0});
    r.blocks.push_back({0.0, 1.0, [](std::span<const double>, double, std::span<double> o) { o[0] = 1.0; }, 0.0, {}});
    r.blocks.push_back({1.0, 2.0, [](std::span<const double>, double, std::span<double> o) { o[0] = -1.0; }, 0.0, {}});
    const auto sol = traj::picard_solve(r, {0.0}, 2.0, eps);
    const double e1 = std::abs(sol.at(1.0)[0] - 1.0), e2 = std::abs(sol.final_state()[0]);
    rec.require(e1 <= eps && e2 <= eps, "tent: endpoints off by " + str(std::max(e1, e2)));
    rec.numeric()["tent_peak"] = sol.at(1.0)[0];
    rec.numeric()["tent_endpoint"] = sol.final_state()[0];
  });
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = -INFINITY;
  const double geps = 1e-4;
  for (std::size_t t = 0; t < s.gronwall_systems; ++t) {
    const double a11 = u(rng), a12 = u(rng), a21 = u(rng), a22 = u(rng), c = u(rng);
    const Vec x0{u(rng), u(rng)}, x1{x0[0] + 0.05 * u(rng), x0[1] + 0.05 * u(rng)};
    rec.guard("gronwall " + std::to_string(t), [&] {
      const auto field = std::vector<fm::FormPtr>{
          fm::sum({fm::linear({a11, a12}, 0.0), fm::trig(false, 1, c, 1.0, 0.0)}), fm::linear({a21, a22}, 0.0)};
      const auto rhs = builders::ode_rhs(field, Box({-50.0, -50.0}, {50.0, 50.0}), 1.0);
      rec.require(rhs.lipschitz_sampled(50, t), "gronwall " + std::to_string(t) + ": Lipschitz constant refuted");
      const auto s0 = traj::picard_solve(rhs, x0, 1.0, geps), s1 = traj::picard_solve(rhs, x1, 1.0, geps);
      const double div = distance(s0.final_state(), s1.final_state());
      const double bound = traj::dependence_modulus(rhs, 1.0).variation(distance(x0, x1)) + 2.0 * geps;
      worst = std::max(worst, div - bound);
      rec.require(div <= bound, "gronwall " + std::to_string(t) + ": divergence exceeds the bound");
    });
  }
  rec.numeric()["gronwall_worst_excess"] = worst;
  return rec.finish();
}

// ---------------------------------------------------------------------------
// stability

PropertyResult lyapunov_certification(std::uint64_t seed, const Sizes& s) {
  Recorder rec("lyapunov_certification");
  const Box domain({-1.0}, {1.0});
  const auto V = fm::polynomial(0, {0, 0, 1});
  const double eps = 1.0 / 512;
  const Vec t0{0.0};
  rec.guard("decay", [&] {
    const auto d =
        builders::lyapunov_data({fm::linear({-1.0}, 0.0)}, domain, V, {0, 0, 0.5}, {0, 2}, {0, 0, 1}, 1.0, 0.0, 0.0);
    const auto cert = stability::certify(d, eps, t0);
    rec.require(cert.verdict == stability::Status::certified,
                std::string("x' = -x: verdict ") + stability::to_string(cert.verdict) + " (" +
                    cert.failing.condition + ")");
    rec.numeric()["x0_threshold"] = cert.x0_threshold;
    rec.numeric()["x0_radius"] = cert.x0_radius;
    if (cert.verdict != stability::Status::certified) return;
    const auto rhs = builders::ode_rhs({fm::linear({-1.0}, 0.0)}, domain, 2.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-cert.x0_radius, cert.x0_radius);
    for (std::size_t i = 0; i < s.lyapunov_simulations; ++i) {
      const double x = u(rng);
      rec.require(2.0 * std::abs(x) <= cert.x0_threshold, "sample outside X0");
      const auto sol = traj::picard_solve(rhs, {x}, 2.0, 1e-4);
      for (std::size_t k = 1; k < sol.values.size(); ++k) {
        const double a = std::abs(sol.values[k - 1][0]) + sol.node_errors[k - 1];
        const double b = std::max(0.0, std::abs(sol.values[k][0]) - sol.node_errors[k]);
        if (b * b > a * a) {
          rec.require(false, "V increased along the trajectory from " + str(x));
          break;
        }
      }
    }
  });
  rec.guard("growth", [&] {
    const auto d =
        builders::lyapunov_data({fm::linear({1.0}, 0.0)}, domain, V, {0, 0, 0.5}, {0, 2}, {0, 0, 1}, 1.0, 0.0, 0.0);
    const auto cert = stability::certify(d, eps, t0);
    rec.require(cert.verdict == stability::Status::counterexample, "x' = x was not rejected");
    if (cert.verdict != stability::Status::counterexample) return;
    // Independent check: Vdot + w3 = 2 x^2 + x^2 > 0 at the reported point.
    const double p = cert.failing.point.empty() ? 0.0 : cert.failing.point[0];
    const bool valid = cert.failing.condition == "Vdot(x,t) <= -w3(x)" && p != 0.0 && std::abs(p) <= 1.0;
    rec.require(valid, "counterexample at " + str(p) + " for '" + cert.failing.condition + "' is not valid");
    rec.numeric()["counterexample"] = p;
    rec.numeric()["counterexample_margin"] = cert.failing.margin.value;
  });
  return rec.finish();
}

PropertyResult sample_hold_stabilization(std::uint64_t, const Sizes&) {
  Recorder rec("sample_hold_stabilization");
  const auto p = builders::clf_problem({fm::linear({0.0, 1.0}, 0.0)}, Box({-2.0}, {2.0}), Box({-1.0}, {1.0}),
                                       fm::polynomial(0, {0, 0, 1}), 0.1, 1.0);
  json sweep = json::array();
  double prev = INFINITY;
  for (double eps : {0.01, 0.1, 0.5}) {
    rec.guard("eps " + str(eps), [&] {
      const auto r = stability::find_sampling_time(p, 1.0, eps);
      sweep.push_back({eps, r.ok, r.eta, r.margin.value, r.diagnostic});
      if (eps == 0.5) {
        rec.require(!r.ok, "eps = 0.5 still certified a sampling time");
        return;
      }
      rec.require(r.ok && r.eta > 0.0, "eps = " + str(eps) + ": no sampling time (" + r.diagnostic + ")");
      rec.require(r.eta < prev, "eps = " + str(eps) + ": sampling time did not shrink");
      prev = r.eta;
      rec.require(r.practical_ok, "eps = " + str(eps) + ": practical check failed");
      if (eps != 0.01 || !r.ok) return;
      // Closed loop from every annulus mesh node reaches the r-ball.
      const auto mesh = build_mesh(Box({-1.0}, {1.0}), p.r / 40.0);
      double worst = 0.0;
      for (std::size_t i = 0; i < mesh.size(); ++i) {
        const Vec x0 = mesh.point_vec(i);
        if (std::abs(x0[0]) < p.r) continue;
        const auto sol = stability::simulate_closed_loop(p, r.eta, eps, x0, 3.0, 1e-9);
        double best = INFINITY;
        for (std::size_t k = 0; k < sol.times.size(); ++k) best = std::min(best, std::abs(sol.values[k][0]));
        worst = std::max(worst, best);
        rec.require(best <= p.r + sol.error_bound.hi(), "closed loop from " + str(x0[0]) + " missed the r-ball");
      }
      rec.numeric()["closest_approach_worst"] = worst;
    });
  }
  rec.numeric()["sweep"] = sweep;
  return rec.finish();
}

std::vector<PropertyResult> run_all(std::uint64_t seed, const Sizes& s) {
  return {evt_guarantee(seed, s),          danskin_sandwich(seed, s),       selector_guarantee(seed, s),
          eigen_residuals(seed, s),        caratheodory_solver(seed, s),    lyapunov_certification(seed, s),
          sample_hold_stabilization(seed, s)};
}

}  // namespace certctl::audit
