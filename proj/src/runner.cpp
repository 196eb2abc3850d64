#include "certctl/runner.hpp"

#include <openssl/evp.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "certctl/audit.hpp"
#include "certctl/builders.hpp"
#include "certctl/eigen.hpp"
#include "certctl/errors.hpp"
#include "certctl/evt.hpp"

namespace certctl::runner {

using nlohmann::json;
using forms::FormPtr;

namespace {

using Quad = boost::multiprecision::cpp_bin_float_quad;

// ---------------------------------------------------------------------------
// Config readers. Every failure is a ConfigError naming the key.

bool non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

const json& member(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  return obj[key];
}

double number(const json& obj, const std::string& key, const std::string& where) {
  const json& v = member(obj, key, where);
  if (!v.is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(where + ": '" + key + "' must be finite");
  return x;
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& where) {
  return obj.is_object() && obj.contains(key) ? number(obj, key, where) : fallback;
}

std::size_t count_or(const json& obj, const std::string& key, std::size_t fallback, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  if (!non_negative_integer(obj[key])) throw ConfigError(where + ": '" + key + "' must be a non-negative integer");
  return obj[key].get<std::size_t>();
}

Vec vec(const json& obj, const std::string& key, const std::string& where) {
  const json& v = member(obj, key, where);
  if (!v.is_array()) throw ConfigError(where + ": '" + key + "' must be an array of numbers");
  Vec out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(where + ": '" + key + "' must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

Box box(const json& obj, const std::string& key, const std::string& where) {
  const json& b = member(obj, key, where);
  const std::string w = where + "." + key;
  const Vec lo = vec(b, "lo", w), hi = vec(b, "hi", w);
  try {
    return Box(lo, hi);
  } catch (const Error& e) {
    throw ConfigError(w + ": " + e.what());
  }
}

FormPtr form(const json& obj, const std::string& key, const std::string& where) {
  try {
    return forms::parse(member(obj, key, where));
  } catch (const ConfigError& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::vector<FormPtr> form_list(const json& obj, const std::string& key, const std::string& where) {
  const json& v = member(obj, key, where);
  if (!v.is_array()) throw ConfigError(where + ": '" + key + "' must be an array of forms");
  std::vector<FormPtr> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    try {
      out.push_back(forms::parse(v[i]));
    } catch (const ConfigError& e) {
      throw ConfigError(where + "." + key + "[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return out;
}

// Tolerances are positive numbers or arrays of positive numbers.
void validate_tolerances(const json& tol) {
  if (!tol.is_object()) throw ConfigError("tolerances must be an object");
  for (const auto& [k, v] : tol.items()) {
    auto check = [&](const json& x) {
      if (!x.is_number() || !(x.get<double>() > 0.0) || !std::isfinite(x.get<double>()))
        throw ConfigError("tolerances: '" + k + "' must be positive");
    };
    if (v.is_array()) {
      if (v.empty()) throw ConfigError("tolerances: '" + k + "' must not be empty");
      for (const auto& x : v) check(x);
    } else {
      check(v);
    }
  }
}

json cjson(const CertifiedReal& c) { return {{"value", c.value}, {"radius", c.radius}}; }

// ---------------------------------------------------------------------------

struct Context {
  std::uint64_t seed = 1;
  bool precision_audit = false;
  std::string base_dir;
};

struct Outcome {
  std::string verdict;
  int exit_code = failure;
  json numeric = json::object();
  json payload = json::object();
  std::vector<DataFile> files;
};

using Handler = std::function<Outcome(const json& problem, const json& tol, const Context& ctx)>;

// ---------------------------------------------------------------------------
// evt-min: J[kappa] = mean over points p of g(p, kappa(p)).

Outcome run_evt(const json& pr, const json& tol, const Context& ctx) {
  const std::string w = "problem";
  const json& dom = member(pr, "domain", w);
  evt::PolicyClass cls;
  cls.domain = Hypercube(vec(dom, "center", w + ".domain"), number(dom, "side", w + ".domain"));
  cls.output_dim = count_or(pr, "output_dim", 1, w);
  cls.lipschitz = number(pr, "lipschitz", w);
  cls.bound = number(pr, "bound", w);
  const std::size_t n = cls.domain.dim(), m = cls.output_dim;
  try {
    cls.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  const FormPtr g = form(pr, "integrand", w);
  if (g->arity() > n + m) throw ConfigError("problem.integrand: uses more than the n + m variables (x, u)");

  std::vector<Vec> points;
  if (pr.contains("points")) {
    for (const auto& p : member(pr, "points", w)) {
      Vec x;
      for (const auto& c : p) x.push_back(c.get<double>());
      if (x.size() != n) throw ConfigError("problem.points: each point needs " + std::to_string(n) + " coordinates");
      points.push_back(std::move(x));
    }
  } else {
    // 16 midpoints per axis.
    const Box b = cls.domain.box();
    const std::size_t k = 16;
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= k;
    for (std::size_t idx = 0; idx < total; ++idx) {
      Vec x(n);
      std::size_t r = idx;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = b.lo[i] + (b.hi[i] - b.lo[i]) * ((r % k) + 0.5) / k;
        r /= k;
      }
      points.push_back(std::move(x));
    }
  }
  if (points.empty()) throw ConfigError("problem.points must not be empty");

  // Lipschitz in u, uniform over the points and the output ball's box.
  const Box ubox(Vec(m, -cls.bound), Vec(m, cls.bound));
  double lip = 0.0;
  for (const auto& p : points) lip = std::max(lip, g->gradient_bound(builders::join(Box(p, p), ubox), n, m));

  auto values_at = [g, points](const evt::PiecewisePolicy& k) {
    std::vector<CertifiedReal> out;
    for (const auto& p : points) {
      Vec v = p;
      const Vec u = k(p);
      v.insert(v.end(), u.begin(), u.end());
      out.push_back((*g)(v));
    }
    return out;
  };
  evt::Functional j;
  j.evaluate = [values_at](const evt::PiecewisePolicy& k) {
    CertifiedReal s;
    const auto vals = values_at(k);
    for (const auto& v : vals) s = s + v;
    const double inv = 1.0 / static_cast<double>(vals.size());
    return s * CertifiedReal(inv, ulp_of(inv));
  };
  j.modulus = Modulus::lipschitz(lip);

  const double eps = number(tol, "eps", "tolerances");
  const std::size_t budget = count_or(pr, "net_budget", evt::kDefaultNetBudget, w);
  const auto r = evt::epsilon_minimize(j, cls, eps, budget);

  Outcome o;
  o.verdict = "certified";
  o.exit_code = certified;
  o.numeric["value"] = cjson(r.value);
  o.numeric["index"] = r.index;
  o.numeric["net_size"] = r.net_size;
  o.numeric["net_precision"] = r.net_precision;
  o.numeric["degenerate"] = r.degenerate;
  o.numeric["functional_lipschitz"] = lip;
  o.payload["guarantee"] = "J[policy] - eps <= inf over the class";
  std::ostringstream os;
  evt::write_policy(os, r.policy);
  o.files.push_back({"policy.txt", os.str()});
  if (ctx.precision_audit) {
    Quad s = 0;
    for (const auto& v : values_at(r.policy)) s += Quad(v.value);
    const double q = static_cast<double>(s / static_cast<double>(points.size()));
    o.numeric["precision_audit"] = {{"quad_value", q},
                                    {"difference", std::abs(q - r.value.value)},
                                    {"within_radius", std::abs(q - r.value.value) <= r.value.radius}};
    if (std::abs(q - r.value.value) > r.value.radius) {
      o.verdict = "precision-audit-failed";
      o.exit_code = failure;
    }
  }
  return o;
}

// ---------------------------------------------------------------------------
// danskin

Outcome run_danskin(const json& pr, const json& tol, const Context&) {
  const std::string w = "problem";
  const Box xb = box(pr, "x_box", w), tb = box(pr, "theta_box", w);
  const FormPtr phi = form(pr, "objective", w);
  const Vec x = vec(pr, "x", w), v = vec(pr, "v", w);
  if (x.size() != xb.dim() || v.size() != xb.dim()) throw ConfigError("problem: x and v must match x_box");
  const double delta = number(tol, "delta", "tolerances");
  const double mesh_eps = number_or(tol, "mesh_eps", 0.0, "tolerances");
  Vec hs{1e-1, 1e-2, 1e-3, 1e-4};
  if (tol.contains("steps")) hs = vec(tol, "steps", "tolerances");
  for (std::size_t i = 0; i < hs.size(); ++i) {
    Vec y = x;
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += std::min(hs[i], 1.0) * v[k];
    if (!xb.contains(y) || !xb.contains(x)) throw ConfigError("problem: x + h v leaves x_box");
  }
  const auto obj = builders::danskin_objective(phi, xb, tb);
  const auto rep = danskin::finite_difference_audit(obj, danskin::ThetaDomain{tb}, x, v, delta, hs, mesh_eps);

  Outcome o;
  const bool ok = rep.sandwich_ok && rep.derivative.spread <= rep.spread_bound;
  o.verdict = ok ? "certified" : "sandwich-violated";
  o.exit_code = ok ? certified : failure;
  o.numeric["derivative"] = cjson(rep.derivative.value);
  o.numeric["spread"] = rep.derivative.spread;
  o.numeric["spread_bound"] = rep.spread_bound;
  o.numeric["slack"] = rep.slack;
  o.numeric["psi"] = cjson(rep.derivative.set.psi_hat);
  o.numeric["optimizer_count"] = rep.derivative.set.indices.size();
  o.numeric["witness_theta"] = rep.derivative.witness_theta;
  json rows = json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"h", r.h},
                    {"quotient", cjson(r.quotient)},
                    {"lower", r.lower},
                    {"upper", r.upper_applies ? json(r.upper) : json(nullptr)},
                    {"sandwiched", r.sandwiched}});
  o.numeric["rows"] = rows;
  std::ostringstream os;
  danskin::write_audit_csv(os, rep);
  o.files.push_back({"audit.csv", os.str()});
  return o;
}

// ---------------------------------------------------------------------------
// selector

Outcome run_selector(const json& pr, const json& tol, const Context& ctx) {
  const std::string w = "problem";
  selector::RegularSVF f;
  f.lo = number(pr, "lo", w);
  f.hi = number(pr, "hi", w);
  const json& blocks = member(pr, "blocks", w);
  if (!blocks.is_array() || blocks.empty()) throw ConfigError("problem.blocks must be a non-empty array");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string bw = w + ".blocks[" + std::to_string(i) + "]";
    selector::SvfBlock b;
    b.box = {vec(blocks[i], "lo", bw), vec(blocks[i], "hi", bw)};
    const json& chunks = member(blocks[i], "chunks", bw);
    if (!chunks.is_array()) throw ConfigError(bw + ".chunks must be an array");
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      const std::string cw = bw + ".chunks[" + std::to_string(c) + "]";
      b.chunks.push_back(builders::chunk(form(chunks[c], "alpha", cw), form(chunks[c], "beta", cw), b.box.dim()));
    }
    f.blocks.push_back(std::move(b));
  }
  const double eps = number(tol, "eps", "tolerances");
  const double exception = number_or(tol, "exception_volume", 0.0, "tolerances");
  const auto sel = selector::extract_selector(f, eps, exception);

  // Seeded check of the distance guarantee.
  const std::size_t checks = count_or(pr, "check_points", 1000, w);
  const selector::Block bb = f.bounding_box();
  std::mt19937_64 rng(ctx.seed);
  std::size_t tested = 0, violations = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < checks; ++i) {
    Vec x(bb.dim());
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::uniform_real_distribution<double>(bb.lo[k], bb.hi[k])(rng);
    if (sel.excluded(x)) continue;
    ++tested;
    const auto v = sel(x);
    const double d = v ? selector::interval_distance(*v, f.at(x)) : INFINITY;
    worst = std::max(worst, d);
    if (!(d <= sel.epsilon)) ++violations;
  }
  const auto ex = sel.domain.exception(sel.exception_volume);
  const double vol = selector::volume(ex).hi();

  Outcome o;
  o.verdict = violations == 0 ? "certified" : "distance-violated";
  o.exit_code = violations == 0 ? certified : failure;
  o.numeric["epsilon"] = sel.epsilon;
  o.numeric["exception_budget"] = sel.exception_volume;
  o.numeric["exception_volume_upper"] = vol;
  o.numeric["pieces"] = sel.pieces.size();
  o.numeric["cells"] = sel.approx.cells.size();
  o.numeric["hausdorff_bound"] = sel.approx.hausdorff_bound;
  o.numeric["checked_points"] = tested;
  o.numeric["worst_distance"] = worst;
  o.numeric["violations"] = violations;
  std::ostringstream os;
  selector::write_selector(os, sel);
  o.files.push_back({"selector.txt", os.str()});
  return o;
}

// ---------------------------------------------------------------------------
// eig

eigen::ComplexMatrix matrix_from(const json& pr, const Context& ctx) {
  if (pr.contains("matrix_file")) {
    if (!pr["matrix_file"].is_string()) throw ConfigError("problem.matrix_file must be a path");
    std::string path = pr["matrix_file"].get<std::string>();
    if (!path.empty() && path.front() != '/') path = ctx.base_dir + "/" + path;
    std::ifstream in(path);
    if (!in) throw ConfigError("problem.matrix_file: cannot open " + path);
    try {
      return eigen::parse_matrix(in);
    } catch (const Error& e) {
      throw ConfigError(std::string("problem.matrix_file: ") + e.what());
    }
  }
  const json& rows = member(pr, "matrix", "problem");
  if (!rows.is_array() || rows.empty()) throw ConfigError("problem.matrix must be a non-empty array of rows");
  const std::size_t n = rows.size();
  std::vector<eigen::Complex> e;
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != n) throw ConfigError("problem.matrix must be square");
    for (const auto& x : row) {
      if (x.is_number())
        e.emplace_back(x.get<double>(), 0.0);
      else if (x.is_array() && x.size() == 2 && x[0].is_number() && x[1].is_number())
        e.emplace_back(x[0].get<double>(), x[1].get<double>());
      else
        throw ConfigError("problem.matrix entries are numbers or [re, im] pairs");
    }
  }
  return eigen::ComplexMatrix(n, std::move(e));
}

double quad_residual(const eigen::ComplexMatrix& a, const eigen::CVec& v, eigen::Complex lambda) {
  Quad s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    Quad re = -Quad(lambda.real()) * v[i].real() + Quad(lambda.imag()) * v[i].imag();
    Quad im = -Quad(lambda.real()) * v[i].imag() - Quad(lambda.imag()) * v[i].real();
    for (std::size_t j = 0; j < a.size(); ++j) {
      re += Quad(a(i, j).real()) * v[j].real() - Quad(a(i, j).imag()) * v[j].imag();
      im += Quad(a(i, j).real()) * v[j].imag() + Quad(a(i, j).imag()) * v[j].real();
    }
    s += re * re + im * im;
  }
  return static_cast<double>(sqrt(s));
}

Outcome run_eig(const json& pr, const json& tol, const Context& ctx) {
  const auto a = matrix_from(pr, ctx);
  const double eps = number(tol, "eps", "tolerances");
  const double tau = number_or(tol, "tau", eigen::kDefaultIndependence, "tolerances");
  const auto verdict = eigen::hurwitz_verdict(a, eps);
  const auto pairs = eigen::approx_eigenpairs(a, eps, tau);

  Outcome o;
  o.verdict = eigen::to_string(verdict.verdict);
  o.exit_code = verdict.verdict == eigen::Verdict::stable     ? certified
                : verdict.verdict == eigen::Verdict::unstable ? failure
                                                              : undecided;
  o.numeric["dimension"] = a.size();
  o.numeric["margin"] = {{"lo", verdict.margin.lo()}, {"hi", verdict.margin.hi()}};
  json roots = json::array();
  for (std::size_t i = 0; i < verdict.roots.roots.size(); ++i)
    roots.push_back({{"re", verdict.roots.roots[i].real()},
                     {"im", verdict.roots.roots[i].imag()},
                     {"radius", verdict.roots.radii[i]}});
  o.numeric["eigenvalues"] = roots;
  json ps = json::array();
  std::ostringstream csv;
  csv.precision(17);
  csv << "pair,lambda_re,lambda_im,residual,component,v_re,v_im\n";
  double worst_quad = 0.0;
  for (std::size_t k = 0; k < pairs.pairs.size(); ++k) {
    const auto& p = pairs.pairs[k];
    ps.push_back({{"re", p.lambda.real()}, {"im", p.lambda.imag()}, {"residual", p.residual.hi()}});
    for (std::size_t i = 0; i < p.v.size(); ++i)
      csv << k << ',' << p.lambda.real() << ',' << p.lambda.imag() << ',' << p.residual.hi() << ',' << i << ','
          << p.v[i].real() << ',' << p.v[i].imag() << '\n';
    if (ctx.precision_audit) worst_quad = std::max(worst_quad, quad_residual(a, p.v, p.lambda));
  }
  o.numeric["eigenpairs"] = ps;
  o.numeric["gram_min"] = pairs.gram_min;
  o.numeric["tau"] = pairs.tau;
  o.numeric["eigenpairs_failed"] = pairs.failed;
  o.files.push_back({"eigenpairs.csv", csv.str()});
  if (ctx.precision_audit) {
    o.numeric["precision_audit"] = {{"worst_quad_residual", worst_quad}, {"within_eps", worst_quad <= eps}};
    if (!pairs.failed && worst_quad > eps) {
      o.verdict = "precision-audit-failed";
      o.exit_code = failure;
    }
  }
  return o;
}

// ---------------------------------------------------------------------------
// ode

Outcome run_ode(const json& pr, const json& tol, const Context& ctx) {
  const std::string w = "problem";
  const Box sb = box(pr, "state_box", w);
  const auto field = form_list(pr, "field", w);
  const Vec x0 = vec(pr, "x0", w);
  const double horizon = number(pr, "horizon", w);
  if (x0.size() != sb.dim()) throw ConfigError("problem.x0 must match state_box");
  if (!sb.contains(x0)) throw ConfigError("problem.x0 lies outside state_box");
  const double eps = number(tol, "eps", "tolerances");
  const auto rhs = builders::ode_rhs(field, sb, horizon);

  Outcome o;
  try {
    const auto sol = traj::picard_solve(rhs, x0, horizon, eps);
    o.verdict = "solved";
    o.exit_code = certified;
    o.numeric["final_state"] = sol.final_state();
    o.numeric["error_bound"] = sol.error_bound.hi();
    o.numeric["steps"] = sol.steps;
    o.numeric["windows"] = sol.windows;
    o.numeric["lipschitz"] = rhs.max_lipschitz();
    o.numeric["max_contraction"] =
        sol.contraction.empty() ? 0.0 : *std::max_element(sol.contraction.begin(), sol.contraction.end());
    std::ostringstream os;
    traj::write_trajectory_csv(os, sol);
    o.files.push_back({"trajectory.csv", os.str()});
    if (ctx.precision_audit) {
      // Re-solve at half the tolerance; the two enclosures must meet.
      const auto fine = traj::picard_solve(rhs, x0, horizon, 0.5 * eps);
      const double gap = distance(fine.final_state(), sol.final_state());
      const bool ok = gap <= sol.error_bound.hi() + fine.error_bound.hi();
      o.numeric["precision_audit"] = {{"refined_final_state", fine.final_state()}, {"gap", gap}, {"consistent", ok}};
      if (!ok) {
        o.verdict = "precision-audit-failed";
        o.exit_code = failure;
      }
    }
  } catch (const DomainExitError& e) {
    o.verdict = "domain-exit";
    o.exit_code = failure;
    o.numeric["exit_time"] = e.exit_time;
    o.payload["message"] = e.what();
  }
  return o;
}

// ---------------------------------------------------------------------------
// shh

Outcome run_shh(const json& pr, const json& tol, const Context&) {
  const std::string w = "problem";
  const Box sb = box(pr, "state_box", w), cb = box(pr, "control_box", w);
  const auto p = builders::clf_problem(form_list(pr, "field", w), sb, cb, form(pr, "V", w), number(pr, "r", w),
                                       number(pr, "R", w));
  const double eta_max = number(pr, "eta_max", w);
  const double eps = number(tol, "eps", "tolerances");
  stability::SamplingOptions so;
  so.mesh_eps = number_or(tol, "mesh_eps", so.mesh_eps, "tolerances");
  so.sim_eps = number_or(tol, "sim_eps", so.sim_eps, "tolerances");
  so.eta_floor = number_or(tol, "eta_floor", so.eta_floor, "tolerances");
  const auto r = stability::find_sampling_time(p, eta_max, eps, so);

  Outcome o;
  const bool ok = r.ok && r.practical_ok;
  o.verdict = ok ? "certified" : (r.ok ? "practical-check-failed" : "no-sampling-time");
  o.exit_code = ok ? certified : failure;
  o.numeric["eta"] = r.eta;
  o.numeric["margin"] = cjson(r.margin);
  o.numeric["worst_point"] = r.worst_point;
  o.numeric["nodes"] = r.nodes;
  o.numeric["candidates"] = r.candidates;
  o.numeric["practical_ok"] = r.practical_ok;
  o.numeric["practical_horizon"] = r.practical_horizon;
  o.numeric["lipschitz_x"] = p.lipschitz_x;
  o.numeric["lipschitz_u"] = p.lipschitz_u;
  if (!r.diagnostic.empty()) o.payload["diagnostic"] = r.diagnostic;
  if (r.ok && pr.contains("x0")) {
    const Vec x0 = vec(pr, "x0", w);
    const double horizon = number_or(pr, "horizon", 10.0 * r.eta, w);
    const auto sol = stability::simulate_closed_loop(p, r.eta, eps, x0, horizon, so.sim_eps);
    std::ostringstream os;
    traj::write_trajectory_csv(os, sol);
    o.files.push_back({"closed_loop.csv", os.str()});
    o.numeric["closed_loop_final_state"] = sol.final_state();
    o.numeric["closed_loop_error_bound"] = sol.error_bound.hi();
  }
  return o;
}

// ---------------------------------------------------------------------------
// certify

Outcome run_certify(const json& pr, const json& tol, const Context& ctx) {
  const std::string w = "problem";
  const Box dom = box(pr, "domain", w);
  Vec ts{0.0};
  if (pr.contains("t_samples")) ts = vec(pr, "t_samples", w);
  if (ts.empty()) throw ConfigError("problem.t_samples must not be empty");
  const auto [tmin, tmax] = std::minmax_element(ts.begin(), ts.end());
  const auto d = builders::lyapunov_data(form_list(pr, "field", w), dom, form(pr, "V", w), vec(pr, "w1", w),
                                         vec(pr, "w2", w), vec(pr, "w3", w), number_or(pr, "xi", 1.0, w), *tmin,
                                         *tmax);
  stability::CheckOptions co;
  co.exemption = number_or(tol, "exemption", 0.0, "tolerances");
  co.witness_pairs = count_or(pr, "witness_pairs", co.witness_pairs, w);
  co.seed = ctx.seed;
  const double eps = number(tol, "eps", "tolerances");
  const auto cert = stability::certify(d, eps, ts, co);

  Outcome o;
  o.verdict = stability::to_string(cert.verdict);
  o.exit_code = cert.verdict == stability::Status::certified        ? certified
                : cert.verdict == stability::Status::counterexample ? failure
                                                                    : undecided;
  o.numeric["x0_threshold"] = cert.x0_threshold;
  o.numeric["x0_radius"] = cert.x0_radius;
  o.numeric["mesh_eps"] = cert.mesh_eps;
  o.numeric["exemption"] = cert.exemption;
  if (cert.verdict == stability::Status::undecided) o.numeric["suggested_eps"] = cert.suggested_eps;
  json checks = json::array();
  for (const auto& c : cert.checks)
    checks.push_back({{"condition", c.condition},
                      {"status", stability::to_string(c.status)},
                      {"margin", cjson(c.margin)},
                      {"slack", c.slack},
                      {"point", c.point},
                      {"time", c.time}});
  o.numeric["checks"] = checks;
  if (cert.verdict != stability::Status::certified)
    o.payload["failing"] = {{"condition", cert.failing.condition},
                            {"point", cert.failing.point},
                            {"other", cert.failing.other},
                            {"time", cert.failing.time},
                            {"margin", cjson(cert.failing.margin)}};
  return o;
}

// ---------------------------------------------------------------------------
// audit

Outcome run_audit(const json& pr, const json&, const Context& ctx) {
  const std::string scale = pr.is_object() ? pr.value("scale", std::string("full")) : "full";
  if (scale != "full" && scale != "quick") throw ConfigError("problem.scale must be 'full' or 'quick'");
  const auto sizes = scale == "full" ? audit::Sizes::full() : audit::Sizes::quick();
  const auto results = audit::run_all(ctx.seed, sizes);
  Outcome o;
  bool all = true;
  json props = json::object();
  json timings = json::object();
  for (const auto& r : results) {
    all = all && r.pass;
    props[r.name] = {{"pass", r.pass}, {"detail", r.detail}, {"values", r.numeric}};
    timings[r.name] = r.seconds;
  }
  o.verdict = all ? "pass" : "fail";
  o.exit_code = all ? certified : failure;
  o.numeric["scale"] = scale;
  o.numeric["properties"] = props;
  o.payload["seconds"] = timings;
  return o;
}

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h{
      {"evt-min", run_evt}, {"danskin", run_danskin}, {"selector", run_selector}, {"eig", run_eig},
      {"ode", run_ode},     {"shh", run_shh},         {"certify", run_certify},   {"audit", run_audit}};
  return h;
}

std::string hex(const unsigned char* d, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < n; ++i) {
    s += digits[d[i] >> 4];
    s += digits[d[i] & 15];
  }
  return s;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"evt-min", "danskin", "selector", "eig",
                                              "ode",     "shh",     "certify",  "audit"};
  return names;
}

std::string inputs_digest(const json& config, std::uint64_t seed) {
  const std::string text = config.dump() + "\nseed=" + std::to_string(seed);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw InternalError("inputs_digest: SHA-256 failed");
  return hex(md, len);
}

json numeric_fields(const json& certificate) {
  json j = certificate;
  j.erase("wall_clock_seconds");
  if (j.contains("payload")) j["payload"].erase("seconds");
  return j;
}

RunResult run(const json& config, const RunOptions& opts) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> allowed{"subcommand", "seed",   "workers",    "problem",
                                                "tolerances", "output", "description"};
  for (const auto& [k, v] : config.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw ConfigError("unknown config key '" + k + "'");
  if (!config.contains("subcommand") || !config["subcommand"].is_string())
    throw ConfigError("config: missing 'subcommand'");
  const std::string sub = config["subcommand"].get<std::string>();
  const auto it = handlers().find(sub);
  if (it == handlers().end()) {
    std::string known;
    for (const auto& n : subcommands()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown subcommand '" + sub + "'; available: " + known);
  }

  Context ctx;
  if (config.contains("seed")) {
    if (!non_negative_integer(config["seed"])) throw ConfigError("config: 'seed' must be a non-negative integer");
    ctx.seed = config["seed"].get<std::uint64_t>();
  }
  if (opts.seed) ctx.seed = *opts.seed;
  unsigned workers = 0;
  if (config.contains("workers")) {
    if (!non_negative_integer(config["workers"])) throw ConfigError("config: 'workers' must be a non-negative integer");
    workers = config["workers"].get<unsigned>();
  }
  if (opts.workers) workers = *opts.workers;
  if (workers > 0) set_worker_count(workers);
  ctx.precision_audit = opts.precision_audit;
  ctx.base_dir = opts.base_dir;

  const json problem = config.value("problem", json::object());
  const json tol = config.value("tolerances", json::object());
  validate_tolerances(tol);
  if (!problem.is_object()) throw ConfigError("problem must be an object");

  std::map<std::string, std::string> names;
  if (config.contains("output")) {
    if (!config["output"].is_object()) throw ConfigError("output must be an object of file names");
    for (const auto& [k, v] : config["output"].items()) {
      if (!v.is_string()) throw ConfigError("output: '" + k + "' must be a file name");
      names[k] = v.get<std::string>();
    }
  }

  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = it->second(problem, tol, ctx);
  } catch (const ConfigError&) {
    throw;
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  } catch (const ResourceError& e) {
    o = Outcome{};
    o.verdict = "undecided";
    o.exit_code = undecided;
    o.payload["message"] = e.what();
  } catch (const Error& e) {
    o = Outcome{};
    o.verdict = "error";
    o.exit_code = failure;
    o.payload["message"] = e.what();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  RunResult r;
  r.exit_code = o.exit_code;
  for (auto& f : o.files) {
    const auto n = names.find(f.name.substr(0, f.name.find('.')));
    if (n != names.end()) f.name = n->second;
  }
  json files = json::array();
  for (const auto& f : o.files) files.push_back(f.name);
  r.certificate = {{"version", kVersion},
                   {"subcommand", sub},
                   {"inputs_digest", inputs_digest(config, ctx.seed)},
                   {"seed", ctx.seed},
                   {"verdict", o.verdict},
                   {"exit_code", o.exit_code},
                   {"numeric", o.numeric},
                   {"payload", o.payload},
                   {"files", files},
                   {"wall_clock_seconds", seconds}};
  r.files = std::move(o.files);
  return r;
}

RunResult run_text(const std::string& text, const RunOptions& opts) {
  json config;
  try {
    config = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config does not parse: ") + e.what());
  }
  return run(config, opts);
}

}  // namespace certctl::runner
