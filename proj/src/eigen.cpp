#include "certctl/eigen.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace certctl::eigen {

namespace {

constexpr double kUnit = std::numeric_limits<double>::epsilon() / 2.0;

// Generous bound for an n-term complex dot product.
double gamma(std::size_t n) { return static_cast<double>(n + 4) * 4.0 * kUnit; }

Eigen::MatrixXcd to_eigen(const ComplexMatrix& a) {
  const std::size_t n = a.size();
  Eigen::MatrixXcd m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = a(i, j);
  return m;
}

double fro(const Eigen::MatrixXcd& m) { return m.norm(); }

}  // namespace

ComplexMatrix::ComplexMatrix(std::size_t n) : n_(n), a_(n * n) {
  if (n == 0) throw ArgumentError("ComplexMatrix: size must be >= 1");
}

ComplexMatrix::ComplexMatrix(std::size_t n, std::vector<Complex> entries) : n_(n), a_(std::move(entries)) {
  if (n == 0 || a_.size() != n * n) throw ArgumentError("ComplexMatrix: need n*n entries with n >= 1");
  for (const auto& z : a_)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw ArgumentError("ComplexMatrix: non-finite entry");
}

ComplexMatrix ComplexMatrix::real(std::size_t n, const std::vector<double>& entries) {
  std::vector<Complex> c(entries.begin(), entries.end());
  return {n, std::move(c)};
}

double ComplexMatrix::frobenius() const {
  double s = 0.0;
  for (const auto& z : a_) s += std::norm(z);
  return std::sqrt(s);
}

ComplexMatrix parse_matrix(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') throw ArgumentError("parse_matrix: bad number '" + tok + "'");
      row.push_back(v);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  const std::size_t n = rows.size();
  if (n == 0) throw ArgumentError("parse_matrix: empty matrix");
  std::vector<Complex> e;
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != 2 * n)
      throw ArgumentError("parse_matrix: row " + std::to_string(i + 1) + " needs " + std::to_string(2 * n) +
                          " numbers (re im pairs)");
    for (std::size_t j = 0; j < n; ++j) e.emplace_back(rows[i][2 * j], rows[i][2 * j + 1]);
  }
  return {n, std::move(e)};
}

ComplexMatrix parse_matrix(const std::string& text) {
  std::istringstream is(text);
  return parse_matrix(is);
}

void write_matrix(std::ostream& os, const ComplexMatrix& a) {
  os.precision(17);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) os << (j ? " " : "") << a(i, j).real() << ' ' << a(i, j).imag();
    os << '\n';
  }
}

CertifiedPoly char_poly(const ComplexMatrix& a) {
  const std::size_t n = a.size();
  const Eigen::MatrixXcd am = to_eigen(a);
  const double na = fro(am), sn = std::sqrt(static_cast<double>(n));
  const double g = gamma(n);
  CertifiedPoly p;
  p.coeffs.assign(n + 1, 0.0);
  p.radii.assign(n + 1, 0.0);
  p.coeffs[n] = 1.0;

  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  double err_m = 0.0;  // Frobenius bound on the error in m
  for (std::size_t k = 1; k <= n; ++k) {
    const Complex c = p.coeffs[n - k + 1];
    const double prev_norm = fro(m);
    m = am * m;
    m.diagonal().array() += c;
    err_m = na * err_m + sn * p.radii[n - k + 1] + g * (na * prev_norm + sn * std::abs(c));
    const Eigen::MatrixXcd am_k = am * m;
    const Complex tr = am_k.trace();
    p.coeffs[n - k] = -tr / static_cast<double>(k);
    const double err_tr = sn * (na * err_m + g * na * fro(m)) + g * std::abs(tr);
    p.radii[n - k] = up(err_tr / static_cast<double>(k) + ulp_of(std::abs(p.coeffs[n - k])));
    err_m = up(err_m);
  }
  return p;
}

namespace {

// p(z), p'(z) and a bound on |p~(z)| - |p(z)| over every polynomial within
// the coefficient radii, including Horner rounding.
struct Eval {
  Complex p, dp;
  double err;
};

Eval evaluate(const CertifiedPoly& poly, Complex z) {
  const std::size_t n = poly.degree();
  Complex p = poly.coeffs[n], dp = 0.0;
  const double az = std::abs(z);
  double mag = std::abs(poly.coeffs[n]), rad = poly.radii[n];
  for (std::size_t i = n; i-- > 0;) {
    dp = dp * z + p;
    p = p * z + poly.coeffs[i];
    mag = mag * az + std::abs(poly.coeffs[i]);
    rad = rad * az + poly.radii[i];
  }
  return {p, dp, up(gamma(2 * n) * mag + rad * (1.0 + gamma(n)))};
}

}  // namespace

RootSet approx_roots(const CertifiedPoly& poly, double eps, std::size_t max_iterations) {
  if (!(eps > 0.0)) throw ArgumentError("approx_roots: eps must be positive");
  if (poly.coeffs.size() < 2) throw ArgumentError("approx_roots: degree must be >= 1");
  if (poly.coeffs.back() != Complex(1.0)) throw ArgumentError("approx_roots: polynomial must be monic");
  const std::size_t n = poly.degree();
  RootSet rs;

  // Seeds on a perturbed circle around the centroid.
  const Complex center = -poly.coeffs[n - 1] / static_cast<double>(n);
  double radius = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    radius = std::max(radius, std::pow(std::abs(poly.coeffs[i]), 1.0 / static_cast<double>(n - i)));
  radius = radius > 0.0 ? 2.0 * radius : 1.0;
  CVec z(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double ang = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n) + 0.4;
    z[k] = center + radius * (1.0 + 0.01 * static_cast<double>(k)) * Complex(std::cos(ang), std::sin(ang));
  }

  std::size_t it = 0;
  for (; it < max_iterations; ++it) {
    double moved = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const Eval e = evaluate(poly, z[k]);
      if (e.p == 0.0) continue;
      if (e.dp == 0.0) {
        z[k] += Complex(1e-8, 1e-8) * (1.0 + std::abs(z[k]));
        moved = INFINITY;
        continue;
      }
      const Complex w = e.p / e.dp;
      Complex s = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != k && z[j] != z[k]) s += 1.0 / (z[k] - z[j]);
      const Complex step = w / (1.0 - w * s);
      z[k] -= step;
      moved = std::max(moved, std::abs(step) / (1.0 + std::abs(z[k])));
    }
    if (moved <= 4.0 * kUnit) {
      ++it;
      break;
    }
  }
  rs.iterations = it;
  std::sort(z.begin(), z.end(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });

  // Weierstrass disks.
  std::vector<double> r(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Eval e = evaluate(poly, z[k]);
    double denom = 1.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != k) denom *= std::abs(z[k] - z[j]);
    const double num = std::abs(e.p) + e.err;
    r[k] = denom > 0.0 ? up(static_cast<double>(n) * num / denom * (1.0 + 4.0 * gamma(n))) : INFINITY;
  }

  // Components of overlapping disks.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    return parent[i] == i ? i : parent[i] = find(parent[i]);
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(z[i] - z[j]) <= r[i] + r[j]) parent[find(i)] = find(j);

  rs.roots = z;
  rs.radii.assign(n, 0.0);
  std::vector<long> cluster_of(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = find(i);
    if (cluster_of[root] < 0) {
      cluster_of[root] = static_cast<long>(rs.clusters.size());
      rs.clusters.push_back({});
    }
    rs.clusters[static_cast<std::size_t>(cluster_of[root])].members.push_back(i);
  }
  for (auto& c : rs.clusters) {
    Complex mean = 0.0;
    for (auto i : c.members) mean += z[i];
    mean /= static_cast<double>(c.members.size());
    double rad = 0.0;
    for (auto i : c.members) rad = std::max(rad, up(std::abs(z[i] - mean) + r[i]));
    c.center = mean;
    c.radius = c.members.size() == 1 ? r[c.members[0]] : rad;
    if (c.members.size() == 1) c.center = z[c.members[0]];
    for (auto i : c.members)
      rs.radii[i] = c.members.size() == 1 ? r[i] : up(std::abs(z[i] - c.center) + c.radius);
  }
  for (double v : rs.radii)
    if (!(v <= eps)) rs.undecided = true;
  return rs;
}

CertifiedReal residual_norm(const ComplexMatrix& a, const CVec& v, Complex lambda) {
  const std::size_t n = a.size();
  if (v.size() != n) throw ArgumentError("residual_norm: vector has wrong size");
  const double g = gamma(n + 1);
  double sum = 0.0, err2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Complex s = 0.0;
    double mag = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      s += a(i, j) * v[j];
      mag += std::abs(a(i, j)) * std::abs(v[j]);
    }
    s -= lambda * v[i];
    mag += std::abs(lambda) * std::abs(v[i]);
    sum += std::norm(s);
    const double e = g * mag;
    err2 += e * e;
  }
  const double value = std::sqrt(sum);
  return CertifiedReal(value, up(std::sqrt(err2) * (1.0 + g) + static_cast<double>(n + 2) * ulp_of(value)));
}

double gram_min_eigenvalue(const std::vector<CVec>& vs) {
  if (vs.empty()) return 0.0;
  const std::size_t k = vs.size(), n = vs.front().size();
  Eigen::MatrixXcd g(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      Complex s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += std::conj(vs[i][t]) * vs[j][t];
      g(i, j) = s;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

namespace {

void normalize(CVec& v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  const double nv = std::sqrt(s);
  for (auto& z : v) z /= nv;
}

CVec start_vector(std::size_t n, std::size_t seed) {
  CVec b(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i + 1) * (1.0 + 0.618 * static_cast<double>(seed));
    b[i] = Complex(1.0 + 0.5 * std::sin(t), 0.25 * std::cos(1.7 * t));
  }
  return b;
}

void orthogonalize(CVec& b, const std::vector<CVec>& against) {
  for (const auto& q : against) {
    Complex d = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) d += std::conj(q[i]) * b[i];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= d * q[i];
  }
}

bool finite(const CVec& v) {
  return std::all_of(v.begin(), v.end(), [](Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

ApproxEigenPair inverse_iteration(const ComplexMatrix& a, const Eigen::MatrixXcd& am, Complex lambda, CVec b,
                                  std::size_t root) {
  const std::size_t n = a.size();
  ApproxEigenPair pair;
  pair.root = root;
  CVec v;
  for (double shift_scale : {1e-10, 1e-7, 1e-4}) {
    const Complex mu = lambda + shift_scale * (1.0 + std::abs(lambda)) * Complex(1.0, 0.5);
    Eigen::MatrixXcd m = am;
    m.diagonal().array() -= mu;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
    Eigen::VectorXcd x(n);
    for (std::size_t i = 0; i < n; ++i) x(i) = b[i];
    for (int it = 0; it < 3; ++it) {
      x = lu.solve(x);
      x /= x.norm();
    }
    v.assign(x.data(), x.data() + n);
    if (finite(v)) break;
  }
  if (!finite(v)) {
    v = b;
    normalize(v);
  }
  normalize(v);
  // Rayleigh quotient, kept when it lowers the residual.
  Complex rq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Complex s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += a(i, j) * v[j];
    rq += std::conj(v[i]) * s;
  }
  const CertifiedReal r0 = residual_norm(a, v, lambda), r1 = residual_norm(a, v, rq);
  pair.v = std::move(v);
  if (r1.hi() < r0.hi()) {
    pair.lambda = rq;
    pair.residual = r1;
  } else {
    pair.lambda = lambda;
    pair.residual = r0;
  }
  return pair;
}

}  // namespace

EigenResult approx_eigenpairs(const ComplexMatrix& a, double eps, double tau) {
  if (!(eps > 0.0)) throw ArgumentError("approx_eigenpairs: eps must be positive");
  if (!(tau > 0.0)) throw ArgumentError("approx_eigenpairs: independence threshold must be positive");
  EigenResult res;
  res.tau = tau;
  res.roots = approx_roots(char_poly(a), eps);
  const Eigen::MatrixXcd am = to_eigen(a);
  const std::size_t n = a.size();

  std::vector<CVec> kept;
  ApproxEigenPair best;
  bool have_best = false;
  std::size_t seed = 0;
  for (const auto& cluster : res.roots.clusters) {
    std::vector<CVec> local;
    for (std::size_t m = 0; m < cluster.members.size(); ++m) {
      const std::size_t root = cluster.members[m];
      CVec b = start_vector(n, seed++);
      orthogonalize(b, local);
      if (std::all_of(b.begin(), b.end(), [](Complex z) { return std::abs(z) < 1e-300; })) continue;
      normalize(b);
      ApproxEigenPair pair = inverse_iteration(a, am, res.roots.roots[root], b, root);
      if (!have_best || pair.residual.hi() < best.residual.hi()) {
        best = pair;
        have_best = true;
      }
      if (pair.residual.hi() > eps) continue;
      std::vector<CVec> trial = kept;
      trial.push_back(pair.v);
      if (gram_min_eigenvalue(trial) < tau) continue;
      kept.push_back(pair.v);
      local.push_back(pair.v);
      res.pairs.push_back(std::move(pair));
    }
  }
  if (res.pairs.empty()) {
    res.failed = true;
    if (have_best) res.pairs.push_back(best);
  }
  std::vector<CVec> vs;
  for (const auto& p : res.pairs) vs.push_back(p.v);
  res.gram_min = gram_min_eigenvalue(vs);
  return res;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::stable: return "stable";
    case Verdict::unstable: return "unstable";
    default: return "undecided";
  }
}

StabilityVerdict hurwitz_verdict(const ComplexMatrix& a, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("hurwitz_verdict: eps must be positive");
  StabilityVerdict out;
  out.epsilon_used = eps;
  out.roots = approx_roots(char_poly(a), eps);
  double lo = -INFINITY, hi = -INFINITY;
  bool some_right = false;
  for (std::size_t i = 0; i < out.roots.roots.size(); ++i) {
    const double re = out.roots.roots[i].real(), r = out.roots.radii[i];
    lo = std::max(lo, down(re - r));
    hi = std::max(hi, up(re + r));
    if (down(re - r) > 0.0) some_right = true;
  }
  out.margin = std::isfinite(lo) && std::isfinite(hi) ? CertifiedReal::from_interval(lo, hi)
                                                      : CertifiedReal(0.0, std::numeric_limits<double>::max());
  if (hi < 0.0)
    out.verdict = Verdict::stable;
  else if (some_right)
    out.verdict = Verdict::unstable;
  else
    out.verdict = Verdict::undecided;
  return out;
}

}  // namespace certctl::eigen
