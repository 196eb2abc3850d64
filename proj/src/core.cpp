#include "certctl/core.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <numbers>
#include <sstream>
#include <thread>

namespace certctl {

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

double distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// CertifiedReal

CertifiedReal::CertifiedReal(double v, double r) : value(v), radius(r) {
  if (!(r >= 0.0) || !std::isfinite(r))
    throw ArgumentError("CertifiedReal radius must be finite and non-negative");
}

CertifiedReal CertifiedReal::from_interval(double lo, double hi) {
  if (!(lo <= hi)) throw ArgumentError("from_interval: lo > hi");
  const double mid = lo + 0.5 * (hi - lo);
  const double r = up(std::max(up(hi - mid), up(mid - lo)));
  return {mid, r};
}

CertifiedReal operator+(const CertifiedReal& a, const CertifiedReal& b) {
  const double v = a.value + b.value;
  return {v, up(up(a.radius + b.radius) + ulp_of(v))};
}

CertifiedReal operator-(const CertifiedReal& a, const CertifiedReal& b) {
  const double v = a.value - b.value;
  return {v, up(up(a.radius + b.radius) + ulp_of(v))};
}

CertifiedReal operator*(const CertifiedReal& a, const CertifiedReal& b) {
  const double v = a.value * b.value;
  double r = up(std::abs(a.value) * b.radius);
  r = up(r + up(std::abs(b.value) * a.radius));
  r = up(r + up(a.radius * b.radius));
  return {v, up(r + ulp_of(v))};
}

CertifiedReal operator-(const CertifiedReal& a) { return {-a.value, a.radius}; }

CertifiedReal abs(const CertifiedReal& a) { return {std::abs(a.value), a.radius}; }

CertifiedReal max(const CertifiedReal& a, const CertifiedReal& b) {
  return {std::max(a.value, b.value), std::max(a.radius, b.radius)};
}

CertifiedReal min(const CertifiedReal& a, const CertifiedReal& b) {
  return {std::min(a.value, b.value), std::max(a.radius, b.radius)};
}

CertifiedReal hull(const CertifiedReal& a, const CertifiedReal& b) {
  return CertifiedReal::from_interval(std::min(a.lo(), b.lo()), std::max(a.hi(), b.hi()));
}

// ---------------------------------------------------------------------------
// Modulus

Modulus::Modulus() : format_(Format::mu), mu_([](double) { return 0.0; }), lipschitz_(0.0) {}

Modulus Modulus::omega(OmegaFn fn) {
  Modulus m;
  m.format_ = Format::omega;
  m.omega_ = std::move(fn);
  m.mu_ = nullptr;
  m.lipschitz_ = std::numeric_limits<double>::quiet_NaN();
  return m;
}

Modulus Modulus::mu(MuFn fn) {
  Modulus m;
  m.format_ = Format::mu;
  m.mu_ = std::move(fn);
  m.lipschitz_ = std::numeric_limits<double>::quiet_NaN();
  return m;
}

Modulus Modulus::lipschitz(double constant) {
  if (!(constant >= 0.0) || !std::isfinite(constant))
    throw ArgumentError("Lipschitz constant must be finite and non-negative");
  Modulus m;
  m.format_ = Format::mu;
  m.mu_ = [constant](double t) { return product_up(constant, t); };
  m.lipschitz_ = constant;
  return m;
}

Modulus Modulus::local_lipschitz(LocalLipschitzFn fn) {
  Modulus m;
  m.format_ = Format::omega;
  m.local_ = fn;
  m.omega_ = [fn](double eps, std::span<const double> c, double r) {
    const double l = fn(c, r);
    return l > 0.0 ? down(eps / l) : std::numeric_limits<double>::infinity();
  };
  m.mu_ = nullptr;
  m.lipschitz_ = std::numeric_limits<double>::quiet_NaN();
  return m;
}

double Modulus::mu_at(double t) const {
  if (format_ != Format::mu) throw ContractError("mu_at on an omega-format modulus");
  return mu_(t);
}

double Modulus::step(double eps, std::span<const double> c, double r) const {
  if (!(eps > 0.0)) throw ArgumentError("modulus_step: precision must be positive");
  if (!(r > 0.0)) throw ArgumentError("modulus_step: radius must be positive");
  if (format_ == Format::omega) return omega_(eps, c, r);
  if (!std::isnan(lipschitz_)) {
    return lipschitz_ > 0.0 ? down(eps / lipschitz_) : std::numeric_limits<double>::infinity();
  }
  // mu is only known to be monotone: bracket, then bisect 64 times and keep
  // the side with mu(t) <= eps.
  double hi = 1.0;
  int grow = 0;
  while (mu_(hi) <= eps) {
    hi *= 2.0;
    if (++grow > 1000) return std::numeric_limits<double>::infinity();
  }
  double lo = 0.0;
  for (int i = 0; i < 64; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mu_(mid) <= eps) lo = mid; else hi = mid;
  }
  return lo;
}

double Modulus::variation(double t, std::span<const double> c, double r) const {
  if (t <= 0.0) return 0.0;
  if (format_ == Format::mu) return mu_(t);
  if (local_) return product_up(local_(c, r), t);
  // Smallest eps whose omega reaches t; conservative end of the bracket.
  double hi = 1.0;
  int grow = 0;
  while (omega_(hi, c, r) < t) {
    hi *= 2.0;
    if (++grow > 1000) return std::numeric_limits<double>::infinity();
  }
  double lo = 0.0;
  for (int i = 0; i < 64; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid > 0.0 && omega_(mid, c, r) >= t) hi = mid; else lo = mid;
  }
  return hi;
}

// ---------------------------------------------------------------------------
// Box / Hypercube

Box::Box(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size() || lo.empty()) throw ArgumentError("Box: dimension mismatch or empty");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(lo[i] <= hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
      throw ArgumentError("Box: need finite lo <= hi on every axis");
}

Vec Box::center() const {
  Vec c(dim());
  for (std::size_t i = 0; i < dim(); ++i) c[i] = lo[i] + 0.5 * (hi[i] - lo[i]);
  return c;
}

double Box::diameter() const {
  double s = 0.0;
  for (std::size_t i = 0; i < dim(); ++i) s += (hi[i] - lo[i]) * (hi[i] - lo[i]);
  return std::sqrt(s);
}

bool Box::contains(std::span<const double> x, double tol) const {
  for (std::size_t i = 0; i < dim(); ++i)
    if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
  return true;
}

double Box::inscribed_radius_at_origin() const {
  double r = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dim(); ++i) {
    if (lo[i] > 0.0 || hi[i] < 0.0) return 0.0;
    r = std::min({r, -lo[i], hi[i]});
  }
  return r;
}

Hypercube::Hypercube(Vec c, double s) : center(std::move(c)), side(s) {
  if (center.empty()) throw ArgumentError("Hypercube: dimension must be >= 1");
  if (!(s > 0.0)) throw ArgumentError("Hypercube: side must be positive");
}

Box Hypercube::box() const {
  Vec lo(dim()), hi(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    lo[i] = center[i] - 0.5 * side;
    hi[i] = center[i] + 0.5 * side;
  }
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// Meshes

FiniteMesh::FiniteMesh(std::size_t dim, std::vector<double> coords, double resolution)
    : dim_(dim), coords_(std::move(coords)), resolution_(resolution) {}

Vec FiniteMesh::point_vec(std::size_t i) const {
  auto p = point(i);
  return {p.begin(), p.end()};
}

namespace {
constexpr int kSnapBits = 40;
const double kSnapQuantum = std::ldexp(1.0, -kSnapBits);

double snap_into(double x, double lo, double hi) {
  double s = snap_dyadic(x);
  if (s < lo) s = std::ldexp(std::ceil(std::ldexp(lo, kSnapBits)), -kSnapBits);
  if (s > hi) s = std::ldexp(std::floor(std::ldexp(hi, kSnapBits)), -kSnapBits);
  // Degenerate axis or quantum wider than the interval.
  if (s < lo || s > hi) s = lo;
  return s;
}

std::string count_message(const char* what, double count, std::size_t budget) {
  std::ostringstream os;
  os << what << " requires " << count << " nodes (budget " << budget << ")";
  return os.str();
}
}  // namespace

double snap_dyadic(double x) { return std::ldexp(std::nearbyint(std::ldexp(x, kSnapBits)), -kSnapBits); }

FiniteMesh build_mesh(const Box& box, double eps, std::size_t budget) {
  if (!(eps > 0.0)) throw ArgumentError("build_mesh: eps must be positive");
  const std::size_t n = box.dim();
  if (eps >= 0.5 * box.diameter()) {
    Vec c = box.center();
    for (std::size_t i = 0; i < n; ++i) c[i] = snap_into(c[i], box.lo[i], box.hi[i]);
    return {n, c, eps};
  }
  // Leave room for snapping displacement.
  const double slack = kSnapQuantum * std::sqrt(static_cast<double>(n));
  const double eff = eps - slack;
  if (!(eff > 0.0)) throw ResourceError("build_mesh: eps below the dyadic snapping quantum");
  const double hmax = 2.0 * eff / std::sqrt(static_cast<double>(n));

  std::vector<std::size_t> counts(n);
  double total = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double len = box.hi[i] - box.lo[i];
    if (len == 0.0) {
      counts[i] = 1;
      continue;
    }
    double m = 2.0;
    while (len / m > hmax) {
      m *= 2.0;
      if (m > 1e18) throw ResourceError(count_message("build_mesh", 1e18, budget));
    }
    counts[i] = static_cast<std::size_t>(m) + 1;
    total *= static_cast<double>(counts[i]);
  }
  if (total > static_cast<double>(budget)) throw ResourceError(count_message("build_mesh", total, budget));

  std::vector<std::vector<double>> axis(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i] == 1) {
      axis[i] = {box.lo[i]};
      continue;
    }
    const double m = static_cast<double>(counts[i] - 1);
    const double len = box.hi[i] - box.lo[i];
    axis[i].resize(counts[i]);
    for (std::size_t k = 0; k < counts[i]; ++k)
      axis[i][k] = snap_into(box.lo[i] + len * (static_cast<double>(k) / m), box.lo[i], box.hi[i]);
  }
  const auto N = static_cast<std::size_t>(total);
  std::vector<double> coords(N * n);
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t p = 0; p < N; ++p) {
    for (std::size_t i = 0; i < n; ++i) coords[p * n + i] = axis[i][idx[i]];
    for (std::size_t i = n; i-- > 0;) {
      if (++idx[i] < counts[i]) break;
      idx[i] = 0;
    }
  }
  return {n, std::move(coords), eps};
}

FiniteMesh build_mesh(const Hypercube& cube, double eps, std::size_t budget) {
  return build_mesh(cube.box(), eps, budget);
}

namespace {
// Nodes of the circumscribed cube mesh that lie in (inside) or within eps of
// the ball boundary (outside) are mapped onto the ball; exact duplicates are
// dropped, first occurrence wins.
FiniteMesh ball_like_mesh(std::span<const double> center, double radius, double eps,
                          std::size_t budget, bool sphere_only) {
  if (!(radius > 0.0)) throw ArgumentError("ball mesh: radius must be positive");
  const std::size_t n = center.size();
  Vec lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = center[i] - radius;
    hi[i] = center[i] + radius;
  }
  const FiniteMesh cube = build_mesh(Box(lo, hi), 0.5 * eps, budget);
  std::vector<Vec> seen;
  const double inner = radius * (1.0 - 1e-12);
  for (std::size_t p = 0; p < cube.size(); ++p) {
    auto y = cube.point(p);
    const double d = distance(y, center);
    Vec q(y.begin(), y.end());
    if (sphere_only) {
      if (std::abs(d - radius) > 0.5 * eps || d == 0.0) continue;
    } else if (d <= radius) {
      // inside, keep as is
    } else if (d > radius + 0.5 * eps) {
      continue;
    }
    if (sphere_only || d > radius) {
      const double scale = (sphere_only ? radius : inner) / d;
      for (std::size_t i = 0; i < n; ++i) q[i] = center[i] + (y[i] - center[i]) * scale;
    }
    seen.push_back(std::move(q));
  }
  // Dedup preserving order.
  std::vector<double> uniq;
  std::vector<Vec> kept;
  for (const auto& q : seen) {
    if (std::find(kept.begin(), kept.end(), q) != kept.end()) continue;
    kept.push_back(q);
    uniq.insert(uniq.end(), q.begin(), q.end());
  }
  if (kept.empty()) {
    // sphere in 1-D: both endpoints
    Vec a(center.begin(), center.end()), b = a;
    a[0] -= radius;
    b[0] += radius;
    uniq = a;
    uniq.insert(uniq.end(), b.begin(), b.end());
  }
  return {n, std::move(uniq), eps};
}
}  // namespace

FiniteMesh build_ball_mesh(std::span<const double> center, double radius, double eps,
                           std::size_t budget) {
  return ball_like_mesh(center, radius, eps, budget, false);
}

FiniteMesh build_sphere_mesh(std::span<const double> center, double radius, double eps,
                             std::size_t budget) {
  if (center.size() == 1) {
    std::vector<double> c{center[0] - radius, center[0] + radius};
    return {1, c, eps};
  }
  return ball_like_mesh(center, radius, eps, budget, true);
}

LocatedSet LocatedSet::box(Box b) {
  return LocatedSet([b](double eps) { return build_mesh(b, eps); });
}

LocatedSet LocatedSet::ball(Vec center, double radius) {
  return LocatedSet([center, radius](double eps) { return build_ball_mesh(center, radius, eps); });
}

LocatedSet LocatedSet::circle(double cx, double cy, double radius) {
  return LocatedSet([cx, cy, radius](double eps) {
    // chord between consecutive nodes <= 2 eps
    const double arc = 2.0 * std::asin(std::min(1.0, eps / radius));
    const auto count = static_cast<std::size_t>(std::ceil(2.0 * std::numbers::pi / arc)) + 1;
    std::vector<double> coords;
    coords.reserve(2 * count);
    for (std::size_t k = 0; k < count; ++k) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
      coords.push_back(cx + radius * std::cos(a));
      coords.push_back(cy + radius * std::sin(a));
    }
    return FiniteMesh(2, std::move(coords), eps);
  });
}

CertifiedReal located_distance(const LocatedSet& a, std::span<const double> x, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("located_distance: eps must be positive");
  const FiniteMesh m = a.mesh(eps);
  if (m.size() == 0) throw ContractError("located_distance: empty mesh");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.size(); ++i) best = std::min(best, distance(x, m.point(i)));
  return {best, up(eps + 4.0 * ulp_of(best))};
}

// ---------------------------------------------------------------------------
// Parallel scans

namespace {
std::atomic<unsigned> g_workers{1};
}

void set_worker_count(unsigned n) { g_workers = std::max(1u, n); }
unsigned worker_count() { return g_workers.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned w = std::min<std::size_t>(worker_count(), std::max<std::size_t>(1, n / 64));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(w);
  const std::size_t chunk = (n + w - 1) / w;
  for (unsigned t = 0; t < w; ++t) {
    const std::size_t b = t * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    threads.emplace_back([&fn, &errors, t, b, e] {
      try {
        for (std::size_t i = b; i < e; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace certctl
