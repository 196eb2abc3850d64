#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "certctl/errors.hpp"

namespace certctl {

using Vec = std::vector<double>;

double norm(std::span<const double> x);
double distance(std::span<const double> x, std::span<const double> y);

// Round-up helpers used by every radius computation.
inline double up(double x) { return std::nextafter(x, std::numeric_limits<double>::infinity()); }
inline double down(double x) { return std::nextafter(x, -std::numeric_limits<double>::infinity()); }
// a * b rounded up; exact products are returned unchanged.
inline double product_up(double a, double b) {
  const double p = a * b;
  return std::fma(a, b, -p) > 0.0 ? up(p) : p;
}
// a + b rounded up; exact sums are returned unchanged.
inline double sum_up(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  return (a - (s - bb)) + (b - bb) > 0.0 ? up(s) : s;
}
// One unit of rounding inflation for a freshly rounded result.
inline double ulp_of(double v) {
  return std::numeric_limits<double>::epsilon() * std::abs(v) +
         std::numeric_limits<double>::denorm_min();
}

/// A real number known as an approximation plus a non-negative error radius:
/// the true value lies in [value - radius, value + radius].
struct CertifiedReal {
  double value = 0.0;
  double radius = 0.0;

  CertifiedReal() = default;
  CertifiedReal(double v, double r = 0.0);

  static CertifiedReal from_interval(double lo, double hi);

  double lo() const { return down(value - radius); }
  double hi() const { return up(value + radius); }
  bool contains(double x) const { return lo() <= x && x <= hi(); }
};

CertifiedReal operator+(const CertifiedReal& a, const CertifiedReal& b);
CertifiedReal operator-(const CertifiedReal& a, const CertifiedReal& b);
CertifiedReal operator*(const CertifiedReal& a, const CertifiedReal& b);
CertifiedReal operator-(const CertifiedReal& a);
CertifiedReal abs(const CertifiedReal& a);
CertifiedReal max(const CertifiedReal& a, const CertifiedReal& b);
CertifiedReal min(const CertifiedReal& a, const CertifiedReal& b);
// Hull of the two enclosures.
CertifiedReal hull(const CertifiedReal& a, const CertifiedReal& b);

/// Continuity certificate of a function, in one of two formats.
///
/// omega: for eps > 0, center c and radius r, any x, y in B_r(c) with
///        |x - y| <= omega(eps, c, r) satisfy |f(x) - f(y)| <= eps.
/// mu:    |f(x) - f(y)| <= mu(|x - y|) globally, mu positive definite and
///        non-decreasing.
class Modulus {
 public:
  enum class Format { omega, mu };
  using OmegaFn = std::function<double(double, std::span<const double>, double)>;
  using MuFn = std::function<double(double)>;
  using LocalLipschitzFn = std::function<double(std::span<const double>, double)>;

  Modulus();  // Lipschitz with constant 0

  static Modulus omega(OmegaFn fn);
  static Modulus mu(MuFn fn);
  static Modulus lipschitz(double constant);
  // omega-form built from a local Lipschitz bound L(c, r) valid on B_r(c).
  static Modulus local_lipschitz(LocalLipschitzFn fn);

  Format format() const { return format_; }

  /// Input-distance bound delta for output precision eps (modulus_step).
  double step(double eps, std::span<const double> c = {}, double r = 1.0) const;

  /// Upper bound on |f(x) - f(y)| for |x - y| <= t with x, y in B_r(c).
  double variation(double t, std::span<const double> c = {}, double r = 1.0) const;

  /// mu(t); only valid for the mu format.
  double mu_at(double t) const;

  // Set for Lipschitz moduli; lets callers skip bisection.
  double lipschitz_constant() const { return lipschitz_; }

 private:
  Format format_ = Format::mu;
  OmegaFn omega_;
  MuFn mu_;
  LocalLipschitzFn local_;
  double lipschitz_ = std::numeric_limits<double>::quiet_NaN();
};

/// Closed axis-aligned box; an axis may be degenerate (lo == hi).
struct Box {
  Vec lo;
  Vec hi;

  Box() = default;
  Box(Vec lo_, Vec hi_);

  std::size_t dim() const { return lo.size(); }
  Vec center() const;
  double diameter() const;
  bool contains(std::span<const double> x, double tol = 0.0) const;
  // Radius of the largest ball around the origin contained in the box
  // (0 if the origin is outside).
  double inscribed_radius_at_origin() const;
};

/// Closed hypercube H_r(x): center x, side length r > 0.
struct Hypercube {
  Vec center;
  double side = 1.0;

  Hypercube() = default;
  Hypercube(Vec c, double s);

  std::size_t dim() const { return center.size(); }
  Box box() const;
};

/// Finite eps-net of a parent set. Coordinates are snapped to dyadic
/// rationals so node equality is exact.
class FiniteMesh {
 public:
  FiniteMesh() = default;
  FiniteMesh(std::size_t dim, std::vector<double> coords, double resolution);

  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  double resolution() const { return resolution_; }
  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  Vec point_vec(std::size_t i) const;
  const std::vector<double>& coords() const { return coords_; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
  double resolution_ = 0.0;
};

inline constexpr std::size_t kDefaultMeshBudget = std::size_t{1} << 22;

/// Snap to the dyadic grid of spacing 2^-40.
double snap_dyadic(double x);

/// Uniform dyadic grid on the box: every point of the box lies within eps of
/// a node. Per-axis subdivision counts are powers of two, so meshes at finer
/// eps contain the coarser ones. Node order: axis 0 varies slowest.
FiniteMesh build_mesh(const Box& box, double eps, std::size_t budget = kDefaultMeshBudget);
FiniteMesh build_mesh(const Hypercube& cube, double eps, std::size_t budget = kDefaultMeshBudget);

/// eps-net of the closed ball: circumscribed cube mesh, nodes inside kept,
/// nodes within eps outside pulled radially onto the ball.
FiniteMesh build_ball_mesh(std::span<const double> center, double radius, double eps,
                           std::size_t budget = kDefaultMeshBudget);

/// eps-net of the sphere |x - c| = radius (nodes projected radially).
FiniteMesh build_sphere_mesh(std::span<const double> center, double radius, double eps,
                             std::size_t budget = kDefaultMeshBudget);

/// A set with a computable distance function, given by its mesh generator.
class LocatedSet {
 public:
  using Generator = std::function<FiniteMesh(double)>;

  explicit LocatedSet(Generator gen) : gen_(std::move(gen)) {}

  static LocatedSet box(Box b);
  static LocatedSet ball(Vec center, double radius);
  static LocatedSet circle(double cx, double cy, double radius);

  FiniteMesh mesh(double eps) const { return gen_(eps); }

 private:
  Generator gen_;
};

/// Distance from x to A at resolution eps: value is the mesh minimum, the
/// true infimum lies within the returned radius (eps plus rounding).
CertifiedReal located_distance(const LocatedSet& a, std::span<const double> x, double eps);

// Worker count used by the parallel scans in the library. Results never
// depend on it.
void set_worker_count(unsigned n);
unsigned worker_count();
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace certctl
