#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "certctl/danskin.hpp"
#include "doctest.h"

using namespace certctl;
using namespace certctl::danskin;

namespace {

// phi(x, theta) = theta x on Theta = [-1, 1], x in [-2, 2]
ParametricObjective bilinear() {
  ParametricObjective o;
  o.eval = [](std::span<const double> x, std::span<const double> t) { return CertifiedReal(t[0] * x[0]); };
  o.grad_x = [](std::span<const double>, std::span<const double> t) { return Vec{t[0]}; };
  o.modulus_x = Modulus::lipschitz(1.0);
  o.modulus_theta = Modulus::lipschitz(2.0);
  o.grad_modulus = Modulus::lipschitz(1.0);
  return o;
}

// phi(x, theta) = -(theta - x)^2 on Theta = [-2, 2], x in [-1, 1]
ParametricObjective negative_square() {
  ParametricObjective o;
  o.eval = [](std::span<const double> x, std::span<const double> t) {
    const double d = t[0] - x[0];
    return CertifiedReal(-d * d, ulp_of(d * d));
  };
  o.grad_x = [](std::span<const double> x, std::span<const double> t) { return Vec{2.0 * (t[0] - x[0])}; };
  o.modulus_x = Modulus::lipschitz(6.0);
  o.modulus_theta = Modulus::lipschitz(6.0);
  o.grad_modulus = Modulus::lipschitz(2.0 * std::numbers::sqrt2);
  return o;
}

// phi(x, theta) = sin(theta) + x on Theta = [0, pi]
ParametricObjective sine_shift() {
  ParametricObjective o;
  o.eval = [](std::span<const double> x, std::span<const double> t) {
    return CertifiedReal(std::sin(t[0]) + x[0], 4.0 * ulp_of(2.0 + std::abs(x[0])));
  };
  o.grad_x = [](std::span<const double>, std::span<const double>) { return Vec{1.0}; };
  o.modulus_x = Modulus::lipschitz(1.0);
  o.modulus_theta = Modulus::lipschitz(1.0);
  o.grad_modulus = Modulus::lipschitz(0.0);
  return o;
}

ParametricObjective constant(double c) {
  ParametricObjective o;
  o.eval = [c](std::span<const double>, std::span<const double>) { return CertifiedReal(c); };
  o.grad_x = [](std::span<const double> x, std::span<const double>) { return Vec(x.size(), 0.0); };
  o.modulus_x = Modulus::lipschitz(0.0);
  o.modulus_theta = Modulus::lipschitz(0.0);
  o.grad_modulus = Modulus::lipschitz(0.0);
  return o;
}

const ThetaDomain kUnit{Box({-1.0}, {1.0})};
const ThetaDomain kWide{Box({-2.0}, {2.0})};
const ThetaDomain kHalfTurn{Box({0.0}, {std::numbers::pi})};

}  // namespace

TEST_CASE("psi examples") {
  const double eps = 0.01;
  const CertifiedReal a = psi(bilinear(), kUnit, Vec{0.5}, eps);
  CHECK(a.radius <= eps);
  CHECK(a.contains(0.5));
  CHECK(std::abs(a.value - 0.5) <= eps);

  const CertifiedReal b = psi(negative_square(), kWide, Vec{0.3}, eps);
  CHECK(b.radius <= eps);
  CHECK(b.contains(0.0));

  // dense-mesh oracle at eps / 10
  for (double x : {-0.7, 0.0, 0.4}) {
    const CertifiedReal c = psi(sine_shift(), kHalfTurn, Vec{x}, eps);
    double dense = -INFINITY;
    const FiniteMesh m = kHalfTurn.mesh(eps / 10.0);
    for (std::size_t i = 0; i < m.size(); ++i) dense = std::max(dense, std::sin(m.point(i)[0]) + x);
    CHECK(std::abs(c.value - dense) <= eps);
    CHECK(c.contains(1.0 + x));
    CHECK_THROWS_AS((void)psi(sine_shift(), kHalfTurn, Vec{x}, 0.0), ArgumentError);
  }
}

TEST_CASE("delta_optimizers examples") {
  const auto s = delta_optimizers(bilinear(), kUnit, Vec{1.0}, 0.1);
  REQUIRE(!s.points.empty());
  for (const auto& p : s.points) CHECK(p[0] >= 0.9 - s.mesh_eps);
  CHECK(s.points.back()[0] == 1.0);

  // delta beyond twice the range of phi(1, .) keeps everything
  const auto all = delta_optimizers(bilinear(), kUnit, Vec{1.0}, 4.5, 0.05);
  CHECK(all.points.size() == kUnit.mesh(0.05).size());

  const auto flat = delta_optimizers(constant(2.0), kUnit, Vec{0.3}, 1e-9, 0.05);
  CHECK(flat.points.size() == kUnit.mesh(0.05).size());

  CHECK_THROWS_AS((void)delta_optimizers(bilinear(), kUnit, Vec{1.0}, 0.0), ArgumentError);
}

TEST_CASE("delta_optimizers nest in delta at equal mesh") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0), d(0.001, 0.5);
  for (int t = 0; t < 30; ++t) {
    const Vec x{u(rng)};
    double d1 = d(rng), d2 = d(rng);
    if (d1 > d2) std::swap(d1, d2);
    const auto a = delta_optimizers(negative_square(), kWide, x, d1, 0.01);
    const auto b = delta_optimizers(negative_square(), kWide, x, d2, 0.01);
    const std::set<std::size_t> big(b.indices.begin(), b.indices.end());
    for (auto i : a.indices) CHECK(big.count(i) == 1);
    CHECK(!a.points.empty());
  }
}

TEST_CASE("stored optimizers satisfy the certified threshold") {
  const auto s = delta_optimizers(negative_square(), kWide, Vec{0.25}, 0.05);
  for (const auto& v : s.values) CHECK(v.hi() >= s.psi_hat.lo() - 0.05);
}

TEST_CASE("directional_derivative examples") {
  for (double delta : {0.05, 0.3, 0.9}) {
    const auto d = directional_derivative(bilinear(), kUnit, Vec{0.0}, Vec{1.0}, delta);
    CHECK(std::abs(d.value.value - 1.0) <= delta + d.value.radius);
    CHECK(d.witness_theta[0] == 1.0);
  }

  // psi = 0, so the derivative vanishes up to the delta-optimizer width 2 sqrt(delta)
  const double delta = 1e-4;
  for (double v : {-2.0, 0.5, 3.0}) {
    const auto d = directional_derivative(negative_square(), kWide, Vec{0.2}, Vec{v}, delta);
    const double width = std::sqrt(delta + 2.0 * d.set.psi_hat.radius) + d.set.mesh_eps;
    CHECK(std::abs(d.value.value) <= 2.0 * width * std::abs(v) + d.value.radius);
  }

  const auto z = directional_derivative(sine_shift(), kHalfTurn, Vec{0.1}, Vec{0.0}, 0.01);
  CHECK(z.value.value == 0.0);
  CHECK(z.value.radius == 0.0);

  CHECK_THROWS_AS((void)directional_derivative(bilinear(), kUnit, Vec{0.0}, Vec{1.0}, 0.0), ArgumentError);
}

TEST_CASE("gradient matches finite differences of the objective") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto o = negative_square();
  for (int t = 0; t < 200; ++t) {
    const Vec x{u(rng)}, th{2.0 * u(rng)};
    const double h = 1e-3;
    const double fd = (o.eval(Vec{x[0] + h}, th).value - o.eval(x, th).value) / h;
    CHECK(std::abs(fd - o.grad_x(x, th)[0]) <= o.grad_modulus.variation(h) + 1e-9);
  }
}

TEST_CASE("member spread stays within the certified spread bound") {
  const std::vector<double> hs{0.5, 0.25, 0.1, 0.05, 0.01};
  struct Case {
    ParametricObjective o;
    ThetaDomain th;
    double x, v, delta;
  };
  const std::vector<Case> cases{{bilinear(), kUnit, 0.0, 1.0, 0.2},
                                {bilinear(), kUnit, 0.7, -1.0, 0.1},
                                {negative_square(), kWide, 0.3, 1.0, 0.01},
                                {sine_shift(), kHalfTurn, -0.4, 2.0, 0.05}};
  for (const auto& c : cases) {
    const auto rep = finite_difference_audit(c.o, c.th, Vec{c.x}, Vec{c.v}, c.delta, hs);
    CHECK(rep.derivative.spread <= rep.spread_bound);
    CHECK(rep.slack == rep.spread_bound - c.delta);
  }
}

TEST_CASE("audit quotients are sandwiched by the certified bounds") {
  const std::vector<double> hs{1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01};
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.9, 0.9), dv(-2.0, 2.0);
  for (int t = 0; t < 20; ++t) {
    const Vec x{u(rng)}, v{dv(rng)};
    for (const auto& rep : {finite_difference_audit(bilinear(), kUnit, x, v, 0.1, hs),
                            finite_difference_audit(negative_square(), kWide, x, v, 0.01, hs),
                            finite_difference_audit(sine_shift(), kHalfTurn, x, v, 0.05, hs)}) {
      CHECK(rep.sandwich_ok);
      for (const auto& row : rep.rows) {
        CHECK(row.lower <= row.quotient.value);
        if (row.upper_applies) CHECK(row.quotient.value <= row.upper);
      }
    }
  }
}

TEST_CASE("audit examples") {
  const std::vector<double> hs{0.5, 0.1, 0.01, 0.001};
  const auto smooth = finite_difference_audit(bilinear(), kUnit, Vec{1.0}, Vec{1.0}, 0.05, hs);
  CHECK(smooth.rows.back().quotient.value == doctest::Approx(1.0).epsilon(1e-3));

  const auto tent = finite_difference_audit(bilinear(), kUnit, Vec{0.0}, Vec{1.0}, 0.05, hs);
  for (const auto& r : tent.rows) CHECK(r.quotient.value >= 1.0 - r.quotient.radius);
  CHECK(tent.rows.back().quotient.value == doctest::Approx(1.0).epsilon(1e-2));

  const auto flat = finite_difference_audit(constant(1.5), kUnit, Vec{0.2}, Vec{1.0}, 0.05, hs);
  for (const auto& r : flat.rows) CHECK(r.quotient.value == 0.0);

  // steps above 1 are clamped
  const auto clamped = finite_difference_audit(bilinear(), kUnit, Vec{1.0}, Vec{1.0}, 0.05, {4.0, 0.5});
  CHECK(clamped.rows.front().h == 1.0);
  CHECK_THROWS_AS((void)finite_difference_audit(bilinear(), kUnit, Vec{1.0}, Vec{1.0}, 0.05, {0.1, 0.2}),
                  ArgumentError);

  std::ostringstream os;
  write_audit_csv(os, tent);
  CHECK(os.str().rfind("h,quotient,lower,upper\n", 0) == 0);
}

TEST_CASE("psi inherits the x-modulus") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto o = bilinear();
  const Modulus m = psi_modulus(o);
  for (int t = 0; t < 1000; ++t) {
    const Vec x{u(rng)}, y{u(rng)};
    const CertifiedReal px = psi(o, kUnit, x, 0.01), py = psi(o, kUnit, y, 0.01);
    CHECK(std::abs(px.value - py.value) <= m.variation(std::abs(x[0] - y[0])) + px.radius + py.radius);
  }

  // phi(x, theta) = |x| theta on [0, 1]
  ParametricObjective a;
  a.eval = [](std::span<const double> x, std::span<const double> t) { return CertifiedReal(std::abs(x[0]) * t[0]); };
  a.grad_x = [](std::span<const double> x, std::span<const double> t) { return Vec{(x[0] < 0 ? -1.0 : 1.0) * t[0]}; };
  a.modulus_x = Modulus::lipschitz(1.0);
  a.modulus_theta = Modulus::lipschitz(2.0);
  const ThetaDomain half{Box({0.0}, {1.0})};
  for (int t = 0; t < 100; ++t) {
    const Vec x{u(rng)}, y{u(rng)};
    const double q = std::abs(psi(a, half, x, 1e-3).value - psi(a, half, y, 1e-3).value) / std::abs(x[0] - y[0]);
    CHECK(q <= 1.0 + 1e-2);
  }
}
