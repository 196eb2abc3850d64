#include <random>
#include <sstream>

#include "certctl/trajectories.hpp"
#include "doctest.h"

using namespace certctl;
using namespace certctl::traj;

namespace {

Box line(double r) { return Box({-r}, {r}); }

RegularRHS linear(double a, double horizon, double r = 10.0) {
  return RegularRHS::autonomous(
      1, line(r), horizon, [a](std::span<const double> x, double, std::span<double> out) { out[0] = a * x[0]; },
      std::abs(a));
}

RegularRHS tent() {
  RegularRHS r;
  r.dim = 1;
  r.state_box = line(5.0);
  r.blocks.push_back({0.0, 1.0, [](std::span<const double>, double, std::span<double> o) { o[0] = 1.0; }, 0.0, {}});
  r.blocks.push_back({1.0, 2.0, [](std::span<const double>, double, std::span<double> o) { o[0] = -1.0; }, 0.0, {}});
  return r;
}

// Simpson re-integration of f along the piecewise-linear solution.
double reintegrate_endpoint(const RegularRHS& rhs, const ExtendedSolution& sol) {
  double acc = sol.values.front()[0];
  double out = 0.0;
  auto eval = [&](double t, double x) {
    const double tt = std::min(t, rhs.blocks.back().t1);
    for (const auto& b : rhs.blocks)
      if (tt >= b.t0 && tt <= b.t1) {
        b.field(std::span<const double>(&x, 1), tt, std::span<double>(&out, 1));
        return out;
      }
    return 0.0;
  };
  for (std::size_t k = 0; k + 1 < sol.times.size(); ++k) {
    const double a = sol.times[k], b = sol.times[k + 1], m = 0.5 * (a + b);
    const double xa = sol.values[k][0], xb = sol.values[k + 1][0];
    const double fa = eval(a + 1e-15 * (b - a), xa), fb = eval(b - 1e-15 * (b - a), xb);
    acc += (b - a) / 6.0 * (fa + 4.0 * eval(m, 0.5 * (xa + xb)) + fb);
  }
  return acc;
}

}  // namespace

TEST_CASE("decay to exp(-1)") {
  const auto rhs = linear(-1.0, 1.0);
  const double eps = 1e-6;
  const auto sol = picard_solve(rhs, {1.0}, 1.0, eps);
  CHECK(sol.error_bound.hi() <= eps);
  CHECK(std::abs(sol.final_state()[0] - std::exp(-1.0)) <= sol.error_bound.hi());
  CHECK(sol.times.back() == 1.0);
  CHECK(sol.windows >= 2);
  for (double r : sol.contraction) CHECK(r <= 0.5);
  CHECK(std::abs(reintegrate_endpoint(rhs, sol) - sol.final_state()[0]) <= 2.0 * sol.error_bound.hi());
}

TEST_CASE("tent right-hand side") {
  const auto rhs = tent();
  const double eps = 1e-8;
  const auto sol = picard_solve(rhs, {0.0}, 2.0, eps);
  CHECK(std::abs(sol.at(1.0)[0] - 1.0) <= eps);
  CHECK(std::abs(sol.final_state()[0]) <= eps);
  CHECK(std::abs(sol.at(0.5)[0] - 0.5) <= eps);
  CHECK_FALSE(sol.validity.contains(std::vector<double>{1.0}, 1e-3));
  CHECK(sol.validity.contains(std::vector<double>{0.5}, 1e-3));
  CHECK(sol.validity.contains(std::vector<double>{1.01}, 1e-3));
  CHECK(selector::volume(sol.validity.exception(1e-3)).hi() <= 1e-3);
  // The exclusion width is a property of the representation only.
  const auto again = picard_solve(rhs, {0.0}, 2.0, eps);
  CHECK(again.final_state() == sol.final_state());
  CHECK(selector::volume(sol.validity.exception(5e-4)).hi() <= 5e-4);
}

TEST_CASE("zero field gives the constant trajectory") {
  const auto rhs = RegularRHS::autonomous(
      2, Box({-1, -1}, {1, 1}), 3.0, [](std::span<const double>, double, std::span<double> o) { o[0] = o[1] = 0.0; },
      0.0);
  const auto sol = picard_solve(rhs, {0.25, -0.5}, 3.0, 1e-9);
  for (const auto& v : sol.values) CHECK(v == Vec{0.25, -0.5});
  CHECK(sol.error_bound.hi() <= 1e-9);
}

TEST_CASE("time-dependent block uses the t-modulus") {
  RegularRHS r;
  r.dim = 1;
  r.state_box = line(5.0);
  r.blocks.push_back(
      {0.0, 2.0, [](std::span<const double>, double t, std::span<double> o) { o[0] = std::cos(t); }, 0.0,
       Modulus::lipschitz(1.0)});
  const auto sol = picard_solve(r, {0.0}, 2.0, 1e-5);
  CHECK(std::abs(sol.final_state()[0] - std::sin(2.0)) <= sol.error_bound.hi());
}

TEST_CASE("dependence modulus") {
  const auto flat = RegularRHS::autonomous(
      1, line(5.0), 1.0, [](std::span<const double>, double, std::span<double> o) { o[0] = 1.0; }, 0.0);
  const auto id = dependence_modulus(flat, 1.0);
  CHECK(id.variation(0.3) == 0.3);
  const double eps = 1e-5;
  const auto a = picard_solve(flat, {0.0}, 1.0, eps), b = picard_solve(flat, {0.3}, 1.0, eps);
  CHECK(std::abs(b.final_state()[0] - a.final_state()[0] - 0.3) <= 2 * eps);

  const auto grow = linear(1.0, 1.0);
  const auto mu = dependence_modulus(grow, 1.0);
  const auto g0 = picard_solve(grow, {1.0}, 1.0, eps), g1 = picard_solve(grow, {1.1}, 1.0, eps);
  const double div = std::abs(g1.final_state()[0] - g0.final_state()[0]);
  CHECK(div == doctest::Approx(0.1 * std::exp(1.0)).epsilon(1e-3));
  CHECK(div <= mu.variation(0.1) + 2 * eps);

  const auto shrink = linear(-1.0, 1.0);
  const auto s0 = picard_solve(shrink, {1.0}, 1.0, eps), s1 = picard_solve(shrink, {1.1}, 1.0, eps);
  CHECK(std::abs(s1.final_state()[0] - s0.final_state()[0]) <= 0.1);
}

TEST_CASE("Gronwall bound over random Lipschitz systems") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double eps = 1e-4;
  for (int trial = 0; trial < 50; ++trial) {
    const double a11 = u(rng), a12 = u(rng), a21 = u(rng), a22 = u(rng), c = u(rng);
    const double lip = std::sqrt(a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22) + std::abs(c);
    const auto rhs = RegularRHS::autonomous(
        2, Box({-50, -50}, {50, 50}), 1.0,
        [=](std::span<const double> x, double, std::span<double> o) {
          o[0] = a11 * x[0] + a12 * x[1] + c * std::sin(x[1]);
          o[1] = a21 * x[0] + a22 * x[1];
        },
        lip);
    CHECK(rhs.lipschitz_sampled(50, trial));
    const Vec x0{u(rng), u(rng)}, x1{x0[0] + 0.05 * u(rng), x0[1] + 0.05 * u(rng)};
    const auto s0 = picard_solve(rhs, x0, 1.0, eps), s1 = picard_solve(rhs, x1, 1.0, eps);
    const double div = distance(s0.final_state(), s1.final_state());
    CHECK(div <= dependence_modulus(rhs, 1.0).variation(distance(x0, x1)) + 2 * eps);
    for (double r : s0.contraction) CHECK(r <= 0.5);
  }
}

TEST_CASE("leaving the state box is a domain exit") {
  const auto rhs = RegularRHS::autonomous(
      1, line(1.0), 2.0, [](std::span<const double>, double, std::span<double> o) { o[0] = 1.0; }, 0.0);
  try {
    picard_solve(rhs, {0.0}, 2.0, 1e-6);
    FAIL("expected DomainExitError");
  } catch (const DomainExitError& e) {
    CHECK(e.exit_time >= 1.0);
    CHECK(e.exit_time <= 1.5);
  }
  CHECK_THROWS_AS(picard_solve(rhs, {3.0}, 2.0, 1e-6), ArgumentError);
}

TEST_CASE("unreachable eps is a resource error") {
  SolveOptions opts;
  opts.step_budget = 1000;
  CHECK_THROWS_AS(picard_solve(linear(-1.0, 1.0), {1.0}, 1.0, 1e-9, opts), ResourceError);
}

TEST_CASE("sampled Lipschitz check detects a wrong constant") {
  auto rhs = linear(-3.0, 1.0);
  CHECK(rhs.lipschitz_sampled(100, 1));
  rhs.blocks[0].lipschitz_x = 1.0;
  CHECK_FALSE(rhs.lipschitz_sampled(100, 1));
}

namespace {

ControlledRHS integrator_system() {
  ControlledRHS f;
  f.dim = 1;
  f.control_dim = 1;
  f.state_box = line(5.0);
  f.field = [](std::span<const double>, std::span<const double> u, double, std::span<double> o) { o[0] = u[0]; };
  f.lipschitz_x = 0.0;
  f.lipschitz_u = 1.0;
  return f;
}

}  // namespace

TEST_CASE("sample-and-hold follows the exact recursion") {
  const double eta = 0.1, eps = 1e-9;
  SampleHoldPolicy p{[](std::span<const double> x) { return Vec{-x[0]}; }, eta, 1.0};
  const auto sol = sample_hold_trajectory(integrator_system(), p, {1.0}, 1.0, eps);
  double x = 1.0;
  for (int k = 1; k <= 10; ++k) {
    x *= 1.0 - eta;
    CHECK(std::abs(sol.at(k * eta)[0] - x) <= sol.error_bound.hi() + 1e-12);
  }
  CHECK(sol.error_bound.hi() <= eps);
  CHECK(sol.controls.size() == sol.times.size());
  CHECK(sol.controls.front()[0] == -1.0);
}

TEST_CASE("zero policy and single held interval") {
  SampleHoldPolicy zero{[](std::span<const double>) { return Vec{0.0}; }, 0.1, std::nullopt};
  const auto sol = sample_hold_trajectory(integrator_system(), zero, {0.7}, 1.0, 1e-9);
  for (const auto& v : sol.values) CHECK(v[0] == 0.7);

  SampleHoldPolicy once{[](std::span<const double> x) { return Vec{-x[0]}; }, 5.0, std::nullopt};
  const auto one = sample_hold_trajectory(integrator_system(), once, {1.0}, 1.0, 1e-9);
  for (const auto& u : one.controls) CHECK(u[0] == -1.0);
  CHECK(std::abs(one.final_state()[0]) <= 1e-9);
  CHECK(one.validity.exception(1e-3).blocks.empty());
}

TEST_CASE("trajectory CSV") {
  SampleHoldPolicy p{[](std::span<const double> x) { return Vec{-x[0]}; }, 0.5, std::nullopt};
  const auto sol = sample_hold_trajectory(integrator_system(), p, {1.0}, 1.0, 1e-6);
  std::ostringstream os;
  write_trajectory_csv(os, sol);
  const std::string text = os.str();
  CHECK(text.substr(0, text.find('\n')) == "t,x1,u1,error");
  const auto lines = std::count(text.begin(), text.end(), '\n');
  CHECK(static_cast<std::size_t>(lines) == sol.times.size() + 1);
}
