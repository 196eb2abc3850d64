#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "certctl/evt.hpp"
#include "doctest.h"

using namespace certctl;
using namespace certctl::evt;

namespace {

PolicyClass unit_class(double l, double k) {
  PolicyClass c;
  c.domain = Hypercube({0.5}, 1.0);
  c.lipschitz = l;
  c.bound = k;
  return c;
}

// Random L-Lipschitz function on [0, 1] bounded by K: piecewise linear with
// random slopes, clamped to [-K, K].
std::function<double(double)> random_lipschitz(std::mt19937_64& rng, double l, double k) {
  std::uniform_real_distribution<double> slope(-l, l), start(-k, k);
  std::vector<double> knots{0.0}, vals{start(rng)};
  for (int i = 1; i <= 8; ++i) {
    knots.push_back(i / 8.0);
    vals.push_back(vals.back() + slope(rng) / 8.0);
  }
  return [=](double x) {
    std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(x * 8.0), 7);
    const double t = (x - knots[i]) * 8.0;
    return std::clamp(vals[i] + t * (vals[i + 1] - vals[i]), -k, k);
  };
}

double nearest_grid(const std::vector<double>& g, double v) {
  double best = g.front();
  for (double x : g)
    if (std::abs(x - v) < std::abs(best - v)) best = x;
  return best;
}

// Midpoint quadrature of (kappa(x) - a x)^2 on [0, 1]; radius from the
// Lipschitz constant of the integrand.
Functional quadratic_tracking(double a, double l, double k) {
  const int cells = 64;
  const double lip_g = 2.0 * (k + std::abs(a)) * (l + std::abs(a));
  Functional j;
  j.evaluate = [=](const PiecewisePolicy& p) {
    double s = 0.0;
    for (int i = 0; i < cells; ++i) {
      const double x = (i + 0.5) / cells;
      const double e = p(Vec{x})[0] - a * x;
      s += e * e;
    }
    return CertifiedReal(s / cells, lip_g / (4.0 * cells) + 1e-12);
  };
  j.modulus = Modulus::lipschitz(2.0 * k + 2.0 * std::abs(a));
  return j;
}

Functional point_tracking(double x0, double c) {
  Functional j;
  j.evaluate = [=](const PiecewisePolicy& p) { return CertifiedReal(std::abs(p(Vec{x0})[0] - c)); };
  j.modulus = Modulus::lipschitz(1.0);
  return j;
}

Functional sup_norm(double l) {
  const int pts = 101;
  Functional j;
  j.evaluate = [=](const PiecewisePolicy& p) {
    double s = 0.0;
    for (int i = 0; i < pts; ++i) s = std::max(s, std::abs(p(Vec{i / (pts - 1.0)})[0]));
    return CertifiedReal(s, l * 0.5 / (pts - 1.0) + 1e-12);
  };
  j.modulus = Modulus::lipschitz(1.0);
  return j;
}

}  // namespace

TEST_CASE("lipschitz_extend examples") {
  const auto id = lipschitz_extend({{0.0}, {1.0}}, {{0.0}, {1.0}}, 1.0);
  for (double x : {0.0, 0.25, 0.5, 0.9, 1.0}) CHECK(id(Vec{x})[0] == doctest::Approx(x));

  // single node: exact at the node; constant when L = 0
  const auto c = lipschitz_extend({{0.3, 0.1}}, {{2.5}}, 4.0);
  CHECK(c(Vec{0.3, 0.1})[0] == 2.5);
  const auto flat = lipschitz_extend({{0.3, 0.1}}, {{2.5}}, 0.0);
  CHECK(flat(Vec{-1.0, 7.0})[0] == 2.5);

  const auto tent = lipschitz_extend({{0.0}, {1.0}}, {{0.0}, {0.0}}, 1.0);
  CHECK(tent(Vec{0.5})[0] == doctest::Approx(-0.5));
  CHECK(tent(Vec{0.0})[0] == 0.0);
  CHECK(tent(Vec{1.0})[0] == 0.0);
}

TEST_CASE("lipschitz_extend rejects incompatible data and names the pair") {
  try {
    (void)lipschitz_extend({{0.0}, {0.5}, {1.0}}, {{0.0}, {0.1}, {2.0}}, 1.0);
    FAIL("expected ArgumentError");
  } catch (const ArgumentError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("nodes 0 and 2") != std::string::npos);
  }
}

TEST_CASE("extension agrees at nodes and respects the constant") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double l = 0.5 + trial * 0.1;
    std::vector<Vec> nodes, vals;
    // values of a known L-Lipschitz map (per coordinate) are compatible
    const Vec a{u(rng), u(rng)}, b{u(rng), u(rng)};
    for (int i = 0; i < 12; ++i) {
      Vec x{u(rng), u(rng)};
      nodes.push_back(x);
      vals.push_back({l * std::abs(x[0] - a[0]) / std::sqrt(2.0) + l * std::abs(x[1] - a[1]) / std::sqrt(2.0),
                      -l * distance(x, b)});
    }
    const auto ext = lipschitz_extend(nodes, vals, l);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Vec v = ext(nodes[i]);
      CHECK(std::abs(v[0] - vals[i][0]) <= 4.0 * ulp_of(vals[i][0]));
      CHECK(std::abs(v[1] - vals[i][1]) <= 4.0 * ulp_of(vals[i][1]));
    }
    for (int s = 0; s < 200; ++s) {
      const Vec x{u(rng), u(rng)}, y{u(rng), u(rng)};
      const Vec fx = ext(x), fy = ext(y);
      const double d = distance(x, y);
      CHECK(std::abs(fx[0] - fy[0]) <= l * d * (1 + 1e-12));
      CHECK(distance(fx, fy) <= l * std::sqrt(2.0) * d * (1 + 1e-12));
    }
  }
}

TEST_CASE("net for n=m=1, L=1, K=1, eps=1 is small and covers random admissible functions") {
  const auto net = enumerate_policy_net(unit_class(1.0, 1.0), 1.0);
  CHECK(net.size() <= 3);
  std::mt19937_64 rng(100);
  for (int f = 0; f < 100; ++f) {
    const auto g = random_lipschitz(rng, 1.0, 1.0);
    double best = INFINITY;
    for (const auto& p : net) {
      double sup = 0.0;
      for (int i = 0; i <= 400; ++i) sup = std::max(sup, std::abs(p(Vec{i / 400.0})[0] - g(i / 400.0)));
      best = std::min(best, sup);
    }
    CHECK(best <= 1.0);
  }
}

TEST_CASE("finer net contains the snapped member of every random admissible function") {
  const PolicyClass cls = unit_class(1.0, 1.0);
  const double eps = 0.5;
  const NetLayout lay = net_layout(cls, eps);
  const auto net = enumerate_policy_net(cls, eps);
  std::map<std::vector<double>, std::size_t> index;
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto v = net[i].extension().values();
    index.emplace(std::vector<double>(v.begin(), v.end()), i);
  }
  CHECK(index.size() == net.size());
  std::mt19937_64 rng(101);
  for (int f = 0; f < 100; ++f) {
    const auto g = random_lipschitz(rng, 1.0, 1.0);
    std::vector<double> key;
    for (std::size_t i = 0; i < lay.nodes->size(); ++i)
      key.push_back(nearest_grid(lay.value_grid, g(lay.nodes->point(i)[0])));
    auto it = index.find(key);
    REQUIRE(it != index.end());
    const auto& p = net[it->second];
    double sup = 0.0;
    for (int i = 0; i <= 1000; ++i) sup = std::max(sup, std::abs(p(Vec{i / 1000.0})[0] - g(i / 1000.0)));
    CHECK(sup <= eps);
  }
}

TEST_CASE("net members stay on the value mesh, bounded and compatible") {
  const PolicyClass cls = unit_class(1.0, 1.0);
  const NetLayout lay = net_layout(cls, 0.5);
  const auto net = enumerate_policy_net(cls, 0.5);
  const std::set<double> grid(lay.value_grid.begin(), lay.value_grid.end());
  const FiniteMesh& nodes = *lay.nodes;
  for (std::size_t k = 0; k < net.size(); k += 97) {
    const auto& p = net[k];
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      CHECK(grid.count(p.extension().value(i)[0]) == 1);
      for (std::size_t j = i + 1; j < nodes.size(); ++j)
        CHECK(std::abs(p.extension().value(i)[0] - p.extension().value(j)[0]) <=
              distance(nodes.point(i), nodes.point(j)) + lay.compatibility_slack + 1e-12);
    }
    for (int s = 0; s <= 50; ++s) CHECK(std::abs(p(Vec{s / 50.0})[0]) <= 1.0);
  }
}

TEST_CASE("degenerate classes") {
  auto zero = enumerate_policy_net(unit_class(1.0, 0.0), 0.1);
  REQUIRE(zero.size() == 1);
  CHECK(zero[0](Vec{0.3})[0] == 0.0);

  const PolicyClass flat = unit_class(0.0, 1.0);
  const NetLayout lay = net_layout(flat, 0.5);
  const auto consts = enumerate_policy_net(flat, 0.5);
  CHECK(consts.size() == lay.value_grid.size());
  for (std::size_t i = 0; i < consts.size(); ++i) {
    const double v = consts[i](Vec{0.0})[0];
    CHECK(consts[i](Vec{1.0})[0] == v);
    CHECK(v == lay.value_grid[i]);
  }
}

TEST_CASE("net budget overflow reports the count formula") {
  try {
    (void)enumerate_policy_net(unit_class(1.0, 1.0), 0.05, 100000);
    FAIL("expected ResourceError");
  } catch (const ResourceError& e) {
    CHECK(std::string(e.what()).find("|K0|^N") != std::string::npos);
  }
}

TEST_CASE("epsilon_minimize: sup-norm functional returns a near-zero policy") {
  const auto r = epsilon_minimize(sup_norm(0.5), unit_class(0.5, 1.0), 0.5);
  CHECK(r.value.value <= 0.5);
  CHECK(r.value.value - 0.5 <= 0.0);
}

TEST_CASE("epsilon_minimize at the literal quadratic example exceeds the default budget") {
  CHECK_THROWS_AS((void)epsilon_minimize(quadratic_tracking(1.0, 1.0, 1.0), unit_class(1.0, 1.0), 0.2),
                  ResourceError);
}

TEST_CASE("epsilon_minimize: quadratic tracking is net-minimal and eps-optimal") {
  const PolicyClass cls = unit_class(0.25, 0.5);
  const Functional j = quadratic_tracking(0.25, 0.25, 0.5);
  const double eps = 0.6;
  const auto r = epsilon_minimize(j, cls, eps);
  CHECK(r.value.value - eps <= 0.0);  // true infimum 0 at x/4

  const auto net = enumerate_policy_net(cls, r.net_precision);
  REQUIRE(net.size() == r.net_size);
  std::size_t best = 0;
  double best_v = INFINITY;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const double v = j.evaluate(net[i]).value;
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  CHECK(best == r.index);
  CHECK(best_v == r.value.value);
}

TEST_CASE("epsilon_minimize: eps-guarantee over randomized point-tracking instances") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> x0(0.0, 1.0), c(-1.0, 1.0);
  const PolicyClass cls = unit_class(0.5, 1.0);
  for (int t = 0; t < 50; ++t) {
    const auto r = epsilon_minimize(point_tracking(x0(rng), c(rng)), cls, 0.5);
    CHECK(r.value.value - 0.5 <= 0.0);  // infimum 0 at the constant c
  }
}

TEST_CASE("epsilon_minimize: shrinking eps does not raise the value by more than the old eps") {
  const PolicyClass cls = unit_class(0.25, 0.5);
  const Functional j = quadratic_tracking(0.25, 0.25, 0.5);
  const auto coarse = epsilon_minimize(j, cls, 0.8);
  const auto fine = epsilon_minimize(j, cls, 0.6);
  CHECK(fine.value.value <= coarse.value.value + 0.8);
}

TEST_CASE("epsilon_minimize: constant functional and the eps >= 2K shortcut") {
  Functional j;
  j.evaluate = [](const PiecewisePolicy&) { return CertifiedReal(3.0); };
  j.modulus = Modulus::lipschitz(0.0);
  const auto r = epsilon_minimize(j, unit_class(1.0, 1.0), 0.1);
  CHECK(std::abs(r.value.value - 3.0) <= 0.1);

  const auto d = epsilon_minimize(sup_norm(1.0), unit_class(1.0, 0.25), 0.5);
  CHECK(d.degenerate);
  CHECK(d.value.radius >= 0.25);
  CHECK(d.policy(Vec{0.7})[0] == 0.0);
}

TEST_CASE("mollify: constants are preserved") {
  const auto c = lipschitz_extend({{0.0}}, {{0.75}}, 0.0);
  const SmoothPolicy s = mollify(PiecewisePolicy(c, 1.0), 2, 0.1);
  for (double x : {0.0, 0.3, 1.0}) CHECK(s(Vec{x})[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK_THROWS_AS((void)mollify(PiecewisePolicy(c, 1.0), 2, 0.0), ArgumentError);
}

TEST_CASE("mollify: absolute value at the kink") {
  const auto ext = lipschitz_extend({{-1.0}, {1.0}}, {{1.0}, {1.0}}, 1.0);
  const PiecewisePolicy absx(ext, 2.0);
  CHECK(absx(Vec{-0.3})[0] == doctest::Approx(0.3));
  const double w = 0.1;
  const SmoothPolicy s = mollify(absx, 2, w);
  const double v0 = s(Vec{0.0})[0];
  CHECK(v0 > 0.0);
  CHECK(v0 <= w);
  // symmetric, so the derivative at 0 vanishes
  const double h = 1e-4;
  CHECK(std::abs(s(Vec{h})[0] - s(Vec{-h})[0]) / (2 * h) <= 1e-6);
}

TEST_CASE("mollify: deviation stays within L sqrt(m) w") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  std::vector<Vec> nodes, vals;
  double v = 0.0;
  for (int i = 0; i <= 16; ++i) {
    nodes.push_back({i / 16.0});
    vals.push_back({v});
    v += u(rng);
  }
  const PiecewisePolicy p(lipschitz_extend(nodes, vals, 1.0), 1.0);
  const SmoothPolicy s = mollify(p, 3, 0.01);
  CHECK(s.deviation_bound() <= 0.0100001);
  double dev = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    const Vec x{i / 2000.0};
    dev = std::max(dev, std::abs(s(x)[0] - p(x)[0]));
  }
  CHECK(dev <= 0.01);
}

TEST_CASE("policy text round-trip is bit-exact") {
  const PolicyClass cls = unit_class(1.0, 1.0);
  const auto net = enumerate_policy_net(cls, 0.5);
  const auto& p = net[net.size() / 3];
  std::stringstream ss;
  write_policy(ss, p);
  const PiecewisePolicy q = read_policy(ss);
  CHECK(q.bound() == p.bound());
  CHECK(q.extension().lipschitz() == p.extension().lipschitz());
  REQUIRE(q.extension().nodes().size() == p.extension().nodes().size());
  for (std::size_t i = 0; i < p.extension().nodes().size(); ++i) {
    CHECK(q.extension().nodes().point(i)[0] == p.extension().nodes().point(i)[0]);
    CHECK(q.extension().value(i)[0] == p.extension().value(i)[0]);
  }
  for (int s = 0; s <= 20; ++s) CHECK(q(Vec{s / 20.0})[0] == p(Vec{s / 20.0})[0]);
  std::stringstream bad("certctl-policy 1\ndims 1 1\nlipschitz zz\n");
  CHECK_THROWS_AS((void)read_policy(bad), ArgumentError);
}
