#include <random>

#include "certctl/errors.hpp"
#include "certctl/forms.hpp"
#include "doctest.h"

using namespace certctl;
using namespace certctl::forms;
using nlohmann::json;

TEST_CASE("registry forms evaluate") {
  const Vec x{0.5, -2.0};
  CHECK(parse(3.0)->value(x) == 3.0);
  CHECK(parse(json::parse(R"({"form":"linear","coeffs":[2,1],"offset":1})"))->value(x) == 0.0);
  CHECK(parse(json::parse(R"({"form":"polynomial","var":1,"coeffs":[1,0,1]})"))->value(x) == 5.0);
  const auto pwl = parse(json::parse(R"({"form":"piecewise_linear","knots":[0,1,2],"values":[0,1,0]})"));
  CHECK((*pwl)(Vec{0.5}).contains(0.5));
  CHECK((*pwl)(Vec{3.0}).contains(0.0));
  const auto s = parse(json::parse(R"({"form":"trig","fn":"cos","amplitude":2,"frequency":3,"phase":0.5})"));
  CHECK((*s)(x).contains(2 * std::cos(1.5 + 0.5)));
  const auto c = parse(json::parse(
      R"({"form":"composition","outer":{"form":"trig"},"inner":{"form":"polynomial","var":1,"coeffs":[0,0,1]}})"));
  CHECK((*c)(x).contains(std::sin(4.0)));
  const auto p = parse(json::parse(R"({"form":"product","factors":[{"form":"linear","coeffs":[1]},2]})"));
  CHECK(p->value(x) == 1.0);
}

TEST_CASE("unknown form lists the registry") {
  try {
    parse(json::parse(R"({"form":"bessel"})"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    for (const auto& n : registry()) CHECK(m.find(n) != std::string::npos);
  }
  CHECK_THROWS_AS(parse(json::parse(R"({"form":"piecewise_linear","knots":[1,0],"values":[0,1]})")), ConfigError);
  CHECK_THROWS_AS(parse(json::parse(R"([1,2])")), ConfigError);
}

TEST_CASE("range encloses sampled values and derivatives match differences") {
  const auto f = parse(json::parse(R"({"form":"sum","terms":[
      {"form":"product","factors":[{"form":"polynomial","var":0,"coeffs":[1,-2,0,1]},{"form":"trig","var":1,"frequency":2}]},
      {"form":"composition","outer":{"form":"trig","fn":"cos"},"inner":{"form":"linear","coeffs":[1,1]}},
      {"form":"piecewise_linear","var":1,"knots":[-1,0,1],"values":[2,-1,3]}]})"));
  const Box box({-1.5, -0.75}, {0.5, 1.25});
  const auto r = f->range(box);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(-1.5, 0.5), uy(-0.75, 1.25);
  const double h = 1e-6;
  for (int i = 0; i < 2000; ++i) {
    const Vec v{ux(rng), uy(rng)};
    const auto e = (*f)(v);
    CHECK(e.lo() >= r.lo());
    CHECK(e.hi() <= r.hi());
    const Vec vh{v[0] + h, v[1]};
    const double fd = (f->value(vh) - f->value(v)) / h;
    CHECK(fd == doctest::Approx(f->derivative(0)->value(v)).epsilon(1e-4).scale(1.0));
  }
  // Gradient bound dominates sampled difference quotients.
  const double g = f->gradient_bound(box, 2);
  for (int i = 0; i < 2000; ++i) {
    const Vec a{ux(rng), uy(rng)}, b{ux(rng), uy(rng)};
    CHECK(std::abs(f->value(a) - f->value(b)) <= g * distance(a, b) + 1e-12);
  }
}

TEST_CASE("modulus and Lie derivative") {
  const auto v = parse(json::parse(R"({"form":"sum","terms":[{"form":"polynomial","coeffs":[0,0,1]},
      {"form":"polynomial","var":1,"coeffs":[0,0,1]}]})"));
  const auto m = modulus(v, 2);
  const Vec c{1.0, 0.0};
  CHECK(m.variation(0.1, c, 0.1) >= 2.2 * 0.1);
  CHECK(m.variation(0.1, c, 0.1) <= 2.3 * 0.1);
  // x' = -x, y' = -y gives Vdot = -2 V.
  const auto vdot = lie_derivative(v, {parse(json::parse(R"({"form":"linear","coeffs":[-1,0]})")),
                                       parse(json::parse(R"({"form":"linear","coeffs":[0,-1]})"))});
  const Vec x{0.3, -0.4};
  CHECK((*vdot)(x).contains(-0.5));
  const auto step = parse(json::parse(R"({"form":"piecewise_linear","knots":[0,1],"values":[0,1]})"))->derivative(0);
  CHECK(step->range(Box({-1.0}, {0.5})).contains(0.0));
  CHECK(step->range(Box({-1.0}, {0.5})).contains(1.0));
  CHECK_THROWS_AS(step->derivative(0), ContractError);
}

TEST_CASE("json round trip") {
  const json j = json::parse(R"({"form":"composition","outer":{"form":"trig","fn":"sin","var":0,"amplitude":1.5,
      "frequency":2.0,"phase":0.25},"inner":{"form":"piecewise_linear","var":1,"knots":[0,1],"values":[1,2]}})");
  const auto f = parse(j);
  const auto g = parse(f->to_json());
  const Vec x{0.0, 0.3};
  CHECK(f->value(x) == g->value(x));
  CHECK(f->to_json() == g->to_json());
}
