#include <random>
#include <sstream>

#include "certctl/selector.hpp"
#include "doctest.h"

using namespace certctl;
using namespace certctl::selector;

namespace {

Block interval(double a, double b) { return {{a}, {b}}; }

Chunk chunk(ScalarFn a, double la, ScalarFn b, double lb) {
  return {std::move(a), std::move(b), Modulus::lipschitz(la), Modulus::lipschitz(lb)};
}

ScalarFn constant(double c) {
  return [c](std::span<const double>) { return c; };
}

ScalarFn identity() {
  return [](std::span<const double> x) { return x[0]; };
}

RegularSVF on_unit(std::vector<Chunk> chunks) {
  RegularSVF f;
  f.blocks.push_back({interval(0.0, 1.0), std::move(chunks)});
  f.lo = 0.0;
  f.hi = 1.0;
  return f;
}

// Two-sided: [0, 1/4] for x < 0 and [3/4, 1] for x > 0.
RegularSVF sign_split() {
  RegularSVF f;
  f.blocks.push_back({interval(-1.0, 0.0), {chunk(constant(0.0), 0, constant(0.25), 0)}});
  f.blocks.push_back({interval(0.0, 1.0), {chunk(constant(0.75), 0, constant(1.0), 0)}});
  f.lo = 0.0;
  f.hi = 1.0;
  return f;
}

double hausdorff(const Intervals& a, const Intervals& b) {
  double h = 0.0;
  for (const auto* pair : {&a, &b}) {
    const Intervals& from = *pair;
    const Intervals& to = pair == &a ? b : a;
    for (const auto& [lo, hi] : from)
      for (int i = 0; i <= 100; ++i) h = std::max(h, interval_distance(lo + (hi - lo) * i / 100.0, to));
  }
  return h;
}

void check_distance_guarantee(const RegularSVF& f, const Selector& s, std::uint64_t seed) {
  const Block box = f.bounding_box();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(box.lo[0], box.hi[0]);
  int tested = 0;
  for (int t = 0; t < 1000; ++t) {
    const Vec x{u(rng)};
    if (s.excluded(x)) continue;
    ++tested;
    const auto v = s(x);
    REQUIRE(v.has_value());
    CHECK(interval_distance(*v, f.at(x)) <= s.epsilon);
  }
  CHECK(tested > 0);
}

}  // namespace

TEST_CASE("volume examples") {
  GeneralizedBlock two{{interval(0.0, 1.0), interval(2.0, 3.0)}};
  CHECK(volume(two).value == 2.0);
  CHECK(volume(two).radius == 0.0);

  GeneralizedBlock empty{{interval(1.0, 0.0)}};
  CHECK(volume(empty).value == 0.0);

  GeneralizedBlock three{{interval(0.0, 0.5), interval(0.5, 0.75), interval(0.75, 0.875)}};
  CHECK(exact_volume(three) == Rational(7, 8));
  CHECK(volume(three).value == 0.875);
  CHECK(volume(three).radius == 0.0);

  // 2-D block volume
  GeneralizedBlock sq{{Block{{0.0, 0.0}, {0.5, 0.25}}}};
  CHECK(exact_volume(sq) == Rational(1, 8));
}

TEST_CASE("volume of generator-backed blocks") {
  GeneralizedBlock g;
  g.generator = [](std::size_t i) {
    return interval(1.0 - std::ldexp(1.0, -static_cast<int>(i)), 1.0 - std::ldexp(1.0, -static_cast<int>(i) - 1));
  };
  g.tail_volume = [](std::size_t n) { return std::ldexp(1.0, -static_cast<int>(n)); };
  g.proper = true;
  const CertifiedReal v = volume(g);
  CHECK(v.contains(1.0));
  CHECK(v.radius <= 1e-11);
  g.proper = false;
  CHECK_THROWS_AS((void)volume(g), ContractError);
}

TEST_CASE("countable_reduction examples") {
  const auto out = countable_reduction({GeneralizedBlock{{interval(0.0, 2.0)}}, GeneralizedBlock{{interval(1.0, 3.0)}}});
  REQUIRE(out.size() == 2);
  CHECK(out[0].blocks.size() == 1);
  REQUIRE(out[1].blocks.size() == 1);
  CHECK(out[1].blocks[0].lo[0] == 2.0);
  CHECK(out[1].blocks[0].hi[0] == 3.0);
  CHECK(exact_volume(out[0]) + exact_volume(out[1]) == 3);

  const std::vector<GeneralizedBlock> disjoint{GeneralizedBlock{{interval(0.0, 1.0)}},
                                               GeneralizedBlock{{interval(1.0, 2.0), interval(5.0, 6.0)}}};
  const auto same = countable_reduction(disjoint);
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE(same[i].blocks.size() == disjoint[i].blocks.size());
    for (std::size_t j = 0; j < same[i].blocks.size(); ++j) {
      CHECK(same[i].blocks[j].lo == disjoint[i].blocks[j].lo);
      CHECK(same[i].blocks[j].hi == disjoint[i].blocks[j].hi);
    }
  }

  const auto dup = countable_reduction({GeneralizedBlock{{interval(0.0, 1.0)}}, GeneralizedBlock{{interval(0.0, 1.0)}}});
  CHECK(dup[0].blocks.size() == 1);
  CHECK(dup[1].blocks.empty());
}

TEST_CASE("countable_reduction on random 2-D boxes is proper and preserves the union") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> q(0, 16);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<GeneralizedBlock> in(4);
    for (auto& gb : in)
      for (int b = 0; b < 3; ++b) {
        int x0 = q(rng), x1 = q(rng), y0 = q(rng), y1 = q(rng);
        if (x0 > x1) std::swap(x0, x1);
        if (y0 > y1) std::swap(y0, y1);
        gb.blocks.push_back(Block{{x0 / 16.0, y0 / 16.0}, {x1 / 16.0, y1 / 16.0}});
      }
    const auto out = countable_reduction(in);
    GeneralizedBlock all;
    for (const auto& gb : out) all.blocks.insert(all.blocks.end(), gb.blocks.begin(), gb.blocks.end());
    CHECK(is_proper(all));
    // union check on cell centers of the 1/16 grid (never on a boundary)
    int mismatches = 0;
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) {
        const Vec c{(i + 0.5) / 16.0, (j + 0.5) / 16.0};
        bool a = false;
        for (const auto& gb : in)
          for (const auto& b : gb.blocks) a |= b.interior_contains(c);
        bool b = false;
        for (const auto& blk : all.blocks) b |= blk.interior_contains(c);
        mismatches += a != b;
      }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("simple_approx examples") {
  SUBCASE("constant map is reproduced on the full domain") {
    const auto f = on_unit({chunk(constant(0.0), 0, constant(0.5), 0)});
    const auto [s, dom] = simple_approx(f, 0.1);
    REQUIRE(s.cells.size() == 1);
    CHECK(s.values[0] == Intervals{{0.0, 0.5}});
    CHECK(exact_volume(dom.base) == 1);
  }
  SUBCASE("[0, x] at delta 1/4 gives four cells") {
    const auto f = on_unit({chunk(constant(0.0), 0, identity(), 1)});
    const auto [s, dom] = simple_approx(f, 0.25);
    CHECK(s.cells.size() == 4);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 1000; ++t) {
      const Vec x{u(rng)};
      CHECK(hausdorff(f.at(x), s.values[*s.cell_of(x)]) <= 0.25);
    }
  }
  SUBCASE("two chunks are frozen separately") {
    const auto f = on_unit({chunk(constant(0.0), 0, constant(0.0), 0), chunk(identity(), 1, constant(1.0), 0)});
    const auto [s, dom] = simple_approx(f, 0.1);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& v : s.values) CHECK(v.size() == 2);
    for (int t = 0; t < 1000; ++t) {
      const Vec x{u(rng)};
      CHECK(hausdorff(f.at(x), s.values[*s.cell_of(x)]) <= 0.1);
    }
  }
  SUBCASE("missing modulus is a contract error") {
    auto f = on_unit({chunk(constant(0.0), 0, identity(), 1)});
    f.blocks[0].chunks[0].beta_modulus.reset();
    CHECK_THROWS_AS((void)simple_approx(f, 0.1), ContractError);
  }
}

TEST_CASE("exception generator respects the volume budget") {
  const auto f = on_unit({chunk(constant(0.0), 0, identity(), 1)});
  const auto [s, dom] = simple_approx(f, 0.01);
  for (double eta : {0.5, 0.1, 0.01, 1e-4}) CHECK(volume(dom.exception(eta)).hi() <= eta);

  RegularSVF g;
  g.blocks.push_back({Block{{0.0, 0.0}, {1.0, 1.0}}, {chunk([](std::span<const double> x) { return 0.5 * x[0] * x[1]; },
                                                           1.0, constant(1.0), 0)}});
  const auto [s2, dom2] = simple_approx(g, 0.1);
  for (double eta : {0.5, 0.05}) CHECK(volume(dom2.exception(eta)).hi() <= eta);
}

TEST_CASE("extract_selector examples") {
  SUBCASE("full interval") {
    const auto f = on_unit({chunk(constant(0.0), 0, constant(1.0), 0)});
    const Selector s = extract_selector(f, 0.25);
    for (double x : {0.0, 0.3, 1.0}) {
      const auto v = s(Vec{x});
      REQUIRE(v.has_value());
      CHECK(*v >= 0.0);
      CHECK(*v <= 1.0);
      CHECK(interval_distance(*v, f.at(Vec{x})) == 0.0);
    }
  }
  SUBCASE("sign-dependent chunk") {
    const auto f = sign_split();
    const Selector s = extract_selector(f, 0.125);
    check_distance_guarantee(f, s, 31);
    CHECK(s.excluded(Vec{0.0}));
    CHECK(*s(Vec{-0.5}) <= 0.25 + 0.125);
    CHECK(*s(Vec{0.5}) >= 0.75 - 0.125);
  }
  SUBCASE("singleton graph gives a staircase") {
    const auto f = on_unit({chunk(identity(), 1, identity(), 1)});
    const Selector s = extract_selector(f, 0.25);
    double sup = 0.0;
    for (int i = 0; i <= 1000; ++i) {
      const Vec x{i / 1000.0};
      if (s.excluded(x)) continue;
      sup = std::max(sup, std::abs(*s(x) - x[0]));
    }
    CHECK(sup <= 0.25);
    check_distance_guarantee(f, s, 32);
  }
}

TEST_CASE("selector stages: properness, nesting and reduction") {
  const auto f = on_unit({chunk(constant(0.0), 0, constant(0.0), 0), chunk(identity(), 1, constant(1.0), 0)});
  const Selector s = extract_selector(f, 0.02);
  const std::size_t cells = s.approx.cells.size();
  for (std::size_t k = 0; k < s.stages.size(); ++k) {
    // Q^k_i families: group cells by chosen index
    std::map<std::size_t, GeneralizedBlock> q;
    for (std::size_t c = 0; c < cells; ++c) q[s.stage_index[k][c]].blocks.push_back(s.approx.cells[c]);
    GeneralizedBlock all;
    for (auto& [i, gb] : q) {
      CHECK(is_proper(gb));
      all.blocks.insert(all.blocks.end(), gb.blocks.begin(), gb.blocks.end());
    }
    CHECK(is_proper(all));
    if (k > 0) {
      const double bound = s.scale * std::ldexp(1.0, -static_cast<int>(k + 1));  // stage k+2
      for (std::size_t c = 0; c < cells; ++c) CHECK(std::abs(s.stages[k][c] - s.stages[k - 1][c]) <= bound);
    }
  }
  check_distance_guarantee(f, s, 33);
  CHECK(volume(s.domain.exception(s.exception_volume)).hi() <= s.exception_volume);
}

TEST_CASE("generic countable_reduction agrees with the per-cell lowest index at stage 2") {
  const auto f = sign_split();
  const Selector s = extract_selector(f, 0.125);
  const std::size_t cells = s.approx.cells.size();
  // A^2_i = cells where r_i = i/8 is within 1/4 - 1/64 of the frozen set
  std::vector<GeneralizedBlock> a(9);
  for (std::size_t i = 0; i <= 8; ++i)
    for (std::size_t c = 0; c < cells; ++c) {
      Intervals unit;
      for (const auto& [lo, hi] : s.approx.values[c]) unit.emplace_back((lo - s.offset) / s.scale, (hi - s.offset) / s.scale);
      if (interval_distance(i / 8.0, unit) <= 0.25 - 1.0 / 64.0) a[i].blocks.push_back(s.approx.cells[c]);
    }
  const auto q = countable_reduction(a);
  for (std::size_t i = 0; i <= 8; ++i) {
    Rational direct = 0;
    for (std::size_t c = 0; c < cells; ++c)
      if (s.stage_index[0][c] == i) direct += s.approx.cells[c].exact_volume();
    CHECK(exact_volume(q[i]) == direct);
  }
}

TEST_CASE("selector with non-unit codomain is rescaled and restored") {
  RegularSVF f;
  f.blocks.push_back({interval(0.0, 1.0), {chunk([](std::span<const double> x) { return 3.0 * x[0] - 1.0; }, 3.0,
                                                 [](std::span<const double> x) { return 3.0 * x[0] - 0.5; }, 3.0)}});
  f.lo = -1.0;
  f.hi = 2.5;
  const Selector s = extract_selector(f, 0.1);
  check_distance_guarantee(f, s, 34);
}

TEST_CASE("refine_selector examples") {
  const std::vector<double> eps{0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625};
  SUBCASE("full interval stays constant") {
    const auto f = on_unit({chunk(constant(0.0), 0, constant(1.0), 0)});
    const InverseFn inv = [](double, double) { return GeneralizedBlock{{interval(0.0, 1.0)}}; };
    const auto r = refine_selector(f, inv, eps);
    for (double d : r.cauchy) CHECK(d == 0.0);
  }
  SUBCASE("singleton graph converges") {
    const auto f = on_unit({chunk(identity(), 1, identity(), 1)});
    const InverseFn inv = [](double r, double rho) {
      return GeneralizedBlock{{interval(std::max(0.0, r - rho), std::min(1.0, r + rho))}};
    };
    const auto r = refine_selector(f, inv, eps);
    REQUIRE(r.cauchy.size() == eps.size() - 1);
    for (std::size_t k = 0; k < r.cauchy.size(); ++k) {
      CHECK(r.cauchy[k] <= r.cauchy_bound[k]);
      CHECK(r.cauchy[k] <= 2.0 * eps[k]);
    }
    for (std::size_t k = 0; k < eps.size(); ++k) check_distance_guarantee(f, r.selectors[k], 40 + k);
  }
  SUBCASE("two points stabilize on one branch") {
    const auto f = on_unit({chunk(constant(0.0), 0, constant(0.0), 0), chunk(constant(1.0), 0, constant(1.0), 0)});
    const InverseFn inv = [](double r, double rho) {
      return std::min(r, 1.0 - r) <= rho ? GeneralizedBlock{{interval(0.0, 1.0)}} : GeneralizedBlock{};
    };
    const auto r = refine_selector(f, inv, eps);
    const auto& last = r.selectors.back();
    for (std::size_t k = 2; k < r.selectors.size(); ++k)
      for (std::size_t c = 0; c < last.cell_value.size(); ++c)
        CHECK(r.selectors[k].cell_value[c] == last.cell_value[c]);
    CHECK(last.cell_value[0] == 0.0);
  }
  SUBCASE("inconsistent inverse is rejected") {
    const auto f = on_unit({chunk(identity(), 1, identity(), 1)});
    const InverseFn wrong = [](double, double) { return GeneralizedBlock{}; };
    CHECK_THROWS_AS((void)refine_selector(f, wrong, eps), ContractError);
  }
}

TEST_CASE("selector export lists one row per cell") {
  const Selector s = extract_selector(sign_split(), 0.125);
  std::ostringstream os;
  write_selector(os, s);
  const std::string text = os.str();
  CHECK(text.rfind("certctl-selector 1\n", 0) == 0);
  std::size_t rows = 0;
  for (char ch : text) rows += ch == '\n';
  CHECK(rows == 4 + s.approx.cells.size());
}
