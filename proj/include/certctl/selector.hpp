#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "certctl/core.hpp"

namespace certctl::selector {

using Rational = boost::multiprecision::cpp_rational;

/// Closed box with dyadic vertices; empty when lo > hi on some axis.
struct Block {
  Vec lo;
  Vec hi;

  std::size_t dim() const { return lo.size(); }
  bool empty() const;
  bool contains(std::span<const double> x) const;
  bool interior_contains(std::span<const double> x) const;
  Rational exact_volume() const;
};

/// Interiors are disjoint (exact).
bool interior_disjoint(const Block& a, const Block& b);

/// A \ B as interior-disjoint boxes.
std::vector<Block> subtract(const Block& a, const Block& b);

/// Finite list of blocks, optionally continued by a generator.
struct GeneralizedBlock {
  std::vector<Block> blocks;
  // Blocks after the explicit list; tail_volume(n) bounds the volume of
  // generated blocks with index >= n.
  std::function<Block(std::size_t)> generator;
  std::function<double(std::size_t)> tail_volume;
  bool locally_finitely_enumerable = true;
  bool proper = false;

  bool finite() const { return !generator; }
  bool contains(std::span<const double> x) const;  // explicit blocks only
};

/// Exact pairwise interior-disjointness of the explicit blocks.
bool is_proper(const GeneralizedBlock& gb);

/// Sum of block volumes: exact for finite input, truncated with a tail
/// radius for proper generator-backed input.
CertifiedReal volume(const GeneralizedBlock& gb);
Rational exact_volume(const GeneralizedBlock& gb);

/// Q_k = A_k minus the earlier pieces; output blocks pairwise interior-disjoint.
std::vector<GeneralizedBlock> countable_reduction(const std::vector<GeneralizedBlock>& gbs);

/// X minus the exception set, where the exception at eta has volume <= eta.
struct RepresentableDomain {
  GeneralizedBlock base;
  std::function<GeneralizedBlock(double)> exception;

  bool contains(std::span<const double> x, double eta) const;
};

using ScalarFn = std::function<double(std::span<const double>)>;

/// [alpha(x), beta(x)] on one domain block.
struct Chunk {
  ScalarFn alpha;
  ScalarFn beta;
  std::optional<Modulus> alpha_modulus;
  std::optional<Modulus> beta_modulus;
};

struct SvfBlock {
  Block box;
  std::vector<Chunk> chunks;
};

using Intervals = std::vector<std::pair<double, double>>;

/// Regular set-valued map: union of chunks on each domain block. lo/hi bound
/// every value of the map.
struct RegularSVF {
  std::vector<SvfBlock> blocks;
  double lo = 0.0;
  double hi = 1.0;

  Block bounding_box() const;
  // Chunk intervals at x from the first block containing it.
  Intervals at(std::span<const double> x) const;
};

/// Distance from r to a union of closed intervals.
double interval_distance(double r, const Intervals& set);

/// Per-cell frozen value sets (dyadic interval unions).
struct SimpleSVF {
  std::vector<Block> cells;
  std::vector<Intervals> values;
  std::vector<double> cell_error;  // Hausdorff bound per cell
  double hausdorff_bound = 0.0;

  std::optional<std::size_t> cell_of(std::span<const double> x) const;
};

inline constexpr std::size_t kDefaultCellBudget = std::size_t{1} << 20;

/// Cell exception generator: slabs around internal cell facets, volume <= eta.
std::function<GeneralizedBlock(double)> facet_exception(const std::vector<Block>& cells, const Block& outer);

std::pair<SimpleSVF, RepresentableDomain> simple_approx(const RegularSVF& f, double delta,
                                                        std::size_t cell_budget = kDefaultCellBudget);

struct SelectorPiece {
  GeneralizedBlock region;
  double value = 0.0;
};

struct Selector {
  RepresentableDomain domain;
  std::vector<SelectorPiece> pieces;
  double epsilon = 0.0;
  double exception_volume = 0.0;

  SimpleSVF approx;                        // the frozen map the stages ran on
  double scale = 1.0;                      // value = offset + scale * unit value
  double offset = 0.0;
  std::vector<double> cell_value;          // final value per approx cell
  std::vector<std::vector<double>> stages;  // per stage k = 2..N, value per cell
  std::vector<std::vector<std::size_t>> stage_index;  // chosen mesh index per cell

  std::optional<double> operator()(std::span<const double> x) const;
  bool excluded(std::span<const double> x) const { return !domain.contains(x, exception_volume); }
};

/// Piecewise-constant f with dist(f(x), F(x)) <= eps off an exception of
/// volume <= exception_volume (defaults to eps).
Selector extract_selector(const RegularSVF& f, double eps, double exception_volume = 0.0,
                          std::size_t cell_budget = kDefaultCellBudget);

/// {x : dist(r, F(x)) <= rho} as a generalized block.
using InverseFn = std::function<GeneralizedBlock(double r, double rho)>;

struct Refinement {
  std::vector<Selector> selectors;  // one per requested eps
  std::vector<double> cauchy;       // measured sup |f_{k+1} - f_k|
  std::vector<double> cauchy_bound;
};

Refinement refine_selector(const RegularSVF& f, const InverseFn& inverse, const std::vector<double>& eps_seq,
                           std::size_t cell_budget = kDefaultCellBudget);

/// Text table: one row per cell, vertices then value (hex floats).
void write_selector(std::ostream& os, const Selector& s);

}  // namespace certctl::selector
