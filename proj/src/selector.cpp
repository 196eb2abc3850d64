#include "certctl/selector.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace certctl::selector {

namespace {

constexpr int kGridBits = 40;

Rational grid_unit() { return Rational(1) / (boost::multiprecision::cpp_int(1) << kGridBits); }

// Round a rational to the 2^-40 grid.
double floor_grid(const Rational& x) {
  const Rational s = x * (boost::multiprecision::cpp_int(1) << kGridBits);
  boost::multiprecision::cpp_int q = numerator(s) / denominator(s);
  if (q * denominator(s) > numerator(s)) --q;  // truncation toward zero for negatives
  return static_cast<double>(Rational(q) * grid_unit());
}

double ceil_grid(const Rational& x) { return -floor_grid(-x); }

double round_up(const Rational& x) {
  double d = static_cast<double>(x);
  if (Rational(d) < x) d = up(d);
  return d;
}

bool is_dyadic(double x) { return snap_dyadic(x) == x; }

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

}  // namespace

bool Block::empty() const {
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (lo[i] > hi[i]) return true;
  return false;
}

bool Block::contains(std::span<const double> x) const {
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  return true;
}

bool Block::interior_contains(std::span<const double> x) const {
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(x[i] > lo[i] && x[i] < hi[i])) return false;
  return true;
}

Rational Block::exact_volume() const {
  if (empty()) return 0;
  Rational v = 1;
  for (std::size_t i = 0; i < lo.size(); ++i) v *= Rational(hi[i]) - Rational(lo[i]);
  return v;
}

bool interior_disjoint(const Block& a, const Block& b) {
  if (a.empty() || b.empty()) return true;
  for (std::size_t i = 0; i < a.lo.size(); ++i) {
    if (a.lo[i] == a.hi[i] || b.lo[i] == b.hi[i]) return true;
    if (std::min(a.hi[i], b.hi[i]) <= std::max(a.lo[i], b.lo[i])) return true;
  }
  return false;
}

std::vector<Block> subtract(const Block& a, const Block& b) {
  if (interior_disjoint(a, b)) return {a};
  std::vector<Block> out;
  Block rest = a;
  for (std::size_t d = 0; d < a.lo.size(); ++d) {
    if (rest.lo[d] < b.lo[d]) {
      Block left = rest;
      left.hi[d] = b.lo[d];
      out.push_back(left);
      rest.lo[d] = b.lo[d];
    }
    if (b.hi[d] < rest.hi[d]) {
      Block right = rest;
      right.lo[d] = b.hi[d];
      out.push_back(right);
      rest.hi[d] = b.hi[d];
    }
  }
  return out;
}

bool GeneralizedBlock::contains(std::span<const double> x) const {
  for (const auto& b : blocks)
    if (b.contains(x)) return true;
  return false;
}

bool is_proper(const GeneralizedBlock& gb) {
  for (std::size_t i = 0; i < gb.blocks.size(); ++i)
    for (std::size_t j = i + 1; j < gb.blocks.size(); ++j)
      if (!interior_disjoint(gb.blocks[i], gb.blocks[j])) return false;
  return true;
}

Rational exact_volume(const GeneralizedBlock& gb) {
  if (!gb.finite()) throw ContractError("exact_volume: generator-backed input");
  Rational v = 0;
  for (const auto& b : gb.blocks) v += b.exact_volume();
  return v;
}

CertifiedReal volume(const GeneralizedBlock& gb) {
  Rational v = 0;
  for (const auto& b : gb.blocks) v += b.exact_volume();
  double tail = 0.0;
  if (!gb.finite()) {
    if (!gb.proper || !gb.tail_volume)
      throw ContractError("volume: infinite generalized block must be proper with a tail bound");
    const double target = std::ldexp(1.0, -kGridBits);
    std::size_t n = 0;
    while ((tail = gb.tail_volume(n)) > target) {
      v += gb.generator(n).exact_volume();
      if (++n > 10'000'000) throw ResourceError("volume: tail bound does not decay");
    }
  }
  const double d = static_cast<double>(v);
  const Rational err = v > Rational(d) ? Rational(v - Rational(d)) : Rational(Rational(d) - v);
  const double r = tail + (err == 0 ? 0.0 : round_up(err));
  return CertifiedReal(d, r == 0.0 ? 0.0 : up(r));
}

std::vector<GeneralizedBlock> countable_reduction(const std::vector<GeneralizedBlock>& gbs) {
  std::vector<GeneralizedBlock> out;
  std::vector<Block> taken;
  std::set<std::pair<Vec, Vec>> seen;
  for (const auto& gb : gbs) {
    if (!gb.finite()) throw ContractError("countable_reduction: generator-backed input is not supported");
    GeneralizedBlock q;
    for (const auto& blk : gb.blocks) {
      if (blk.empty()) continue;
      if (seen.count({blk.lo, blk.hi})) continue;
      std::vector<Block> pieces{blk};
      for (const auto& t : taken) {
        std::vector<Block> next;
        for (const auto& p : pieces) {
          auto s = subtract(p, t);
          next.insert(next.end(), s.begin(), s.end());
        }
        pieces.swap(next);
        if (pieces.empty()) break;
      }
      for (const auto& p : pieces) {
        q.blocks.push_back(p);
        taken.push_back(p);
        seen.insert({p.lo, p.hi});
      }
    }
    q.proper = true;
    out.push_back(std::move(q));
  }
  return out;
}

bool RepresentableDomain::contains(std::span<const double> x, double eta) const {
  if (!base.contains(x)) return false;
  if (!exception) return true;
  return !exception(eta).contains(x);
}

Block RegularSVF::bounding_box() const {
  if (blocks.empty()) throw ArgumentError("RegularSVF: no domain blocks");
  Block b = blocks.front().box;
  for (const auto& sb : blocks)
    for (std::size_t i = 0; i < b.lo.size(); ++i) {
      b.lo[i] = std::min(b.lo[i], sb.box.lo[i]);
      b.hi[i] = std::max(b.hi[i], sb.box.hi[i]);
    }
  return b;
}

Intervals RegularSVF::at(std::span<const double> x) const {
  for (const auto& sb : blocks) {
    if (!sb.box.contains(x)) continue;
    Intervals out;
    for (const auto& c : sb.chunks) out.emplace_back(c.alpha(x), c.beta(x));
    return out;
  }
  throw ArgumentError("RegularSVF: point outside every domain block");
}

double interval_distance(double r, const Intervals& set) {
  double d = INFINITY;
  for (const auto& [a, b] : set) d = std::min(d, r < a ? a - r : (r > b ? r - b : 0.0));
  return d;
}

std::optional<std::size_t> SimpleSVF::cell_of(std::span<const double> x) const {
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (cells[i].contains(x)) return i;
  return std::nullopt;
}

std::function<GeneralizedBlock(double)> facet_exception(const std::vector<Block>& cells, const Block& outer) {
  const std::size_t n = outer.dim();
  std::vector<std::vector<double>> cuts(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::set<double> s;
    for (const auto& c : cells)
      for (double v : {c.lo[a], c.hi[a]})
        if (v > outer.lo[a] && v < outer.hi[a]) s.insert(v);
    cuts[a].assign(s.begin(), s.end());
  }
  double total = 0.0;  // sum over cuts of the cross-section volume
  std::vector<double> cross(n, 1.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b)
      if (b != a) cross[a] *= outer.hi[b] - outer.lo[b];
    total += static_cast<double>(cuts[a].size()) * cross[a];
  }
  return [=](double eta) {
    if (!(eta > 0.0)) throw ArgumentError("exception volume must be positive");
    GeneralizedBlock gb;
    if (total == 0.0) {
      gb.proper = true;
      return gb;
    }
    // half-width w with 2 w total <= eta
    const double w = std::ldexp(1.0, static_cast<int>(std::floor(std::log2(eta / (2.0 * up(total))))));
    for (std::size_t a = 0; a < n; ++a)
      for (double c : cuts[a]) {
        Block s = outer;
        s.lo[a] = std::max(outer.lo[a], c - w);
        s.hi[a] = std::min(outer.hi[a], c + w);
        gb.blocks.push_back(s);
      }
    return gb;
  };
}

namespace {

struct FrozenCell {
  Intervals values;
  double error = 0.0;
};

FrozenCell freeze(const SvfBlock& sb, const Block& cell, double clamp_lo, double clamp_hi) {
  const std::size_t n = cell.dim();
  Vec c(n), half(n);
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = 0.5 * (cell.lo[i] + cell.hi[i]);
    half[i] = 0.5 * (cell.hi[i] - cell.lo[i]);
  }
  const double h = n == 1 ? half[0] : up(norm(half));
  FrozenCell out;
  for (const auto& ch : sb.chunks) {
    const double a = ch.alpha(c), b = ch.beta(c);
    const double va = ch.alpha_modulus->variation(h, c, h);
    const double vb = ch.beta_modulus->variation(h, c, h);
    if (a > b + va + vb) {
      std::ostringstream os;
      os << "RegularSVF: alpha > beta near x = " << c[0];
      throw ArgumentError(os.str());
    }
    const Rational ra(a), rb(b), rva(va), rvb(vb);
    const double lo = std::max(floor_grid(ra - rva), clamp_lo);
    const double hi = std::min(ceil_grid(rb + rvb), clamp_hi);
    const Rational e1 = ra - Rational(lo) + rva, e2 = Rational(hi) - rb + rvb;
    out.error = std::max({out.error, round_up(e1), round_up(e2)});
    out.values.emplace_back(lo, std::max(lo, hi));
  }
  std::sort(out.values.begin(), out.values.end());
  return out;
}

void validate(const RegularSVF& f) {
  if (f.blocks.empty()) throw ArgumentError("RegularSVF: no domain blocks");
  if (!(f.lo <= f.hi)) throw ArgumentError("RegularSVF: value bounds must satisfy lo <= hi");
  const std::size_t n = f.blocks.front().box.dim();
  for (const auto& sb : f.blocks) {
    if (sb.box.dim() != n || sb.box.empty()) throw ArgumentError("RegularSVF: bad domain block");
    for (std::size_t i = 0; i < n; ++i)
      if (!is_dyadic(sb.box.lo[i]) || !is_dyadic(sb.box.hi[i]))
        throw ArgumentError("RegularSVF: block vertices must be dyadic rationals");
    if (sb.chunks.empty()) throw ArgumentError("RegularSVF: block without chunks");
    for (const auto& c : sb.chunks) {
      if (!c.alpha || !c.beta) throw ArgumentError("RegularSVF: chunk without boundary functions");
      if (!c.alpha_modulus || !c.beta_modulus) throw ContractError("simple_approx: chunk boundary without a modulus");
    }
  }
}

}  // namespace

std::pair<SimpleSVF, RepresentableDomain> simple_approx(const RegularSVF& f, double delta,
                                                        std::size_t cell_budget) {
  if (!(delta > 0.0)) throw ArgumentError("simple_approx: delta must be positive");
  validate(f);
  const double clamp_lo = floor_grid(Rational(f.lo)), clamp_hi = ceil_grid(Rational(f.hi));
  SimpleSVF s;
  for (const auto& sb : f.blocks) {
    std::vector<Block> stack{sb.box};
    while (!stack.empty()) {
      Block cell = stack.back();
      stack.pop_back();
      FrozenCell fc = freeze(sb, cell, clamp_lo, clamp_hi);
      bool degenerate = true;
      for (std::size_t i = 0; i < cell.dim(); ++i) degenerate &= cell.lo[i] == cell.hi[i];
      if (fc.error <= delta || degenerate) {
        s.cells.push_back(cell);
        s.values.push_back(std::move(fc.values));
        s.cell_error.push_back(fc.error);
        s.hausdorff_bound = std::max(s.hausdorff_bound, fc.error);
        continue;
      }
      // split every non-degenerate axis; push children in reverse so they pop in order
      std::vector<std::size_t> axes;
      for (std::size_t i = 0; i < cell.dim(); ++i)
        if (cell.lo[i] < cell.hi[i]) axes.push_back(i);
      const std::size_t kids = std::size_t{1} << axes.size();
      if (s.cells.size() + stack.size() + kids > cell_budget)
        throw ResourceError("simple_approx: cell count exceeds the budget of " + std::to_string(cell_budget));
      for (std::size_t mask = kids; mask-- > 0;) {
        Block child = cell;
        for (std::size_t k = 0; k < axes.size(); ++k) {
          const std::size_t i = axes[k];
          const double mid = 0.5 * (cell.lo[i] + cell.hi[i]);
          if (mask >> k & 1U)
            child.lo[i] = mid;
          else
            child.hi[i] = mid;
        }
        stack.push_back(child);
      }
    }
  }
  RepresentableDomain dom;
  dom.base.blocks = s.cells;
  dom.base.proper = true;
  dom.exception = facet_exception(s.cells, f.bounding_box());
  return {std::move(s), std::move(dom)};
}

std::optional<double> Selector::operator()(std::span<const double> x) const {
  const auto c = approx.cell_of(x);
  if (!c) return std::nullopt;
  return cell_value[*c];
}

namespace {

void codomain_scale(double lo, double hi, double& scale, double& offset) {
  scale = std::ldexp(1.0, static_cast<int>(std::ceil(std::log2(std::max(hi - lo, std::ldexp(1.0, -30))))));
  while (true) {
    const double step = 0.5 * scale;
    offset = std::floor(lo / step) * step;
    if (offset + scale >= hi) return;
    scale *= 2.0;
  }
}

int stage_count(double eps, double scale) {
  int n = 2;
  while (std::ldexp(1.0, -n) > eps / (2.0 * scale)) ++n;
  return n;
}

void build_pieces(Selector& s) {
  std::map<double, GeneralizedBlock> groups;
  for (std::size_t i = 0; i < s.approx.cells.size(); ++i) groups[s.cell_value[i]].blocks.push_back(s.approx.cells[i]);
  s.pieces.clear();
  for (auto& [v, gb] : groups) {
    gb.proper = true;
    s.pieces.push_back({std::move(gb), v});
  }
}

}  // namespace

Selector extract_selector(const RegularSVF& f, double eps, double exception_volume, std::size_t cell_budget) {
  if (!(eps > 0.0)) throw ArgumentError("extract_selector: eps must be positive");
  if (exception_volume < 0.0) throw ArgumentError("extract_selector: exception volume must be >= 0");
  Selector sel;
  sel.epsilon = eps;
  sel.exception_volume = exception_volume > 0.0 ? exception_volume : eps;
  auto [approx, domain] = simple_approx(f, 0.5 * eps, cell_budget);
  sel.approx = std::move(approx);
  sel.domain = std::move(domain);
  codomain_scale(f.lo, f.hi, sel.scale, sel.offset);

  const std::size_t cells = sel.approx.cells.size();
  std::vector<Intervals> unit(cells);
  for (std::size_t i = 0; i < cells; ++i)
    for (const auto& [a, b] : sel.approx.values[i])
      unit[i].emplace_back((a - sel.offset) / sel.scale, (b - sel.offset) / sel.scale);

  const int n_stages = stage_count(eps, sel.scale);
  std::vector<double> prev(cells, 0.0);  // f_1 = 0
  for (int k = 2; k <= n_stages; ++k) {
    const double h = std::ldexp(1.0, -(k + 1));
    const double margin = std::ldexp(1.0, -(k + 4));
    const double c_radius = std::ldexp(1.0, -k) - margin;
    const double d_radius = std::ldexp(1.0, -(k - 1)) - margin;
    const std::size_t last = std::size_t{1} << (k + 1);
    std::vector<std::size_t> idx(cells);
    std::vector<double> cur(cells);
    std::vector<char> failed(cells, 0);
    parallel_for(cells, [&](std::size_t c) {
      std::size_t first = 0, stop = last;
      if (k > 2) {
        first = static_cast<std::size_t>(std::max(0.0, std::ceil((prev[c] - d_radius) / h)));
        stop = std::min<std::size_t>(last, static_cast<std::size_t>(std::floor((prev[c] + d_radius) / h)));
      }
      for (std::size_t i = first; i <= stop; ++i) {
        const double r = static_cast<double>(i) * h;
        if (interval_distance(r, unit[c]) > c_radius) continue;
        if (k > 2 && std::abs(r - prev[c]) > d_radius) continue;
        idx[c] = i;
        cur[c] = r;
        return;
      }
      failed[c] = 1;
    });
    for (std::size_t c = 0; c < cells; ++c)
      if (failed[c])
        throw InternalError("extract_selector: stage " + std::to_string(k) + " left cell " + std::to_string(c) +
                            " without an admissible value");
    std::vector<double> vals(cells);
    for (std::size_t c = 0; c < cells; ++c) vals[c] = sel.offset + sel.scale * cur[c];
    sel.stages.push_back(std::move(vals));
    sel.stage_index.push_back(std::move(idx));
    prev = std::move(cur);
  }
  sel.cell_value = sel.stages.back();
  build_pieces(sel);
  return sel;
}

Refinement refine_selector(const RegularSVF& f, const InverseFn& inverse, const std::vector<double>& eps_seq,
                           std::size_t cell_budget) {
  if (eps_seq.empty()) throw ArgumentError("refine_selector: empty eps sequence");
  for (std::size_t i = 0; i < eps_seq.size(); ++i)
    if (!(eps_seq[i] > 0.0) || (i > 0 && !(eps_seq[i] < eps_seq[i - 1])))
      throw ArgumentError("refine_selector: eps sequence must be positive and decreasing");
  if (!inverse) throw ContractError("refine_selector: no inverse-domain generator");

  const Selector base = extract_selector(f, eps_seq.back(), 0.0, cell_budget);
  Refinement out;
  std::vector<int> levels;
  for (double e : eps_seq) {
    const int nk = std::min(stage_count(e, base.scale), 1 + static_cast<int>(base.stages.size()));
    levels.push_back(nk);
    Selector s = base;
    s.epsilon = e;
    s.exception_volume = e;
    s.stages.resize(static_cast<std::size_t>(nk - 1));
    s.stage_index.resize(static_cast<std::size_t>(nk - 1));
    s.cell_value = s.stages.back();
    build_pieces(s);
    out.selectors.push_back(std::move(s));
  }
  for (std::size_t k = 0; k + 1 < out.selectors.size(); ++k) {
    double diff = 0.0;
    for (std::size_t c = 0; c < base.approx.cells.size(); ++c)
      diff = std::max(diff, std::abs(out.selectors[k + 1].cell_value[c] - out.selectors[k].cell_value[c]));
    out.cauchy.push_back(diff);
    double bound = 0.0;
    for (int j = levels[k] + 1; j <= levels[k + 1]; ++j) bound += base.scale * std::ldexp(1.0, -(j - 1));
    out.cauchy_bound.push_back(bound);
  }

  // The inverse generator must agree with F at cell centers.
  for (std::size_t k = 0; k < out.selectors.size(); ++k) {
    const double rho = eps_seq[k];
    const double tol = 1e-9 * (1.0 + rho);
    for (const auto& piece : out.selectors[k].pieces) {
      const GeneralizedBlock inv = inverse(piece.value, rho);
      for (const auto& cell : base.approx.cells) {
        Vec c(cell.dim());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (cell.lo[i] + cell.hi[i]);
        const double d = interval_distance(piece.value, f.at(c));
        const bool in = inv.contains(c);
        if ((d <= rho - tol && !in) || (d >= rho + tol && in)) {
          std::ostringstream os;
          os << "refine_selector: inverse generator disagrees with F at x0 = " << c[0] << " for r = " << piece.value
             << ", rho = " << rho << " (distance " << d << ")";
          throw ContractError(os.str());
        }
      }
    }
  }
  return out;
}

void write_selector(std::ostream& os, const Selector& s) {
  const std::size_t n = s.approx.cells.empty() ? 0 : s.approx.cells.front().dim();
  os << "certctl-selector 1\n";
  os << "dim " << n << "\n";
  os << "epsilon " << hex(s.epsilon) << "\n";
  os << "cells " << s.approx.cells.size() << "\n";
  for (std::size_t i = 0; i < s.approx.cells.size(); ++i) {
    const auto& c = s.approx.cells[i];
    for (double v : c.lo) os << hex(v) << ' ';
    for (double v : c.hi) os << hex(v) << ' ';
    os << hex(s.cell_value[i]) << '\n';
  }
}

}  // namespace certctl::selector
