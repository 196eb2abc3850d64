#include "certctl/evt.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace certctl::evt {

double PolicyClass::coordinate_lipschitz() const {
  return exact_membership ? lipschitz / std::sqrt(static_cast<double>(output_dim)) : lipschitz;
}

void PolicyClass::validate() const {
  if (domain.dim() == 0) throw ArgumentError("PolicyClass: empty domain");
  if (output_dim == 0) throw ArgumentError("PolicyClass: output dimension must be >= 1");
  if (!(lipschitz >= 0.0) || !std::isfinite(lipschitz))
    throw ArgumentError("PolicyClass: Lipschitz constant must be finite and >= 0");
  if (!(bound >= 0.0) || !std::isfinite(bound))
    throw ArgumentError("PolicyClass: bound must be finite and >= 0");
  if (smooth_order < 0) throw ArgumentError("PolicyClass: smooth order must be >= 0");
}

// ---------------------------------------------------------------------------

LipschitzExtension::LipschitzExtension(std::shared_ptr<const FiniteMesh> nodes,
                                       std::vector<double> values, std::size_t output_dim,
                                       double lipschitz)
    : nodes_(std::move(nodes)), values_(std::move(values)), m_(output_dim), lipschitz_(lipschitz) {
  if (!nodes_ || nodes_->size() == 0) throw ArgumentError("lipschitz_extend: no nodes");
  if (values_.size() != nodes_->size() * m_) throw ArgumentError("lipschitz_extend: value count mismatch");
}

void LipschitzExtension::evaluate_into(std::span<const double> x, std::span<double> out) const {
  for (std::size_t j = 0; j < m_; ++j) out[j] = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nodes_->size(); ++i) {
    const double d = lipschitz_ == 0.0 ? 0.0 : lipschitz_ * distance(x, nodes_->point(i));
    for (std::size_t j = 0; j < m_; ++j) out[j] = std::max(out[j], values_[i * m_ + j] - d);
  }
}

Vec LipschitzExtension::operator()(std::span<const double> x) const {
  Vec out(m_);
  evaluate_into(x, out);
  return out;
}

LipschitzExtension lipschitz_extend(const std::vector<Vec>& nodes, const std::vector<Vec>& values,
                                    double lipschitz) {
  if (nodes.empty() || nodes.size() != values.size())
    throw ArgumentError("lipschitz_extend: need one value per node");
  if (!(lipschitz >= 0.0)) throw ArgumentError("lipschitz_extend: constant must be >= 0");
  const std::size_t n = nodes.front().size(), m = values.front().size();
  std::vector<double> coords, vals;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].size() != n || values[i].size() != m)
      throw ArgumentError("lipschitz_extend: inconsistent dimensions");
    coords.insert(coords.end(), nodes[i].begin(), nodes[i].end());
    vals.insert(vals.end(), values[i].begin(), values[i].end());
  }
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    for (std::size_t b = a + 1; b < nodes.size(); ++b) {
      const double d = distance(nodes[a], nodes[b]);
      for (std::size_t j = 0; j < m; ++j) {
        const double gap = std::abs(values[a][j] - values[b][j]);
        const double allowed = lipschitz * d;
        if (gap > allowed + 4.0 * ulp_of(allowed) + 4.0 * ulp_of(gap)) {
          std::ostringstream os;
          os << "lipschitz_extend: nodes " << a << " and " << b << " violate the constant "
             << lipschitz << " in coordinate " << j << " (gap " << gap << " > " << allowed << ")";
          throw ArgumentError(os.str());
        }
      }
    }
  }
  auto mesh = std::make_shared<const FiniteMesh>(n, std::move(coords), 0.0);
  return {mesh, std::move(vals), m, lipschitz};
}

// ---------------------------------------------------------------------------

PiecewisePolicy::PiecewisePolicy(LipschitzExtension ext, double bound)
    : ext_(std::move(ext)), bound_(bound) {}

Vec PiecewisePolicy::operator()(std::span<const double> x) const {
  Vec y = ext_(x);
  const double r = norm(y);
  if (r > bound_) {
    const double s = r > 0.0 ? bound_ / r : 0.0;
    for (double& v : y) v *= s;
  }
  return y;
}

// ---------------------------------------------------------------------------

NetLayout net_layout(const PolicyClass& cls, double eps, std::size_t mesh_budget) {
  cls.validate();
  if (!(eps > 0.0)) throw ArgumentError("enumerate_policy_net: eps must be positive");
  NetLayout lay;
  const double m = static_cast<double>(cls.output_dim);
  const double lc = cls.coordinate_lipschitz();
  lay.coordinate_eps = eps / std::sqrt(m);
  // Per-coordinate error: snapping s/2, extension mismatch s, node mesh 2 L rho.
  // With s <= eps_c / 3 the node mesh gets whatever the dyadic s leaves over.
  lay.value_spacing = std::ldexp(1.0, static_cast<int>(std::floor(std::log2(lay.coordinate_eps / 3.0))));
  lay.node_resolution = lc > 0.0 ? (lay.coordinate_eps - 1.5 * lay.value_spacing) / (2.0 * lc)
                                 : std::numeric_limits<double>::infinity();
  const Box box = cls.domain.box();
  const double res = std::isfinite(lay.node_resolution) ? lay.node_resolution : box.diameter() + 1.0;
  lay.nodes = std::make_shared<const FiniteMesh>(build_mesh(box, res, mesh_budget));

  const double k = cls.bound, s = lay.value_spacing;
  if (k == 0.0) {
    lay.value_grid = {0.0};
  } else {
    const auto steps = static_cast<long long>(std::floor(k / s));
    for (long long i = -steps; i <= steps; ++i) lay.value_grid.push_back(static_cast<double>(i) * s);
    if (lay.value_grid.front() > -k) lay.value_grid.insert(lay.value_grid.begin(), -k);
    if (lay.value_grid.back() < k) lay.value_grid.push_back(k);
  }
  lay.compatibility_slack = s;
  return lay;
}

namespace {

std::string net_count_message(std::size_t grid, std::size_t nodes, std::size_t m, std::size_t budget) {
  std::ostringstream os;
  os << "enumerate_policy_net: candidate count |K0|^N = " << grid << "^" << nodes * m
     << " (|K0| = " << grid << " values per coordinate, N = " << nodes << " nodes, m = " << m
     << "), filtered by Lipschitz compatibility, exceeds the budget of " << budget
     << " members; use a coarser eps";
  return os.str();
}

// Flat list of grid indices, count x N x m, in depth-first order.
std::vector<std::uint32_t> enumerate_assignments(const NetLayout& lay, std::size_t m, double lc,
                                                 std::size_t budget) {
  const FiniteMesh& nodes = *lay.nodes;
  const std::size_t n = nodes.size();
  const auto& g = lay.value_grid;
  const std::size_t gsize = g.size();
  std::vector<double> dist(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) dist[a * n + b] = distance(nodes.point(a), nodes.point(b));
  const double tol = 1e-12;

  std::vector<std::uint32_t> out;
  std::vector<std::uint32_t> cur(n * m, 0);
  std::vector<std::size_t> lo(n * m), hi(n * m);
  std::size_t count = 0;

  // Allowed index range of coordinate j at node p given nodes < p.
  auto compute_range = [&](std::size_t p) {
    for (std::size_t j = 0; j < m; ++j) {
      double vlo = -std::numeric_limits<double>::infinity(), vhi = std::numeric_limits<double>::infinity();
      for (std::size_t q = 0; q < p; ++q) {
        const double v = g[cur[q * m + j]];
        const double allowed = lc * dist[p * n + q] + lay.compatibility_slack + tol;
        vlo = std::max(vlo, v - allowed);
        vhi = std::min(vhi, v + allowed);
      }
      lo[p * m + j] = static_cast<std::size_t>(std::lower_bound(g.begin(), g.end(), vlo) - g.begin());
      hi[p * m + j] = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), vhi) - g.begin());
    }
  };

  // Iterative DFS over (node, coordinate) slots.
  const std::size_t slots = n * m;
  std::size_t depth = 0;
  compute_range(0);
  for (std::size_t j = 0; j < m; ++j) cur[j] = static_cast<std::uint32_t>(lo[j]);
  bool empty_range = false;
  for (std::size_t j = 0; j < m; ++j) empty_range |= lo[j] >= hi[j];
  if (empty_range || gsize == 0) return out;
  depth = 1;
  while (true) {
    if (depth == slots) {
      if (++count > budget) throw ResourceError(net_count_message(gsize, n, m, budget));
      out.insert(out.end(), cur.begin(), cur.end());
      // advance
      std::size_t d = slots;
      while (d > 0) {
        --d;
        if (cur[d] + 1 < hi[d]) {
          ++cur[d];
          break;
        }
        if (d == 0) return out;
      }
      depth = d + 1;
      continue;
    }
    // descending into slot `depth`
    if (depth % m == 0) compute_range(depth / m);
    if (lo[depth] < hi[depth]) {
      cur[depth] = static_cast<std::uint32_t>(lo[depth]);
      ++depth;
      continue;
    }
    // dead end: backtrack
    std::size_t d = depth;
    while (true) {
      if (d == 0) return out;
      --d;
      if (cur[d] + 1 < hi[d]) {
        ++cur[d];
        break;
      }
      if (d == 0) return out;
    }
    depth = d + 1;
  }
}

PiecewisePolicy make_member(const NetLayout& lay, std::span<const std::uint32_t> idx, std::size_t m,
                            double lc, double bound) {
  std::vector<double> vals(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) vals[i] = lay.value_grid[idx[i]];
  return {LipschitzExtension(lay.nodes, std::move(vals), m, lc), bound};
}

PiecewisePolicy zero_policy(const PolicyClass& cls) {
  const Vec c = cls.domain.center;
  auto mesh = std::make_shared<const FiniteMesh>(c.size(), c, cls.domain.box().diameter());
  return {LipschitzExtension(mesh, std::vector<double>(cls.output_dim, 0.0), cls.output_dim, 0.0),
          cls.bound};
}

}  // namespace

std::vector<PiecewisePolicy> enumerate_policy_net(const PolicyClass& cls, double eps,
                                                  std::size_t budget) {
  cls.validate();
  if (!(eps > 0.0)) throw ArgumentError("enumerate_policy_net: eps must be positive");
  // Every member is within K of the zero policy.
  if (eps >= cls.bound) return {zero_policy(cls)};
  const NetLayout lay = net_layout(cls, eps);
  const std::size_t m = cls.output_dim;
  const double lc = cls.coordinate_lipschitz();
  const auto flat = enumerate_assignments(lay, m, lc, budget);
  const std::size_t width = lay.nodes->size() * m;
  std::vector<PiecewisePolicy> net;
  net.reserve(flat.size() / width);
  for (std::size_t off = 0; off < flat.size(); off += width)
    net.push_back(make_member(lay, std::span(flat).subspan(off, width), m, lc, cls.bound));
  return net;
}

MinimizeResult epsilon_minimize(const Functional& j, const PolicyClass& cls, double eps,
                                std::size_t budget) {
  cls.validate();
  if (!(eps > 0.0)) throw ArgumentError("epsilon_minimize: eps must be positive");
  if (!j.evaluate) throw ContractError("epsilon_minimize: functional has no evaluator");
  MinimizeResult res;
  if (eps >= 2.0 * cls.bound) {
    res.policy = zero_policy(cls);
    const CertifiedReal v = j.evaluate(res.policy);
    res.value = CertifiedReal(v.value, std::max(v.radius, cls.bound));
    res.net_size = 1;
    res.degenerate = true;
    return res;
  }
  const double delta = j.modulus.step(0.5 * eps);
  res.net_precision = delta;

  std::vector<PiecewisePolicy> members;
  if (delta >= cls.bound) {
    members.push_back(zero_policy(cls));
  } else {
    members = enumerate_policy_net(cls, delta, budget);
  }
  std::vector<CertifiedReal> values(members.size());
  parallel_for(members.size(), [&](std::size_t i) { values[i] = j.evaluate(members[i]); });

  std::size_t best = 0;
  double max_radius = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    max_radius = std::max(max_radius, values[i].radius);
    if (values[i].value < values[best].value) best = i;
  }
  // J[best] <= inf + eps/2 + 2 * (evaluation radius); the second half of the
  // budget has to absorb the evaluation error.
  if (2.0 * max_radius > 0.5 * eps)
    throw ContractError("epsilon_minimize: functional evaluation radius exceeds eps/4");
  res.policy = members[best];
  res.value = values[best];
  res.index = best;
  res.net_size = members.size();
  return res;
}

// ---------------------------------------------------------------------------

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    nodes[i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

SmoothPolicy::SmoothPolicy(PiecewisePolicy base, int order, double width)
    : base_(std::move(base)), order_(order), width_(width) {
  if (order < 1) throw ArgumentError("mollify: order must be >= 1");
  if (!(width > 0.0)) throw ArgumentError("mollify: width must be positive");
  const std::size_t n = base_.input_dim();
  const int q = n == 1 ? 96 : n == 2 ? 32 : 12;
  std::vector<double> gx, gw;
  gauss_legendre(q, gx, gw);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= static_cast<std::size_t>(q);
  std::vector<std::size_t> idx(n, 0);
  double sum = 0.0;
  for (std::size_t p = 0; p < total; ++p) {
    double w = 1.0, r2 = 0.0;
    Vec y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = gx[idx[i]];
      w *= gw[idx[i]];
      r2 += y[i] * y[i];
    }
    if (r2 < 1.0) {
      const double k = std::exp(-1.0 / (1.0 - r2));
      for (double v : y) offsets_.push_back(v * width);
      weights_.push_back(w * k);
      sum += w * k;
    }
    for (std::size_t i = n; i-- > 0;) {
      if (++idx[i] < static_cast<std::size_t>(q)) break;
      idx[i] = 0;
    }
  }
  for (double& w : weights_) w /= sum;
}

Vec SmoothPolicy::operator()(std::span<const double> x) const {
  const std::size_t n = base_.input_dim(), m = base_.output_dim();
  Vec out(m, 0.0), z(n);
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] - offsets_[k * n + i];
    const Vec v = base_(z);
    for (std::size_t j = 0; j < m; ++j) out[j] += weights_[k] * v[j];
  }
  return out;
}

double SmoothPolicy::deviation_bound() const {
  return up(base_.extension().lipschitz() * std::sqrt(static_cast<double>(base_.output_dim())) * width_);
}

SmoothPolicy mollify(const PiecewisePolicy& policy, int order, double width) {
  return {policy, order, width};
}

// ---------------------------------------------------------------------------

namespace {
std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw ArgumentError("read_policy: bad number '" + tok + "'");
  return v;
}

void expect(std::istream& is, const char* key) {
  std::string tok;
  if (!(is >> tok) || tok != key) throw ArgumentError(std::string("read_policy: expected '") + key + "'");
}
}  // namespace

void write_policy(std::ostream& os, const PiecewisePolicy& p) {
  const auto& ext = p.extension();
  const FiniteMesh& nodes = ext.nodes();
  os << "certctl-policy 1\n";
  os << "dims " << nodes.dim() << " " << ext.output_dim() << "\n";
  os << "lipschitz " << hex(ext.lipschitz()) << "\n";
  os << "bound " << hex(p.bound()) << "\n";
  os << "resolution " << hex(nodes.resolution()) << "\n";
  os << "nodes " << nodes.size() << "\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (double x : nodes.point(i)) os << hex(x) << " ";
    auto v = ext.value(i);
    for (std::size_t j = 0; j < v.size(); ++j) os << hex(v[j]) << (j + 1 < v.size() ? " " : "");
    os << "\n";
  }
}

PiecewisePolicy read_policy(std::istream& is) {
  std::string tok;
  expect(is, "certctl-policy");
  int version = 0;
  if (!(is >> version) || version != 1) throw ArgumentError("read_policy: unsupported version");
  std::size_t n = 0, m = 0, count = 0;
  expect(is, "dims");
  if (!(is >> n >> m) || n == 0 || m == 0) throw ArgumentError("read_policy: bad dims");
  expect(is, "lipschitz");
  is >> tok;
  const double l = parse_double(tok);
  expect(is, "bound");
  is >> tok;
  const double k = parse_double(tok);
  expect(is, "resolution");
  is >> tok;
  const double res = parse_double(tok);
  expect(is, "nodes");
  if (!(is >> count) || count == 0) throw ArgumentError("read_policy: bad node count");
  std::vector<double> coords(count * n), vals(count * m);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t d = 0; d < n; ++d) {
      if (!(is >> tok)) throw ArgumentError("read_policy: truncated table");
      coords[i * n + d] = parse_double(tok);
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (!(is >> tok)) throw ArgumentError("read_policy: truncated table");
      vals[i * m + j] = parse_double(tok);
    }
  }
  auto mesh = std::make_shared<const FiniteMesh>(n, std::move(coords), res);
  return {LipschitzExtension(mesh, std::move(vals), m, l), k};
}

}  // namespace certctl::evt
