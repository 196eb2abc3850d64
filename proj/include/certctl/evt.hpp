#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "certctl/core.hpp"

namespace certctl::evt {

/// Equi-Lipschitz, equi-bounded policies from a hypercube domain into R^m.
struct PolicyClass {
  Hypercube domain;
  std::size_t output_dim = 1;
  double lipschitz = 1.0;  // common constant L (vector norm)
  double bound = 1.0;      // common sup-norm bound K
  int smooth_order = 0;    // 0: Lipschitz only
  // When set, the per-coordinate extension constant is L / sqrt(m) so every
  // net member belongs to the class exactly; otherwise it is L and the vector
  // constant of members is at most L sqrt(m).
  bool exact_membership = false;

  double coordinate_lipschitz() const;
  void validate() const;
};

/// Lower McShane extension per output coordinate:
/// f_j(x) = max_i (v_ij - L |x - x_i|).
class LipschitzExtension {
 public:
  LipschitzExtension() = default;
  LipschitzExtension(std::shared_ptr<const FiniteMesh> nodes, std::vector<double> values,
                     std::size_t output_dim, double lipschitz);

  Vec operator()(std::span<const double> x) const;
  void evaluate_into(std::span<const double> x, std::span<double> out) const;

  const FiniteMesh& nodes() const { return *nodes_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> value(std::size_t node) const {
    return {values_.data() + node * m_, m_};
  }
  std::size_t output_dim() const { return m_; }
  double lipschitz() const { return lipschitz_; }

 private:
  std::shared_ptr<const FiniteMesh> nodes_;
  std::vector<double> values_;  // node-major, m per node
  std::size_t m_ = 1;
  double lipschitz_ = 0.0;
};

/// Checks per-coordinate compatibility |v_i - v_j| <= L |x_i - x_j| and
/// builds the extension. Throws ArgumentError naming the first violating pair.
LipschitzExtension lipschitz_extend(const std::vector<Vec>& nodes, const std::vector<Vec>& values,
                                    double lipschitz);

/// Net member: node values on the value mesh, extended, then projected onto
/// the closed ball of radius K (projection is 1-Lipschitz, so it keeps both
/// the constant and node values that already lie in the ball).
class PiecewisePolicy {
 public:
  PiecewisePolicy() = default;
  PiecewisePolicy(LipschitzExtension ext, double bound);

  Vec operator()(std::span<const double> x) const;
  const LipschitzExtension& extension() const { return ext_; }
  double bound() const { return bound_; }
  std::size_t input_dim() const { return ext_.nodes().dim(); }
  std::size_t output_dim() const { return ext_.output_dim(); }

 private:
  LipschitzExtension ext_;
  double bound_ = 0.0;
};

/// Resolutions used to build the eps-net of a class.
struct NetLayout {
  double coordinate_eps = 0.0;   // eps / sqrt(m)
  double node_resolution = 0.0;  // every domain point within this of a node
  double value_spacing = 0.0;    // dyadic spacing of the value mesh
  std::vector<double> value_grid;  // per-coordinate value mesh
  std::shared_ptr<const FiniteMesh> nodes;
  double compatibility_slack = 0.0;
};

NetLayout net_layout(const PolicyClass& cls, double eps, std::size_t mesh_budget = kDefaultMeshBudget);

inline constexpr std::size_t kDefaultNetBudget = 2'000'000;

/// Finite eps-net of the class in sup-norm.
std::vector<PiecewisePolicy> enumerate_policy_net(const PolicyClass& cls, double eps,
                                                  std::size_t budget = kDefaultNetBudget);

/// Cost functional on policies with a modulus w.r.t. sup-norm distance.
struct Functional {
  std::function<CertifiedReal(const PiecewisePolicy&)> evaluate;
  Modulus modulus;
};

struct MinimizeResult {
  PiecewisePolicy policy;
  CertifiedReal value;       // J at the returned policy
  std::size_t index = 0;     // position in the enumerated net
  std::size_t net_size = 0;
  double net_precision = 0.0;
  bool degenerate = false;   // eps >= 2K shortcut taken
};

/// J[result] - eps <= inf over the class. Ties: lowest net index.
MinimizeResult epsilon_minimize(const Functional& j, const PolicyClass& cls, double eps,
                                std::size_t budget = kDefaultNetBudget);

/// Convolution of a policy with a compactly supported C-infinity bump of the
/// given radius, evaluated by tensor Gauss-Legendre quadrature.
class SmoothPolicy {
 public:
  SmoothPolicy(PiecewisePolicy base, int order, double width);
  Vec operator()(std::span<const double> x) const;
  double width() const { return width_; }
  int order() const { return order_; }
  // sup |mollified - base| <= this
  double deviation_bound() const;

 private:
  PiecewisePolicy base_;
  int order_;
  double width_;
  std::vector<double> offsets_;  // quadrature nodes, dim per node
  std::vector<double> weights_;  // normalized to sum 1
};

SmoothPolicy mollify(const PiecewisePolicy& policy, int order, double width);

/// Flat text table, round-trippable bit-exactly (hex floats).
void write_policy(std::ostream& os, const PiecewisePolicy& p);
PiecewisePolicy read_policy(std::istream& is);

/// n-point Gauss-Legendre rule on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace certctl::evt
