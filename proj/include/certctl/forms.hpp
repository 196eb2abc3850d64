#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "certctl/core.hpp"

namespace certctl::forms {

class Form;
using FormPtr = std::shared_ptr<const Form>;

/// Scalar function of the variables v_0, v_1, ... built from registry
/// entries. Evaluation is enclosure-valued: on interval inputs it returns an
/// enclosure of the range, on point inputs a value with its rounding radius.
class Form {
 public:
  virtual ~Form() = default;
  virtual CertifiedReal eval(std::span<const CertifiedReal> v) const = 0;
  // Partial derivative with respect to v_var; ContractError where the
  // derivative is not continuous.
  virtual FormPtr derivative(std::size_t var) const = 0;
  // One past the largest variable index used.
  virtual std::size_t arity() const = 0;
  virtual nlohmann::json to_json() const = 0;

  CertifiedReal operator()(std::span<const double> x) const;
  double value(std::span<const double> x) const { return (*this)(x).value; }
  // Enclosure of the range over a box of the variables.
  CertifiedReal range(const Box& box) const;
  // Bound on the Euclidean norm of the gradient in v_first .. v_{first+count-1}
  // over a box of all variables.
  double gradient_bound(const Box& box, std::size_t first, std::size_t count) const;
  double gradient_bound(const Box& box, std::size_t n) const { return gradient_bound(box, 0, n); }
};

/// Local Lipschitz modulus over balls in v_0 .. v_{dim-1}, the remaining
/// variables ranging over `rest` (v_dim, v_dim+1, ...).
Modulus modulus(const FormPtr& f, std::size_t dim, const Box& rest = {});

FormPtr constant(double c);
FormPtr linear(Vec coeffs, double offset);
FormPtr polynomial(std::size_t var, Vec coeffs);
FormPtr piecewise_linear(std::size_t var, Vec knots, Vec values);
FormPtr trig(bool cosine, std::size_t var, double amplitude, double frequency, double phase);
FormPtr sum(std::vector<FormPtr> terms);
FormPtr product(std::vector<FormPtr> factors);
// outer(inner(v)); outer is a form of v_0 only.
FormPtr composition(FormPtr outer, FormPtr inner);

/// Registered form names.
const std::vector<std::string>& registry();

/// Parses a form; a bare number is a constant. ConfigError on an unknown
/// name (the message lists the registry) or malformed parameters.
FormPtr parse(const nlohmann::json& j);

/// sum_i d/dv_i (a) * fields_i
FormPtr lie_derivative(const FormPtr& a, const std::vector<FormPtr>& fields);

}  // namespace certctl::forms
