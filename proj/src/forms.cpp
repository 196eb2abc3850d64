#include "certctl/forms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "certctl/errors.hpp"

namespace certctl::forms {

using nlohmann::json;

namespace {

bool is_zero(const FormPtr& f);

CertifiedReal at(std::span<const CertifiedReal> v, std::size_t i) {
  if (i >= v.size()) throw ArgumentError("form evaluated with too few variables");
  return v[i];
}

class Constant final : public Form {
 public:
  explicit Constant(CertifiedReal c) : c_(c) {}
  CertifiedReal eval(std::span<const CertifiedReal>) const override { return c_; }
  FormPtr derivative(std::size_t) const override { return constant(0.0); }
  std::size_t arity() const override { return 0; }
  json to_json() const override {
    if (c_.radius == 0.0) return c_.value;
    return {{"form", "constant"}, {"value", c_.value}, {"radius", c_.radius}};
  }
  const CertifiedReal& value() const { return c_; }

 private:
  CertifiedReal c_;
};

bool is_zero(const FormPtr& f) {
  const auto* c = dynamic_cast<const Constant*>(f.get());
  return c && c->value().value == 0.0 && c->value().radius == 0.0;
}

class Linear final : public Form {
 public:
  Linear(Vec a, double b) : a_(std::move(a)), b_(b) {}
  CertifiedReal eval(std::span<const CertifiedReal> v) const override {
    CertifiedReal s(b_);
    for (std::size_t i = 0; i < a_.size(); ++i)
      if (a_[i] != 0.0) s = s + CertifiedReal(a_[i]) * at(v, i);
    return s;
  }
  FormPtr derivative(std::size_t var) const override { return constant(var < a_.size() ? a_[var] : 0.0); }
  std::size_t arity() const override { return a_.size(); }
  json to_json() const override { return {{"form", "linear"}, {"coeffs", a_}, {"offset", b_}}; }

 private:
  Vec a_;
  double b_;
};

class Polynomial final : public Form {
 public:
  Polynomial(std::size_t var, std::vector<CertifiedReal> c) : var_(var), c_(std::move(c)) {}
  CertifiedReal eval(std::span<const CertifiedReal> v) const override {
    if (c_.empty()) return {};
    const CertifiedReal x = at(v, var_);
    CertifiedReal acc = c_.back();
    for (std::size_t k = c_.size() - 1; k-- > 0;) acc = acc * x + c_[k];
    return acc;
  }
  FormPtr derivative(std::size_t var) const override {
    if (var != var_ || c_.size() <= 1) return constant(0.0);
    std::vector<CertifiedReal> d;
    for (std::size_t k = 1; k < c_.size(); ++k) d.push_back(CertifiedReal(static_cast<double>(k)) * c_[k]);
    return std::make_shared<Polynomial>(var_, std::move(d));
  }
  std::size_t arity() const override { return var_ + 1; }
  json to_json() const override {
    json c = json::array();
    for (const auto& x : c_) c.push_back(x.value);
    return {{"form", "polynomial"}, {"var", var_}, {"coeffs", c}};
  }

 private:
  std::size_t var_;
  std::vector<CertifiedReal> c_;
};

// Piecewise-constant slopes of a piecewise-linear form.
class Step final : public Form {
 public:
  Step(std::size_t var, Vec knots, Vec slopes) : var_(var), knots_(std::move(knots)), slopes_(std::move(slopes)) {}
  CertifiedReal eval(std::span<const CertifiedReal> v) const override {
    const CertifiedReal x = at(v, var_);
    const double lo = x.lo(), hi = x.hi();
    double mn = INFINITY, mx = -INFINITY;
    // Segment k is (knots[k-1], knots[k]); segment 0 and the last are unbounded.
    for (std::size_t k = 0; k < slopes_.size(); ++k) {
      const double a = k == 0 ? -INFINITY : knots_[k - 1];
      const double b = k == knots_.size() ? INFINITY : knots_[k];
      if (hi >= a && lo <= b) {
        mn = std::min(mn, slopes_[k]);
        mx = std::max(mx, slopes_[k]);
      }
    }
    // Stored slopes are rounded quotients.
    return CertifiedReal::from_interval(down(mn), up(mx));
  }
  FormPtr derivative(std::size_t var) const override {
    if (var != var_) return constant(0.0);
    throw ContractError("derivative of a piecewise-linear slope is discontinuous");
  }
  std::size_t arity() const override { return var_ + 1; }
  json to_json() const override {
    return {{"form", "step"}, {"var", var_}, {"knots", knots_}, {"slopes", slopes_}};
  }

 private:
  std::size_t var_;
  Vec knots_;
  Vec slopes_;  // knots.size() + 1 entries
};

class PiecewiseLinear final : public Form {
 public:
  PiecewiseLinear(std::size_t var, Vec knots, Vec values) : var_(var), x_(std::move(knots)), y_(std::move(values)) {}

  CertifiedReal eval(std::span<const CertifiedReal> v) const override {
    const CertifiedReal x = at(v, var_);
    CertifiedReal r = hull(point(x.lo()), point(x.hi()));
    for (std::size_t k = 0; k < x_.size(); ++k)
      if (x_[k] > x.lo() && x_[k] < x.hi()) r = hull(r, CertifiedReal(y_[k]));
    return r;
  }
  FormPtr derivative(std::size_t var) const override {
    if (var != var_) return constant(0.0);
    Vec slopes{0.0};
    for (std::size_t k = 1; k < x_.size(); ++k) slopes.push_back((y_[k] - y_[k - 1]) / (x_[k] - x_[k - 1]));
    slopes.push_back(0.0);
    return std::make_shared<Step>(var_, x_, std::move(slopes));
  }
  std::size_t arity() const override { return var_ + 1; }
  json to_json() const override {
    return {{"form", "piecewise_linear"}, {"var", var_}, {"knots", x_}, {"values", y_}};
  }

 private:
  CertifiedReal point(double t) const {
    if (t <= x_.front()) return CertifiedReal(y_.front());
    if (t >= x_.back()) return CertifiedReal(y_.back());
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - x_.begin());
    const double x0 = x_[k - 1], x1 = x_[k], y0 = y_[k - 1], y1 = y_[k];
    const double w = (t - x0) / (x1 - x0);
    const double y = y0 + w * (y1 - y0);
    return {y, 8.0 * ulp_of(std::max(std::abs(y0), std::abs(y1)) + std::abs(y1 - y0))};
  }
  std::size_t var_;
  Vec x_, y_;
};

CertifiedReal sin_enclosure(const CertifiedReal& x) {
  const double lo = x.lo(), hi = x.hi();
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (!(hi - lo < two_pi)) return CertifiedReal::from_interval(-1.0, 1.0);
  // libm sin is accurate to a few ulps; pad by 4 ulps plus the argument
  // reduction error for large arguments.
  const double pad = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::max(std::abs(lo), std::abs(hi)));
  double mn = std::min(std::sin(lo), std::sin(hi)) - pad;
  double mx = std::max(std::sin(lo), std::sin(hi)) + pad;
  // Interior extrema at pi/2 + k pi; conservative containment test.
  const double slack = 1e-12 * (1.0 + std::abs(lo) + std::abs(hi));
  const double kmin = std::floor((lo - slack - std::numbers::pi / 2) / std::numbers::pi);
  const double kmax = std::ceil((hi + slack - std::numbers::pi / 2) / std::numbers::pi);
  for (double k = kmin; k <= kmax; k += 1.0) {
    const double c = std::numbers::pi / 2 + k * std::numbers::pi;
    if (c >= lo - slack && c <= hi + slack) {
      if (std::fmod(std::abs(k), 2.0) == 0.0)
        mx = 1.0;
      else
        mn = -1.0;
    }
  }
  return CertifiedReal::from_interval(std::max(mn, -1.0), std::min(mx, 1.0));
}

// amplitude * sin(frequency * v + phase), or cos.
class Trig final : public Form {
 public:
  Trig(bool cosine, std::size_t var, CertifiedReal amp, double freq, double phase)
      : cos_(cosine), var_(var), amp_(amp), w_(freq), p_(phase) {}
  CertifiedReal eval(std::span<const CertifiedReal> v) const override {
    CertifiedReal arg = CertifiedReal(w_) * at(v, var_) + CertifiedReal(p_);
    if (cos_) arg = arg + CertifiedReal::from_interval(down(std::numbers::pi / 2), up(std::numbers::pi / 2));
    return amp_ * sin_enclosure(arg);
  }
  FormPtr derivative(std::size_t var) const override {
    if (var != var_) return constant(0.0);
    const CertifiedReal a = amp_ * CertifiedReal(w_);
    return std::make_shared<Trig>(!cos_, var_, cos_ ? -a : a, w_, p_);
  }
  std::size_t arity() const override { return var_ + 1; }
  json to_json() const override {
    return {{"form", "trig"},      {"fn", cos_ ? "cos" : "sin"}, {"var", var_},
            {"amplitude", amp_.value}, {"frequency", w_},       {"phase", p_}};
  }

 private:
  bool cos_;
  std::size_t var_;
  CertifiedReal amp_;
  double w_, p_;
};

class Sum final : public Form {
 public:
  explicit Sum(std::vector<FormPtr> t) : t_(std::move(t)) {}
  CertifiedReal eval(std::span<const CertifiedReal> v) const override {
    CertifiedReal s;
    for (const auto& f : t_) s = s + f->eval(v);
    return s;
  }
  FormPtr derivative(std::size_t var) const override {
    std::vector<FormPtr> d;
    for (const auto& f : t_) d.push_back(f->derivative(var));
    return sum(std::move(d));
  }
  std::size_t arity() const override {
    std::size_t a = 0;
    for (const auto& f : t_) a = std::max(a, f->arity());
    return a;
  }
  json to_json() const override {
    json t = json::array();
    for (const auto& f : t_) t.push_back(f->to_json());
    return {{"form", "sum"}, {"terms", t}};
  }

 private:
  std::vector<FormPtr> t_;
};

class Product final : public Form {
 public:
  explicit Product(std::vector<FormPtr> f) : f_(std::move(f)) {}
  CertifiedReal eval(std::span<const CertifiedReal> v) const override {
    CertifiedReal p(1.0);
    for (const auto& f : f_) p = p * f->eval(v);
    return p;
  }
  FormPtr derivative(std::size_t var) const override {
    std::vector<FormPtr> terms;
    for (std::size_t i = 0; i < f_.size(); ++i) {
      std::vector<FormPtr> fs = f_;
      fs[i] = f_[i]->derivative(var);
      terms.push_back(product(std::move(fs)));
    }
    return sum(std::move(terms));
  }
  std::size_t arity() const override {
    std::size_t a = 0;
    for (const auto& f : f_) a = std::max(a, f->arity());
    return a;
  }
  json to_json() const override {
    json t = json::array();
    for (const auto& f : f_) t.push_back(f->to_json());
    return {{"form", "product"}, {"factors", t}};
  }

 private:
  std::vector<FormPtr> f_;
};

class Composition final : public Form {
 public:
  Composition(FormPtr outer, FormPtr inner) : outer_(std::move(outer)), inner_(std::move(inner)) {}
  CertifiedReal eval(std::span<const CertifiedReal> v) const override {
    const CertifiedReal y = inner_->eval(v);
    return outer_->eval(std::span<const CertifiedReal>(&y, 1));
  }
  FormPtr derivative(std::size_t var) const override {
    const FormPtr di = inner_->derivative(var);
    if (is_zero(di)) return constant(0.0);
    return product({composition(outer_->derivative(0), inner_), di});
  }
  std::size_t arity() const override { return inner_->arity(); }
  json to_json() const override {
    return {{"form", "composition"}, {"outer", outer_->to_json()}, {"inner", inner_->to_json()}};
  }

 private:
  FormPtr outer_, inner_;
};

Vec numbers(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) throw ConfigError(std::string("form: missing array '") + key + "'");
  Vec out;
  for (const auto& x : j[key]) {
    if (!x.is_number()) throw ConfigError(std::string("form: '") + key + "' must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

double number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(std::string("form: '") + key + "' must be a number");
  return j[key].get<double>();
}

std::size_t index(const json& j, const char* key) {
  if (!j.contains(key)) return 0;
  if (!j[key].is_number_unsigned()) throw ConfigError(std::string("form: '") + key + "' must be a variable index");
  return j[key].get<std::size_t>();
}

std::vector<FormPtr> list(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) throw ConfigError(std::string("form: missing array '") + key + "'");
  std::vector<FormPtr> out;
  for (const auto& x : j[key]) out.push_back(parse(x));
  return out;
}

}  // namespace

CertifiedReal Form::operator()(std::span<const double> x) const {
  std::vector<CertifiedReal> v(x.begin(), x.end());
  return eval(v);
}

CertifiedReal Form::range(const Box& box) const {
  std::vector<CertifiedReal> v;
  for (std::size_t i = 0; i < box.dim(); ++i) v.push_back(CertifiedReal::from_interval(box.lo[i], box.hi[i]));
  return eval(v);
}

double Form::gradient_bound(const Box& box, std::size_t first, std::size_t count) const {
  double s = 0.0;
  for (std::size_t i = first; i < std::min(first + count, arity()); ++i) {
    const auto d = derivative(i);
    if (is_zero(d)) continue;
    const auto r = d->range(box);
    const double m = std::max(std::abs(r.lo()), std::abs(r.hi()));
    s = sum_up(s, product_up(m, m));
  }
  return up(std::sqrt(s));
}

Modulus modulus(const FormPtr& f, std::size_t dim, const Box& rest) {
  // Derivatives are built once.
  std::vector<FormPtr> grads;
  for (std::size_t i = 0; i < std::min(dim, f->arity()); ++i) grads.push_back(f->derivative(i));
  return Modulus::local_lipschitz([grads, dim, rest](std::span<const double> c, double r) {
    if (c.size() < dim) throw ArgumentError("form modulus: center has too few coordinates");
    std::vector<CertifiedReal> v;
    for (std::size_t i = 0; i < dim; ++i) v.push_back(CertifiedReal::from_interval(down(c[i] - r), up(c[i] + r)));
    for (std::size_t i = 0; i < rest.dim(); ++i) v.push_back(CertifiedReal::from_interval(rest.lo[i], rest.hi[i]));
    double s = 0.0;
    for (const auto& g : grads) {
      if (is_zero(g)) continue;
      const auto e = g->eval(v);
      const double m = std::max(std::abs(e.lo()), std::abs(e.hi()));
      s = sum_up(s, product_up(m, m));
    }
    return up(std::sqrt(s));
  });
}

FormPtr constant(double c) { return std::make_shared<Constant>(CertifiedReal(c)); }

FormPtr linear(Vec coeffs, double offset) { return std::make_shared<Linear>(std::move(coeffs), offset); }

FormPtr polynomial(std::size_t var, Vec coeffs) {
  std::vector<CertifiedReal> c(coeffs.begin(), coeffs.end());
  return std::make_shared<Polynomial>(var, std::move(c));
}

FormPtr piecewise_linear(std::size_t var, Vec knots, Vec values) {
  if (knots.empty() || knots.size() != values.size())
    throw ConfigError("piecewise_linear: knots and values must be non-empty and of equal length");
  for (std::size_t k = 1; k < knots.size(); ++k)
    if (!(knots[k] > knots[k - 1])) throw ConfigError("piecewise_linear: knots must be strictly increasing");
  for (double v : values)
    if (!std::isfinite(v)) throw ConfigError("piecewise_linear: values must be finite");
  return std::make_shared<PiecewiseLinear>(var, std::move(knots), std::move(values));
}

FormPtr trig(bool cosine, std::size_t var, double amplitude, double frequency, double phase) {
  return std::make_shared<Trig>(cosine, var, CertifiedReal(amplitude), frequency, phase);
}

FormPtr sum(std::vector<FormPtr> terms) {
  std::erase_if(terms, is_zero);
  if (terms.empty()) return constant(0.0);
  if (terms.size() == 1) return terms.front();
  return std::make_shared<Sum>(std::move(terms));
}

FormPtr product(std::vector<FormPtr> factors) {
  if (std::any_of(factors.begin(), factors.end(), is_zero)) return constant(0.0);
  if (factors.empty()) return constant(1.0);
  if (factors.size() == 1) return factors.front();
  return std::make_shared<Product>(std::move(factors));
}

FormPtr composition(FormPtr outer, FormPtr inner) {
  if (outer->arity() > 1) throw ConfigError("composition: outer form may only use variable 0");
  return std::make_shared<Composition>(std::move(outer), std::move(inner));
}

const std::vector<std::string>& registry() {
  static const std::vector<std::string> names{"constant", "linear",  "polynomial", "piecewise_linear",
                                              "trig",     "sum",     "product",    "composition"};
  return names;
}

FormPtr parse(const json& j) {
  if (j.is_number()) return constant(j.get<double>());
  if (!j.is_object() || !j.contains("form") || !j["form"].is_string())
    throw ConfigError("form: expected a number or an object with a 'form' name");
  const std::string name = j["form"].get<std::string>();
  if (name == "constant") return constant(number(j, "value", 0.0));
  if (name == "linear") return linear(numbers(j, "coeffs"), number(j, "offset", 0.0));
  if (name == "polynomial") return polynomial(index(j, "var"), numbers(j, "coeffs"));
  if (name == "piecewise_linear") return piecewise_linear(index(j, "var"), numbers(j, "knots"), numbers(j, "values"));
  if (name == "trig") {
    const std::string fn = j.value("fn", std::string("sin"));
    if (fn != "sin" && fn != "cos") throw ConfigError("trig: fn must be 'sin' or 'cos'");
    return trig(fn == "cos", index(j, "var"), number(j, "amplitude", 1.0), number(j, "frequency", 1.0),
                number(j, "phase", 0.0));
  }
  if (name == "sum") return sum(list(j, "terms"));
  if (name == "product") return product(list(j, "factors"));
  if (name == "composition") {
    if (!j.contains("outer") || !j.contains("inner")) throw ConfigError("composition: needs 'outer' and 'inner'");
    return composition(parse(j["outer"]), parse(j["inner"]));
  }
  std::string known;
  for (const auto& n : registry()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown form '" + name + "'; registered forms: " + known);
}

FormPtr lie_derivative(const FormPtr& a, const std::vector<FormPtr>& fields) {
  std::vector<FormPtr> terms;
  for (std::size_t i = 0; i < fields.size(); ++i) terms.push_back(product({a->derivative(i), fields[i]}));
  return sum(std::move(terms));
}

}  // namespace certctl::forms
