#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include "certctl/core.hpp"

namespace certctl::eigen {

using Complex = std::complex<double>;
using CVec = std::vector<Complex>;

/// Dense n x n complex matrix, row-major.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  explicit ComplexMatrix(std::size_t n);
  ComplexMatrix(std::size_t n, std::vector<Complex> entries);
  static ComplexMatrix real(std::size_t n, const std::vector<double>& entries);

  std::size_t size() const { return n_; }
  Complex& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  Complex operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  const std::vector<Complex>& entries() const { return a_; }
  double frobenius() const;

 private:
  std::size_t n_ = 0;
  std::vector<Complex> a_;
};

/// Rows of "re im" pairs; blank lines and '#' comments are skipped.
ComplexMatrix parse_matrix(std::istream& is);
ComplexMatrix parse_matrix(const std::string& text);
void write_matrix(std::ostream& os, const ComplexMatrix& a);

/// Monic polynomial sum_i coeffs[i] lambda^i with per-coefficient radii.
struct CertifiedPoly {
  CVec coeffs;
  std::vector<double> radii;
  std::size_t degree() const { return coeffs.size() - 1; }
};

/// Characteristic polynomial det(lambda I - A) by Faddeev-LeVerrier.
CertifiedPoly char_poly(const ComplexMatrix& a);

struct RootCluster {
  Complex center;
  double radius = 0.0;
  std::vector<std::size_t> members;  // indices into RootSet::roots
};

struct RootSet {
  CVec roots;
  std::vector<double> radii;  // each root's disk (shared within a cluster)
  std::vector<RootCluster> clusters;
  std::size_t iterations = 0;
  bool undecided = false;  // some radius still above eps at the iteration cap
};

/// Aberth iteration with Weierstrass inclusion disks that account for the
/// coefficient radii. Every disk component with m members holds m roots.
RootSet approx_roots(const CertifiedPoly& p, double eps, std::size_t max_iterations = 500);

struct ApproxEigenPair {
  Complex lambda;
  CVec v;  // unit norm
  CertifiedReal residual;  // |A v - lambda v|
  std::size_t root = 0;    // generating root
};

inline constexpr double kDefaultIndependence = 1e-6;

struct EigenResult {
  std::vector<ApproxEigenPair> pairs;
  RootSet roots;
  double tau = kDefaultIndependence;
  double gram_min = 0.0;  // smallest Gram eigenvalue of the kept vectors
  bool failed = false;    // no pair reached eps; pairs holds the best one
};

EigenResult approx_eigenpairs(const ComplexMatrix& a, double eps, double tau = kDefaultIndependence);

/// Certified residual |A v - lambda v| for arbitrary v, lambda.
CertifiedReal residual_norm(const ComplexMatrix& a, const CVec& v, Complex lambda);

/// Smallest eigenvalue of the Gram matrix V* V.
double gram_min_eigenvalue(const std::vector<CVec>& vs);

enum class Verdict { stable, unstable, undecided };
const char* to_string(Verdict v);

struct StabilityVerdict {
  Verdict verdict = Verdict::undecided;
  CertifiedReal margin;  // max real part of the eigenvalues
  double epsilon_used = 0.0;
  RootSet roots;
};

StabilityVerdict hurwitz_verdict(const ComplexMatrix& a, double eps);

}  // namespace certctl::eigen
