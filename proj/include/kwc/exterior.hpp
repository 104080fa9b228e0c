#pragma once

// Dense exterior algebra over Lambda_k(R^m), m <= 8.
//
// Basis k-vectors e_a = e_{a1} ^ ... ^ e_{ak} are indexed by strictly
// increasing index tuples, stored in lexicographic order. The Hodge star uses
// the positive-signature convention: *e_a = sign(a, a^c) e_{a^c}, so that
// e_a ^ *e_a is the unit volume element.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace kwc::exterior {

inline constexpr int kMaxDim = 8;

class ExteriorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Strictly increasing 1-based index tuple.
class KIndex {
 public:
  KIndex(int m, std::vector<int> indices);

  int dim() const { return m_; }
  int grade() const { return static_cast<int>(indices_.size()); }
  const std::vector<int>& indices() const { return indices_; }
  /// Bit i-1 set for every index i.
  std::uint32_t mask() const;

 private:
  int m_;
  std::vector<int> indices_;
};

std::int64_t binomial(int n, int k);

/// Basis masks of grade k in lexicographic order of their index tuples.
const std::vector<std::uint32_t>& basis_masks(int m, int k);

/// Position of a basis mask inside basis_masks(m, popcount(mask)).
std::size_t basis_position(int m, std::uint32_t mask);

class MultiVector {
 public:
  MultiVector(int m, int k);
  MultiVector(int m, int k, std::vector<double> coeffs);

  static MultiVector scalar(int m, double value);
  static MultiVector vector(std::span<const double> v);
  /// Unit basis element e_a.
  static MultiVector basis(const KIndex& index);

  int dim() const { return m_; }
  int grade() const { return k_; }
  std::span<const double> coeffs() const { return coeffs_; }
  double operator[](std::size_t i) const { return coeffs_[i]; }
  double coeff(const KIndex& index) const;

  MultiVector& operator+=(const MultiVector& other);
  MultiVector& operator-=(const MultiVector& other);
  MultiVector& operator*=(double s);

 private:
  int m_;
  int k_;
  std::vector<double> coeffs_;
};

MultiVector operator+(MultiVector a, const MultiVector& b);
MultiVector operator-(MultiVector a, const MultiVector& b);
MultiVector operator*(double s, MultiVector a);

/// Sign of the permutation that sorts the concatenation (a, b) of two
/// disjoint index sets; 0 when they overlap.
int merge_sign(std::uint32_t a, std::uint32_t b);

MultiVector wedge(const MultiVector& a, const MultiVector& b);
MultiVector hodge(const MultiVector& a);
double inner(const MultiVector& a, const MultiVector& b);
double norm(const MultiVector& a);

/// | a ^ *(b ^ c) - ((a.c) *b - (a.b) *c) |
double triple_identity_residual(std::span<const double> a, std::span<const double> b,
                                std::span<const double> c);

/// | |b|^2 a - (a.b) b + *(*(a ^ b) ^ b) |
double muuibn_residual(std::span<const double> a, std::span<const double> b);

}  // namespace kwc::exterior
