#include "kwc/exterior.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <string>

namespace kwc::exterior {

namespace {

void check_dim(int m) {
  if (m < 1 || m > kMaxDim) {
    throw ExteriorError("ambient dimension must lie in 1.." + std::to_string(kMaxDim) +
                        ", got " + std::to_string(m));
  }
}

struct BasisTables {
  // masks[m][k]: grade-k masks of R^m in lexicographic order.
  std::array<std::array<std::vector<std::uint32_t>, kMaxDim + 1>, kMaxDim + 1> masks;
  // position[m][mask]
  std::array<std::vector<std::size_t>, kMaxDim + 1> position;
};

// Lexicographic order of index tuples: compare the sorted tuples elementwise.
bool lex_less(std::uint32_t a, std::uint32_t b) {
  while (a != 0 && b != 0) {
    const int ia = std::countr_zero(a);
    const int ib = std::countr_zero(b);
    if (ia != ib) return ia < ib;
    a &= a - 1;
    b &= b - 1;
  }
  return a == 0 && b != 0;
}

const BasisTables& tables() {
  static const BasisTables t = [] {
    BasisTables out;
    for (int m = 1; m <= kMaxDim; ++m) {
      const std::uint32_t full = (1u << m);
      out.position[m].assign(full, 0);
      for (std::uint32_t mask = 0; mask < full; ++mask) {
        out.masks[m][std::popcount(mask)].push_back(mask);
      }
      for (int k = 0; k <= m; ++k) {
        auto& v = out.masks[m][k];
        std::sort(v.begin(), v.end(), lex_less);
        for (std::size_t i = 0; i < v.size(); ++i) out.position[m][v[i]] = i;
      }
    }
    return out;
  }();
  return t;
}

}  // namespace

KIndex::KIndex(int m, std::vector<int> indices) : m_(m), indices_(std::move(indices)) {
  check_dim(m);
  if (static_cast<int>(indices_.size()) > m) throw ExteriorError("k-index longer than ambient dimension");
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] < 1 || indices_[i] > m) throw ExteriorError("k-index entry out of range 1..m");
    if (i > 0 && indices_[i] <= indices_[i - 1]) throw ExteriorError("k-index must be strictly increasing");
  }
}

std::uint32_t KIndex::mask() const {
  std::uint32_t out = 0;
  for (int i : indices_) out |= 1u << (i - 1);
  return out;
}

std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

const std::vector<std::uint32_t>& basis_masks(int m, int k) {
  check_dim(m);
  if (k < 0 || k > m) throw ExteriorError("grade out of range");
  return tables().masks[m][k];
}

std::size_t basis_position(int m, std::uint32_t mask) {
  check_dim(m);
  return tables().position[m].at(mask);
}

int merge_sign(std::uint32_t a, std::uint32_t b) {
  if (a & b) return 0;
  // Each element of a must hop over every smaller element of b.
  int transpositions = 0;
  for (std::uint32_t rest = a; rest != 0; rest &= rest - 1) {
    const int i = std::countr_zero(rest);
    transpositions += std::popcount(b & ((1u << i) - 1));
  }
  return (transpositions & 1) ? -1 : 1;
}

MultiVector::MultiVector(int m, int k) : m_(m), k_(k) {
  check_dim(m);
  if (k < 0 || k > m) throw ExteriorError("grade out of range");
  coeffs_.assign(static_cast<std::size_t>(binomial(m, k)), 0.0);
}

MultiVector::MultiVector(int m, int k, std::vector<double> coeffs) : MultiVector(m, k) {
  if (coeffs.size() != coeffs_.size()) {
    throw ExteriorError("coefficient count " + std::to_string(coeffs.size()) + " != C(m,k) = " +
                        std::to_string(coeffs_.size()));
  }
  coeffs_ = std::move(coeffs);
}

MultiVector MultiVector::scalar(int m, double value) { return MultiVector(m, 0, {value}); }

MultiVector MultiVector::vector(std::span<const double> v) {
  return MultiVector(static_cast<int>(v.size()), 1, std::vector<double>(v.begin(), v.end()));
}

MultiVector MultiVector::basis(const KIndex& index) {
  MultiVector out(index.dim(), index.grade());
  out.coeffs_[basis_position(index.dim(), index.mask())] = 1.0;
  return out;
}

double MultiVector::coeff(const KIndex& index) const {
  if (index.dim() != m_ || index.grade() != k_) throw ExteriorError("k-index does not match multivector");
  return coeffs_[basis_position(m_, index.mask())];
}

MultiVector& MultiVector::operator+=(const MultiVector& other) {
  if (other.m_ != m_ || other.k_ != k_) throw ExteriorError("sum of mismatched multivectors");
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
  return *this;
}

MultiVector& MultiVector::operator-=(const MultiVector& other) {
  if (other.m_ != m_ || other.k_ != k_) throw ExteriorError("difference of mismatched multivectors");
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= other.coeffs_[i];
  return *this;
}

MultiVector& MultiVector::operator*=(double s) {
  for (double& c : coeffs_) c *= s;
  return *this;
}

MultiVector operator+(MultiVector a, const MultiVector& b) { return a += b; }
MultiVector operator-(MultiVector a, const MultiVector& b) { return a -= b; }
MultiVector operator*(double s, MultiVector a) { return a *= s; }

MultiVector wedge(const MultiVector& a, const MultiVector& b) {
  if (a.dim() != b.dim()) throw ExteriorError("wedge of multivectors from different ambient spaces");
  const int m = a.dim();
  if (a.grade() + b.grade() > m) {
    throw ExteriorError("wedge grade overflow: " + std::to_string(a.grade()) + " + " +
                        std::to_string(b.grade()) + " > " + std::to_string(m));
  }
  if (a.grade() == 1 && b.grade() == 1) {
    // Hot path: bivector a ^ b, pairs (p < q) in lexicographic order.
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(binomial(m, 2)));
    for (int p = 0; p < m; ++p) {
      for (int q = p + 1; q < m; ++q) out.push_back(a[p] * b[q] - a[q] * b[p]);
    }
    return MultiVector(m, 2, std::move(out));
  }
  const auto& ma = basis_masks(m, a.grade());
  const auto& mb = basis_masks(m, b.grade());
  std::vector<double> out(static_cast<std::size_t>(binomial(m, a.grade() + b.grade())), 0.0);
  for (std::size_t i = 0; i < ma.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < mb.size(); ++j) {
      const int s = merge_sign(ma[i], mb[j]);
      if (s == 0) continue;
      out[basis_position(m, ma[i] | mb[j])] += s * a[i] * b[j];
    }
  }
  return MultiVector(m, a.grade() + b.grade(), std::move(out));
}

MultiVector hodge(const MultiVector& a) {
  const int m = a.dim();
  const std::uint32_t full = (1u << m) - 1;
  const auto& masks = basis_masks(m, a.grade());
  std::vector<double> out(static_cast<std::size_t>(binomial(m, m - a.grade())), 0.0);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const std::uint32_t complement = full & ~masks[i];
    out[basis_position(m, complement)] = merge_sign(masks[i], complement) * a[i];
  }
  return MultiVector(m, m - a.grade(), std::move(out));
}

double inner(const MultiVector& a, const MultiVector& b) {
  if (a.dim() != b.dim() || a.grade() != b.grade()) {
    throw ExteriorError("inner product needs equal ambient dimension and grade");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.coeffs().size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const MultiVector& a) { return std::sqrt(inner(a, a)); }

namespace {
double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
void check_same_dim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ExteriorError("vectors of different dimension");
}
}  // namespace

double triple_identity_residual(std::span<const double> a, std::span<const double> b,
                                std::span<const double> c) {
  check_same_dim(a, b);
  check_same_dim(a, c);
  const auto va = MultiVector::vector(a);
  const auto vb = MultiVector::vector(b);
  const auto vc = MultiVector::vector(c);
  const MultiVector lhs = wedge(va, hodge(wedge(vb, vc)));
  const MultiVector rhs = dot(a, c) * hodge(vb) - dot(a, b) * hodge(vc);
  return norm(lhs - rhs);
}

double muuibn_residual(std::span<const double> a, std::span<const double> b) {
  check_same_dim(a, b);
  const auto va = MultiVector::vector(a);
  const auto vb = MultiVector::vector(b);
  const MultiVector rotated = hodge(wedge(hodge(wedge(va, vb)), vb));
  return norm(dot(b, b) * va - dot(a, b) * vb + rotated);
}

}  // namespace kwc::exterior
