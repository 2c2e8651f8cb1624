#pragma once

#include <cstdint>
#include <vector>

#include "rkg/field_algebra.hpp"

namespace rkg {

/**
 * Invariant-subspace structure of multiplication by a fixed field b.
 *
 * Multiplying by b moves a coefficient (k, i) to (|l +- k|, n) with b(l, q) != 0 and
 * n in {|i-q|, ..., i+q}. Residues of l modulo the gcd of the nonzero time indices
 * (folded under l -> -l) and the parity of j, when every nonzero q is even, are
 * therefore preserved. Every operator built from products with b is block diagonal
 * over these classes.
 */
struct CouplingPattern {
  enum class Space { Diagonal, Parity, Full };

  /// gcd of the nonzero time indices carrying b; 0 when b only has l = 0.
  int time_modulus = 0;
  Space space = Space::Diagonal;

  int64_t time_key(int l) const;
  int64_t space_key(int j) const;
  int64_t key(int l, int j) const { return time_key(l) * 1000003LL + space_key(j); }
};

CouplingPattern coupling_pattern(const CoeffField& b);
/// Spatial pattern of a single profile.
CouplingPattern::Space space_pattern(const Profile& p);

/**
 * Matrix elements <b_p e_i, e_j> for every row p of b, from parity prefix sums of the
 * row coefficients: O(1) per element.
 */
class RowMultipliers {
 public:
  RowMultipliers() = default;
  explicit RowMultipliers(const CoeffField& b);

  /// <b_p e_i, e_j>; zero for rows outside the truncation.
  double operator()(int p, int j, int i) const {
    if (p >= static_cast<int>(prefix_.size())) return 0.0;
    const std::vector<double>& P = prefix_[p];
    if (P.empty()) return 0.0;
    const int lo = j > i ? j - i : i - j;
    int hi = i + j;
    const int ext = static_cast<int>(P.size()) - 1;
    if (hi > ext) hi = ext - ((ext - lo) & 1);
    if (hi < lo) return 0.0;
    return lo >= 2 ? P[hi] - P[lo - 2] : P[hi];
  }
  bool row_zero(int p) const {
    return p >= static_cast<int>(prefix_.size()) || prefix_[p].empty();
  }
  int rows() const { return static_cast<int>(prefix_.size()); }

 private:
  std::vector<std::vector<double>> prefix_;
};

}  // namespace rkg
