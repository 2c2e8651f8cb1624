#include "rkg/coupling.hpp"

#include <numeric>

namespace rkg {

int64_t CouplingPattern::time_key(int l) const {
  if (time_modulus == 0) return l;
  const int r = l % time_modulus;
  return std::min(r, (time_modulus - r) % time_modulus);
}

int64_t CouplingPattern::space_key(int j) const {
  switch (space) {
    case Space::Diagonal: return j;
    case Space::Parity: return j & 1;
    case Space::Full: return 0;
  }
  return 0;
}

namespace {

CouplingPattern::Space merge(CouplingPattern::Space a, const double* row, int n) {
  using S = CouplingPattern::Space;
  for (int q = 1; q < n && a != S::Full; ++q) {
    if (row[q] == 0.0) continue;
    a = (q & 1) ? S::Full : S::Parity;
  }
  return a;
}

}  // namespace

CouplingPattern coupling_pattern(const CoeffField& b) {
  CouplingPattern pat;
  if (b.empty()) return pat;
  for (int l = 0; l <= b.L(); ++l) {
    if (b.row_extent(l) < 0) continue;
    if (l > 0) pat.time_modulus = std::gcd(pat.time_modulus, l);
    pat.space = merge(pat.space, b.row(l), b.J() + 1);
  }
  return pat;
}

CouplingPattern::Space space_pattern(const Profile& p) {
  return merge(CouplingPattern::Space::Diagonal, p.data(), static_cast<int>(p.size()));
}

RowMultipliers::RowMultipliers(const CoeffField& b) {
  if (b.empty()) return;
  prefix_.resize(static_cast<size_t>(b.L() + 1));
  for (int p = 0; p <= b.L(); ++p) {
    const int ext = b.row_extent(p);
    if (ext < 0) continue;
    const double* r = b.row(p);
    std::vector<double>& P = prefix_[p];
    P.resize(static_cast<size_t>(ext + 1));
    for (int q = 0; q <= ext; ++q) P[q] = r[q] + (q >= 2 ? P[q - 2] : 0.0);
  }
}

}  // namespace rkg
