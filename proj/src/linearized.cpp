#include "rkg/linearized.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include "rkg/parallel.hpp"

namespace rkg {

namespace {

double mode_log_weight(int l, int j, const NormParams& p) {
  const double al = std::abs(l);
  return (l == 0 ? 0.0 : 0.5 * std::log(2.0)) + p.sigma * al +
         p.s * std::log(std::max(1.0, al)) + p.r * std::log(omega(j));
}

Eigen::VectorXd log_weights_of(const std::vector<std::pair<int, int>>& modes,
                               const NormParams& p) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(modes.size()));
  for (size_t a = 0; a < modes.size(); ++a) w[a] = mode_log_weight(modes[a].first, modes[a].second, p);
  return w;
}

/// X -> diag(e^{wo}) X diag(e^{-wi}).
Eigen::MatrixXd weigh(const Eigen::MatrixXd& X, const Eigen::VectorXd& wo,
                      const Eigen::VectorXd& wi) {
  Eigen::MatrixXd S(X.rows(), X.cols());
  for (Eigen::Index b = 0; b < X.cols(); ++b) {
    for (Eigen::Index a = 0; a < X.rows(); ++a) S(a, b) = X(a, b) * std::exp(wo[a] - wi[b]);
  }
  return S;
}

double max_singular(const Eigen::MatrixXd& S) {
  if (S.size() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(S);
  return svd.singularValues()(0);
}

}  // namespace

LinearizedOperator::LinearizedOperator(double eps, std::shared_ptr<const KernelJacobian> jac,
                                       int Ln, int Jmax, const NormParams& scale)
    : eps_(eps), jac_(std::move(jac)), Ln_(Ln), Jmax_(Jmax), scale_(scale),
      T_(jac_->u_squared()) {
  const CouplingPattern& pat = jac_->pattern();
  std::unordered_map<int64_t, int> index;
  class_id_.assign(static_cast<size_t>(Ln_ + 1) * (Jmax_ + 1), -1);
  for (int l = 0; l <= Ln_; ++l) {
    for (int j = 0; j <= Jmax_; ++j) {
      if (l == j + 1) continue;
      auto [it, fresh] = index.emplace(pat.key(l, j), static_cast<int>(modes_.size()));
      if (fresh) modes_.emplace_back();
      class_id_[static_cast<size_t>(l) * (Jmax_ + 1) + j] = it->second;
      modes_[it->second].emplace_back(l, j);
    }
  }
  kgroup_.assign(modes_.size(), -1);
  for (int g = 0; g < jac_->groups(); ++g) {
    const int i = jac_->group_modes(g).front();
    auto it = index.find(pat.key(i + 1, i));
    if (it != index.end()) kgroup_[it->second] = g;
  }
}

LinearizedOperator LinearizedOperator::assemble(double eps, const CoeffField& w,
                                                const KernelField& v, int Ln, int Jmax,
                                                const NormParams& scale) {
  return LinearizedOperator(eps, std::make_shared<KernelJacobian>(v, w), Ln, Jmax, scale);
}

Profile LinearizedOperator::b0() const {
  Profile p = jac_->u_squared().profile(0);
  for (double& x : p) x *= 3.0;
  return trim(p);
}

int LinearizedOperator::class_of(int l, int j) const {
  if (l < 0 || l > Ln_ || j < 0 || j > Jmax_) return -1;
  return class_id_[static_cast<size_t>(l) * (Jmax_ + 1) + j];
}

size_t LinearizedOperator::dimension() const {
  size_t n = 0;
  for (const auto& m : modes_) n += m.size();
  return n;
}

Eigen::VectorXd LinearizedOperator::symbol(int c) const {
  const auto& md = modes_[c];
  Eigen::VectorXd d(static_cast<Eigen::Index>(md.size()));
  for (size_t a = 0; a < md.size(); ++a) {
    const double l = md[a].first, wj = omega(md[a].second);
    d[a] = omega2() * l * l - wj * wj;
  }
  return d;
}

Eigen::MatrixXd LinearizedOperator::coupling(int c) const {
  const auto& md = modes_[c];
  const int n = static_cast<int>(md.size());
  Eigen::MatrixXd K(n, n);
  for (int b = 0; b < n; ++b) {
    const auto [k, q] = md[b];
    for (int a = 0; a < n; ++a) {
      const auto [l, j] = md[a];
      double t = T_(std::abs(l - k), j, q);
      if (k >= 1) t += T_(l + k, j, q);
      K(a, b) = 3.0 * t;
    }
  }
  const int g = kgroup_[c];
  if (g < 0) return K;

  const std::vector<int>& km = jac_->group_modes(g);
  const int nv = static_cast<int>(km.size());
  Eigen::MatrixXd C(nv, n), B(n, nv);
  for (int ii = 0; ii < nv; ++ii) {
    const int i = km[ii], wi = i + 1;
    for (int b = 0; b < n; ++b) {
      const auto [k, q] = md[b];
      double t = T_(std::abs(wi - k), i, q);
      if (k >= 1) t += T_(wi + k, i, q);
      C(ii, b) = 6.0 * t;
    }
    for (int a = 0; a < n; ++a) {
      const auto [l, j] = md[a];
      B(a, ii) = 1.5 * (T_(std::abs(l - wi), j, i) + T_(l + wi, j, i));
    }
  }
  K.noalias() += B * jac_->factor(g).solve(C);
  return K;
}

Eigen::MatrixXd LinearizedOperator::matrix(int c) const {
  Eigen::MatrixXd L = -eps_ * coupling(c);
  L.diagonal() += symbol(c);
  return L;
}

LinearizedOperator::Parts LinearizedOperator::parts(int c) const {
  const auto& md = modes_[c];
  const int n = static_cast<int>(md.size());
  Eigen::MatrixXd K0 = Eigen::MatrixXd::Zero(n, n), K1(n, n);
  for (int b = 0; b < n; ++b) {
    const auto [k, q] = md[b];
    for (int a = 0; a < n; ++a) {
      const auto [l, j] = md[a];
      const double t0 = 3.0 * T_(std::abs(l - k), j, q);
      K1(a, b) = t0 + (k >= 1 ? 3.0 * T_(l + k, j, q) : 0.0);
      if (l == k) K0(a, b) = t0;
    }
  }
  Parts p;
  p.D = -eps_ * K0;
  p.D.diagonal() += symbol(c);
  p.M1 = K1 - K0;
  p.M2 = coupling(c) - K1;
  return p;
}

std::vector<std::pair<int, int>> LinearizedOperator::modes() const {
  std::vector<std::pair<int, int>> out;
  for (int l = 0; l <= Ln_; ++l) {
    for (int j = 0; j <= Jmax_; ++j) {
      if (l != j + 1) out.emplace_back(l, j);
    }
  }
  return out;
}

Eigen::MatrixXd LinearizedOperator::dense() const {
  const auto all = modes();
  std::vector<int> pos(class_id_.size(), -1);
  for (size_t a = 0; a < all.size(); ++a) {
    pos[static_cast<size_t>(all[a].first) * (Jmax_ + 1) + all[a].second] = static_cast<int>(a);
  }
  const Eigen::Index N = static_cast<Eigen::Index>(all.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
  for (int c = 0; c < classes(); ++c) {
    const Eigen::MatrixXd L = matrix(c);
    const auto& md = modes_[c];
    for (size_t a = 0; a < md.size(); ++a) {
      const int pa = pos[static_cast<size_t>(md[a].first) * (Jmax_ + 1) + md[a].second];
      for (size_t b = 0; b < md.size(); ++b) {
        M(pa, pos[static_cast<size_t>(md[b].first) * (Jmax_ + 1) + md[b].second]) = L(a, b);
      }
    }
  }
  return M;
}

Eigen::VectorXd LinearizedOperator::log_weights(int c, const NormParams& p) const {
  return log_weights_of(modes_[c], p);
}

Eigen::MatrixXd LinearizedOperator::scaled(int c, const Eigen::MatrixXd& L) const {
  const Eigen::VectorXd w = log_weights(c, scale_);
  return weigh(L, w, w);
}

const LinearizedOperator::Cache& LinearizedOperator::cache(int c) const {
  auto it = cache_.find(c);
  if (it != cache_.end()) return it->second;
  Cache entry;
  entry.K = coupling(c);
  Eigen::MatrixXd L = -eps_ * entry.K;
  L.diagonal() += symbol(c);
  entry.lu.compute(scaled(c, L));
  return cache_.emplace(c, std::move(entry)).first->second;
}

std::vector<int> LinearizedOperator::touched_classes(const CoeffField& f) const {
  std::vector<char> hit(modes_.size(), 0);
  if (!f.empty()) {
    for (int l = 0; l <= std::min(Ln_, f.L()); ++l) {
      for (int j = 0; j <= std::min(Jmax_, f.J()); ++j) {
        if (f(l, j) == 0.0 || l == j + 1) continue;
        hit[class_id_[static_cast<size_t>(l) * (Jmax_ + 1) + j]] = 1;
      }
    }
  }
  std::vector<int> out;
  for (size_t c = 0; c < hit.size(); ++c) {
    if (hit[c]) out.push_back(static_cast<int>(c));
  }
  return out;
}

namespace {

Eigen::VectorXd gather(const CoeffField& f, const std::vector<std::pair<int, int>>& md) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(md.size()));
  for (size_t a = 0; a < md.size(); ++a) x[a] = f.get(md[a].first, md[a].second);
  return x;
}

void scatter(CoeffField& f, const std::vector<std::pair<int, int>>& md, const Eigen::VectorXd& x) {
  for (size_t a = 0; a < md.size(); ++a) f(md[a].first, md[a].second) = x[a];
}

}  // namespace

CoeffField LinearizedOperator::apply(const CoeffField& h) const {
  CoeffField out(Ln_, Jmax_);
  for (int c : touched_classes(h)) {
    const Eigen::VectorXd x = gather(h, modes_[c]);
    Eigen::VectorXd y = symbol(c).cwiseProduct(x) - eps_ * (cache(c).K * x);
    scatter(out, modes_[c], y);
  }
  return out;
}

CoeffField LinearizedOperator::dgamma(const CoeffField& h) const {
  CoeffField out(Ln_, Jmax_);
  for (int c : touched_classes(h)) {
    scatter(out, modes_[c], cache(c).K * gather(h, modes_[c]));
  }
  return out;
}

CoeffField LinearizedOperator::solve(const CoeffField& rhs) const {
  CoeffField out(Ln_, Jmax_);
  for (int c : touched_classes(rhs)) {
    const Eigen::VectorXd w = log_weights(c, scale_);
    Eigen::VectorXd r = gather(rhs, modes_[c]);
    r = r.cwiseProduct(w.array().exp().matrix());
    Eigen::VectorXd y = cache(c).lu.solve(r);
    y = y.cwiseProduct((-w).array().exp().matrix());
    scatter(out, modes_[c], y);
  }
  return out;
}

double LinearizedOperator::class_inverse_norm(int c, InverseNormMethod method) const {
  if (method == InverseNormMethod::Exact) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(scaled(c, matrix(c)));
    const double smin = svd.singularValues().minCoeff();
    return smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
  }
  // Classes nobody solved on are factorized locally, so a sweep does not fill the cache.
  Eigen::PartialPivLU<Eigen::MatrixXd> local;
  auto it = cache_.find(c);
  if (it == cache_.end()) local.compute(scaled(c, matrix(c)));
  const Eigen::PartialPivLU<Eigen::MatrixXd>& lu = it == cache_.end() ? local : it->second.lu;
  const Eigen::Index n = static_cast<Eigen::Index>(modes_[c].size());

  if (method == InverseNormMethod::Bound) {
    const Eigen::MatrixXd X = lu.inverse();
    if (!X.allFinite()) return std::numeric_limits<double>::infinity();
    const double one = X.cwiseAbs().colwise().sum().maxCoeff();
    const double inf = X.cwiseAbs().rowwise().sum().maxCoeff();
    return std::min(X.norm(), std::sqrt(one * inf));
  }

  Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
  for (Eigen::Index a = 0; a < n; ++a) x[a] += 0.5 * std::sin(1.0 + 3.0 * a);
  x.normalize();
  double est = 0.0;
  for (int it2 = 0; it2 < 60; ++it2) {
    const Eigen::VectorXd z = lu.transpose().solve(lu.solve(x));
    const double lam = x.dot(z);
    const double zn = z.norm();
    if (!(zn > 0.0)) break;
    x = z / zn;
    const double next = std::sqrt(std::max(lam, 0.0));
    if (it2 > 3 && std::abs(next - est) <= 1e-10 * next) {
      est = next;
      break;
    }
    est = next;
  }
  return est;
}

LinearizedOperator::InverseNorm LinearizedOperator::inverse_norm(
    InverseNormMethod method, const std::vector<int>* which) const {
  std::vector<int> list;
  if (which) {
    list = *which;
  } else {
    list.resize(modes_.size());
    for (size_t c = 0; c < list.size(); ++c) list[c] = static_cast<int>(c);
  }
  // The cache is only read here, never written, so classes can be swept in parallel.
  std::vector<double> vals(list.size(), 0.0);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads())
  for (int a = 0; a < static_cast<int>(list.size()); ++a) vals[a] = class_inverse_norm(list[a], method);
  InverseNorm r;
  r.classes = static_cast<int>(list.size());
  for (size_t a = 0; a < list.size(); ++a) {
    if (vals[a] > r.value) {
      r.value = vals[a];
      r.worst_class = list[a];
    }
  }
  return r;
}

// ---------------------------------------------------------------------------------------
// Sturm-Liouville blocks

namespace {

RowMultipliers profile_multipliers(const Profile& b0) {
  CoeffField f(0, std::max<int>(0, static_cast<int>(b0.size()) - 1));
  for (size_t q = 0; q < b0.size(); ++q) f(0, static_cast<int>(q)) = b0[q];
  return RowMultipliers(f);
}

}  // namespace

SpectralBlock diagonalize_block(int ell, double eps, const Profile& b0, int Jmax, bool vectors) {
  const Profile b = trim(b0.empty() ? Profile{0.0} : b0);
  if (eps != 0.0 && std::abs(eps) * 1.05 * grid_sup(b) >= 1.0) {
    throw std::domain_error("diagonalize_block: eps beyond the Neumann threshold");
  }
  SpectralBlock blk;
  blk.ell = ell;
  blk.Jmax = Jmax;
  blk.eps = eps;
  blk.lambda.assign(static_cast<size_t>(Jmax + 1), std::numeric_limits<double>::quiet_NaN());
  if (vectors) blk.phi = Eigen::MatrixXd::Zero(Jmax + 1, Jmax + 1);

  const RowMultipliers T = profile_multipliers(b);
  const CouplingPattern::Space sp = space_pattern(b);
  std::vector<std::vector<int>> groups;
  if (sp == CouplingPattern::Space::Diagonal) {
    groups.resize(static_cast<size_t>(Jmax + 1));
    for (int j = 0; j <= Jmax; ++j) {
      if (blk.has(j)) groups[j].push_back(j);
    }
  } else {
    groups.resize(sp == CouplingPattern::Space::Parity ? 2 : 1);
    for (int j = 0; j <= Jmax; ++j) {
      if (blk.has(j)) groups[sp == CouplingPattern::Space::Parity ? (j & 1) : 0].push_back(j);
    }
  }

  for (const std::vector<int>& idx : groups) {
    const int n = static_cast<int>(idx.size());
    if (n == 0) continue;
    Eigen::MatrixXd M(n, n);
    for (int a = 0; a < n; ++a) {
      for (int c = 0; c < n; ++c) M(a, c) = eps * T(0, idx[a], idx[c]);
      M(a, a) += omega(idx[a]) * omega(idx[a]);
    }
    if (n == 1) {
      blk.lambda[idx[0]] = M(0, 0);
      if (vectors) blk.phi(idx[0], idx[0]) = 1.0;
      continue;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success) throw std::runtime_error("diagonalize_block: eigensolver failed");
    const Eigen::MatrixXd& V = es.eigenvectors();

    // Greedy assignment by decreasing overlap |<phi_k, e_j>|^2.
    std::vector<std::tuple<double, int, int>> pairs;
    pairs.reserve(static_cast<size_t>(n) * n);
    for (int k = 0; k < n; ++k) {
      for (int a = 0; a < n; ++a) pairs.emplace_back(V(a, k) * V(a, k), a, k);
    }
    std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) {
      if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
      return std::make_pair(std::get<1>(x), std::get<2>(x)) < std::make_pair(std::get<1>(y), std::get<2>(y));
    });
    std::vector<char> used_a(n, 0), used_k(n, 0);
    int assigned = 0;
    for (const auto& [ov, a, k] : pairs) {
      if (used_a[a] || used_k[k]) continue;
      used_a[a] = used_k[k] = 1;
      const int j = idx[a];
      blk.lambda[j] = es.eigenvalues()[k];
      if (vectors) {
        const double sgn = V(a, k) < 0.0 ? -1.0 : 1.0;
        for (int r = 0; r < n; ++r) blk.phi(idx[r], j) = sgn * V(r, k);
      }
      if (++assigned == n) break;
    }
  }
  return blk;
}

DriftReport drift_check(const SpectralBlock& blk, const Profile& b0, double delta) {
  DriftReport rep;
  const double mean = mean_integral(b0);
  const double scale = 2.0 * c_delta(delta) * std::abs(blk.eps) * space_norm(b0, 2.0);
  for (int j = 0; j <= blk.Jmax; ++j) {
    if (!blk.has(j)) continue;
    const double drift = std::abs(blk.lambda[j] - omega(j) * omega(j) - blk.eps * mean);
    const double bound = scale / std::pow(omega(j), 1.0 - delta);
    const double ratio = bound > 0.0 ? drift / bound : (drift > 0.0 ? HUGE_VAL : 0.0);
    if (ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.worst_j = j;
    }
  }
  rep.ok = rep.max_ratio <= 1.0;
  return rep;
}

EpsDerivatives eigen_derivatives(int ell, double eps, const Profile& b0, int Jmax, double h) {
  const SpectralBlock m = diagonalize_block(ell, eps - h, b0, Jmax);
  const SpectralBlock c = diagonalize_block(ell, eps, b0, Jmax);
  const SpectralBlock p = diagonalize_block(ell, eps + h, b0, Jmax);
  EpsDerivatives d;
  d.first.assign(static_cast<size_t>(Jmax + 1), std::numeric_limits<double>::quiet_NaN());
  d.second = d.first;
  for (int j = 0; j <= Jmax; ++j) {
    if (!c.has(j)) continue;
    d.first[j] = (p.lambda[j] - m.lambda[j]) / (2.0 * h);
    d.second[j] = (p.lambda[j] - 2.0 * c.lambda[j] + m.lambda[j]) / (h * h);
  }
  return d;
}

// ---------------------------------------------------------------------------------------
// Small divisors

bool DivisorReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const DivisorRow& r) { return r.pass; });
}

std::vector<int> DivisorReport::failures() const {
  std::vector<int> out;
  for (const DivisorRow& r : rows) {
    if (!r.pass) out.push_back(r.ell);
  }
  return out;
}

DivisorReport small_divisors(double eps, const Profile& b0, int Ln, int Jmax, double gamma,
                             double tau) {
  DivisorReport rep;
  rep.eps = eps;
  rep.gamma = gamma;
  rep.tau = tau;
  rep.rows.resize(static_cast<size_t>(Ln + 1));
  const double w2 = 1.0 + eps;
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads())
  for (int l = 0; l <= Ln; ++l) {
    const SpectralBlock blk = diagonalize_block(l, eps, b0, Jmax, false);
    DivisorRow row;
    row.ell = l;
    row.alpha = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= Jmax; ++j) {
      if (!blk.has(j)) continue;
      const double a = std::abs(w2 * l * l - blk.lambda[j]);
      if (a < row.alpha) {
        row.alpha = a;
        row.jmin = j;
        row.lambda = blk.lambda[j];
      }
    }
    row.floor = gamma / (20.0 * std::pow(std::max(1.0, static_cast<double>(l)), tau - 1.0));
    row.pass = row.alpha >= row.floor;
    rep.rows[l] = row;
  }
  return rep;
}

ProductBound product_bound_constant(const DivisorReport& rep) {
  ProductBound pb;
  const int Ln = static_cast<int>(rep.rows.size()) - 1;
  if (rep.eps <= 0.0) {
    pb.constant = std::numeric_limits<double>::infinity();
    return pb;
  }
  const double beta = (2.0 - rep.tau) / rep.tau;
  const double p = 2.0 * (rep.tau - 1.0) / beta;
  const double scale = rep.gamma * rep.gamma * std::pow(rep.eps, rep.tau - 1.0);
  for (int l = -Ln; l <= Ln; ++l) {
    for (int k = -Ln; k <= Ln; ++k) {
      if (k == l) continue;
      const double c = scale / (rep.alpha(l) * rep.alpha(k) * std::pow(std::abs(k - l), p));
      if (c > pb.constant) {
        pb.constant = c;
        pb.ell = l;
        pb.k = k;
      }
    }
  }
  return pb;
}

// ---------------------------------------------------------------------------------------
// Preconditioned split

SplitReport preconditioned_split_check(const LinearizedOperator& op, double gamma, double tau,
                                       const std::vector<int>& classes, int probes) {
  SplitReport rep;
  rep.neumann_converges = true;
  const double eps = op.eps();
  NormParams ps = op.scale();
  NormParams pz = ps;
  pz.s += 0.5 * (tau - 1.0);

  for (int c : classes) {
    const auto& md = op.class_modes(c);
    const int n = static_cast<int>(md.size());
    if (n == 0) continue;
    ++rep.classes;
    const LinearizedOperator::Parts P = op.parts(c);

    Eigen::MatrixXd Dm = Eigen::MatrixXd::Zero(n, n), U = Dm;
    for (int a0 = 0; a0 < n;) {
      int a1 = a0;
      while (a1 < n && md[a1].first == md[a0].first) ++a1;
      const int m = a1 - a0;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P.D.block(a0, a0, m, m));
      const Eigen::VectorXd d = es.eigenvalues();
      const Eigen::MatrixXd& V = es.eigenvectors();
      Eigen::VectorXd inv_half(m), sgn(m);
      for (int i = 0; i < m; ++i) {
        inv_half[i] = 1.0 / std::sqrt(std::abs(d[i]));
        sgn[i] = d[i] < 0.0 ? -1.0 : 1.0;
      }
      Dm.block(a0, a0, m, m) = V * inv_half.asDiagonal() * V.transpose();
      U.block(a0, a0, m, m) = V * sgn.asDiagonal() * V.transpose();
      a0 = a1;
    }
    const Eigen::MatrixXd R1 = Dm * P.M1 * Dm, R2 = Dm * P.M2 * Dm;
    const Eigen::MatrixXd N = eps * U * (R1 + R2);

    const Eigen::VectorXd ws = log_weights_of(md, ps), wz = log_weights_of(md, pz);
    rep.U_norm = std::max(rep.U_norm, max_singular(weigh(U, ws, ws)));
    rep.Dhalf_ratio =
        std::max(rep.Dhalf_ratio, max_singular(weigh(Dm, ws, wz)) * std::sqrt(gamma) / 9.0);
    const double r1 = max_singular(weigh(R1, wz, wz)), r2 = max_singular(weigh(R2, wz, wz));
    rep.R1_norm = std::max(rep.R1_norm, r1);
    rep.R2_norm = std::max(rep.R2_norm, r2);
    const Eigen::MatrixXd Nz = weigh(N, wz, wz);
    rep.neumann_norm = std::max(rep.neumann_norm, max_singular(Nz));

    bool converged = true;
    for (int pr = 0; pr < probes; ++pr) {
      std::mt19937_64 rng(static_cast<uint64_t>(1000003) * c + pr);
      std::normal_distribution<double> g(0.0, 1.0);
      Eigen::VectorXd r(n);
      for (int a = 0; a < n; ++a) r[a] = g(rng) * std::exp(-ws[a]);

      CoeffField rhs(op.Ln(), op.Jmax());
      for (int a = 0; a < n; ++a) rhs(md[a].first, md[a].second) = r[a];
      const CoeffField xs = op.solve(rhs);
      Eigen::VectorXd x(n);
      for (int a = 0; a < n; ++a) x[a] = xs(md[a].first, md[a].second);

      // Iterate in weighted coordinates z' = diag(e^{wz}) z to keep the scales balanced.
      const Eigen::VectorXd y = U * (Dm * r);
      Eigen::VectorXd yz = y.cwiseProduct(wz.array().exp().matrix());
      Eigen::VectorXd z = yz;
      int terms = 0;
      bool ok = false;
      for (; terms < 2000; ++terms) {
        const Eigen::VectorXd next = yz + Nz * z;
        const double dn = (next - z).norm(), zn = next.norm();
        z = next;
        if (!std::isfinite(zn) || zn > 1e12 * yz.norm()) break;
        if (dn <= 1e-15 * zn) {
          ok = true;
          break;
        }
      }
      rep.neumann_terms = std::max(rep.neumann_terms, terms);
      if (!ok) {
        converged = false;
        continue;
      }
      const Eigen::VectorXd xn = Dm * z.cwiseProduct((-wz).array().exp().matrix());
      const Eigen::VectorXd dw = (xn - x).cwiseProduct(ws.array().exp().matrix());
      const Eigen::VectorXd xw = x.cwiseProduct(ws.array().exp().matrix());
      rep.neumann_vs_dense = std::max(rep.neumann_vs_dense, dw.norm() / xw.norm());
    }
    rep.neumann_converges = rep.neumann_converges && converged;
  }
  rep.R1_constant = rep.R1_norm * gamma * std::pow(eps, 0.5 * (tau - 1.0));
  rep.R2_constant = rep.R2_norm * gamma;
  return rep;
}

void write_divisors_csv(std::ostream& os, const DivisorReport& rep) {
  os << "l,j,lambda,alpha,floor,pass\n" << std::setprecision(17);
  for (const DivisorRow& r : rep.rows) {
    os << r.ell << ',' << r.jmin << ',' << r.lambda << ',' << r.alpha << ',' << r.floor << ','
       << (r.pass ? 1 : 0) << '\n';
  }
}

void write_spectrum_csv(std::ostream& os, const std::vector<SpectralBlock>& blocks,
                        const DivisorReport* rep) {
  os << "l,j,lambda,alpha\n" << std::setprecision(17);
  for (const SpectralBlock& b : blocks) {
    for (int j = 0; j <= b.Jmax; ++j) {
      if (!b.has(j)) continue;
      os << b.ell << ',' << j << ',' << b.lambda[j] << ',';
      if (rep && b.ell < static_cast<int>(rep->rows.size())) os << rep->alpha(b.ell);
      os << '\n';
    }
  }
}

}  // namespace rkg
