#include "rkg/bifurcation.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace rkg {

KernelField explicit_kernel_solution(int m, int sign, int JV) {
  if (m < 0) throw std::invalid_argument("explicit_kernel_solution: m < 0");
  KernelField v(std::max(JV, m));
  v.v[m] = (sign < 0 ? -1.0 : 1.0) * std::sqrt(4.0 * omega(m) / 3.0);
  return v;
}

CoeffField embed(const KernelField& v, int L, int J) {
  CoeffField u(std::max(L, v.JV() + 1), std::max(J, v.JV()));
  for (int j = 0; j <= v.JV(); ++j) u(j + 1, j) = 0.5 * v.v[j];
  return u;
}

KernelField extract_kernel(const CoeffField& u, int JV) {
  KernelField v(JV);
  for (int j = 0; j <= JV; ++j) v.v[j] = 2.0 * u.get(j + 1, j);
  return v;
}

double kernel_norm(const KernelField& v, const NormParams& p) {
  double acc = 0.0;
  for (int j = 0; j <= v.JV(); ++j) {
    if (v.v[j] == 0.0) continue;
    const double x = 0.5 * v.v[j] * norm_weight(j + 1, j, p);
    acc += x * x;
  }
  return std::sqrt(acc);
}

namespace {

CoeffField full_field(const KernelField& v, const CoeffField& w) {
  CoeffField u = w.empty() ? CoeffField(0, 0) : w;
  u = resized(u, std::max(u.L(), v.JV() + 1), std::max(u.J(), v.JV()));
  for (int j = 0; j <= v.JV(); ++j) u(j + 1, j) += 0.5 * v.v[j];
  return trimmed(u);
}

KernelField residual_at(const KernelField& v, const CoeffField& u, const CoeffField& u2) {
  const std::vector<double> d = product_diagonal(u2, u, v.JV());
  KernelField f(v.JV());
  for (int j = 0; j <= v.JV(); ++j) f.v[j] = omega(j) * omega(j) * v.v[j] - 2.0 * d[j];
  return f;
}

void require_W(const CoeffField& w) {
  if (!w.empty() && !in_W(w)) {
    throw std::invalid_argument("kernel equation: w has a component on the kernel");
  }
}

}  // namespace

KernelField kernel_residual(const KernelField& v, const CoeffField& w) {
  require_W(w);
  const CoeffField u = full_field(v, w);
  return residual_at(v, u, field_multiply(u, u));
}

Eigen::MatrixXd linearize_kernel(const KernelField& v, const CoeffField& w) {
  return KernelJacobian(v, w).dense();
}

int64_t BifBlock::det_formula(int m, int j) {
  const int64_t wj = j + 1, wm = m + 1;
  return -wj * (wm - wj) * (wm - wj) * (4 * wm - wj);
}

BifBlock bif_block(int m, int j) {
  if (j < 0 || j >= m) throw std::invalid_argument("bif_block: need 0 <= j < m");
  const int64_t wj = j + 1, wm = m + 1, wk = 2 * m - j + 1;
  BifBlock b;
  b.m = m;
  b.j = j;
  b.a = {wj * wj - 2 * wm * wj, -wm * wj, -wm * wj, wk * wk - 2 * wm * wm};
  return b;
}

KernelJacobian::KernelJacobian(const KernelField& v, const CoeffField& w) : JV_(v.JV()) {
  const CoeffField u = full_field(v, w);
  u2_ = field_multiply(u, u);
  pattern_ = coupling_pattern(u2_);
  const RowMultipliers T(u2_);

  std::map<int64_t, int> index;
  group_of_.resize(static_cast<size_t>(JV_ + 1));
  for (int i = 0; i <= JV_; ++i) {
    auto [it, fresh] = index.emplace(pattern_.key(i + 1, i), static_cast<int>(groups_.size()));
    if (fresh) groups_.emplace_back();
    group_of_[i] = it->second;
    groups_[it->second].push_back(i);
  }

  blocks_.resize(groups_.size());
  lu_.resize(groups_.size());
  for (size_t g = 0; g < groups_.size(); ++g) {
    const std::vector<int>& modes = groups_[g];
    const int n = static_cast<int>(modes.size());
    Eigen::MatrixXd M(n, n);
    for (int a = 0; a < n; ++a) {
      const int i = modes[a];
      for (int c = 0; c < n; ++c) {
        const int k = modes[c];
        const double t = T(std::abs(i - k), i, k) + T(i + k + 2, i, k);
        M(a, c) = (a == c ? omega(i) * omega(i) : 0.0) - 3.0 * t;
      }
    }
    lu_[g].compute(M);
    blocks_[g] = std::move(M);
  }
}

KernelField KernelJacobian::solve(const KernelField& rhs) const {
  KernelField x(JV_);
  for (size_t g = 0; g < groups_.size(); ++g) {
    const std::vector<int>& modes = groups_[g];
    Eigen::VectorXd b(static_cast<Eigen::Index>(modes.size()));
    bool any = false;
    for (size_t a = 0; a < modes.size(); ++a) {
      b[a] = rhs.get(modes[a]);
      any = any || b[a] != 0.0;
    }
    if (!any) continue;
    const Eigen::VectorXd y = lu_[g].solve(b);
    for (size_t a = 0; a < modes.size(); ++a) x.v[modes[a]] = y[a];
  }
  return x;
}

Eigen::MatrixXd KernelJacobian::dense() const {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(JV_ + 1, JV_ + 1);
  for (size_t g = 0; g < groups_.size(); ++g) {
    const std::vector<int>& modes = groups_[g];
    for (size_t a = 0; a < modes.size(); ++a) {
      for (size_t c = 0; c < modes.size(); ++c) D(modes[a], modes[c]) = blocks_[g](a, c);
    }
  }
  return D;
}

namespace {

KernelField axpy(const KernelField& v, double a, const KernelField& d) {
  KernelField out = v;
  for (int j = 0; j <= v.JV(); ++j) out.v[j] += a * d.v[j];
  return out;
}

double residual_norm(const KernelField& v, const CoeffField& w, const NormParams& p) {
  const CoeffField u = full_field(v, w);
  return kernel_norm(residual_at(v, u, field_multiply(u, u)), p);
}

}  // namespace

KernelSolveResult solve_kernel(const CoeffField& w, int m, int sign, int JV,
                               const KernelSolveOptions& opt) {
  return solve_kernel_from(w, explicit_kernel_solution(m, sign, JV), opt);
}

KernelSolveResult solve_kernel_from(const CoeffField& w, KernelField v0,
                                    const KernelSolveOptions& opt) {
  require_W(w);
  KernelSolveResult res;
  res.v = std::move(v0);
  for (int it = 0;; ++it) {
    const CoeffField u = full_field(res.v, w);
    const KernelField f = residual_at(res.v, u, field_multiply(u, u));
    const double r = kernel_norm(f, opt.norm);
    res.residuals.push_back(r);
    if (r <= opt.tol) {
      res.converged = true;
      return res;
    }
    if (it == opt.max_iter) return res;

    const KernelField step = KernelJacobian(res.v, w).solve(f);
    double lambda = 1.0;
    KernelField trial = axpy(res.v, -lambda, step);
    double rt = residual_norm(trial, w, opt.norm);
    while (!(rt < r) && lambda > 1.0 / 64) {
      lambda *= 0.5;
      trial = axpy(res.v, -lambda, step);
      rt = residual_norm(trial, w, opt.norm);
    }
    if (!(rt < r)) {  // stalled at the rounding floor
      res.converged = r <= opt.stall_tol;
      return res;
    }
    res.v = std::move(trial);
    ++res.iterations;
  }
}

KernelSolveResult solve_kernel_chord(const CoeffField& w, KernelField v0,
                                     const KernelJacobian& jac, const KernelSolveOptions& opt) {
  require_W(w);
  KernelSolveResult res;
  res.v = std::move(v0);
  CoeffField u = full_field(res.v, w);
  KernelField f = residual_at(res.v, u, field_multiply(u, u));
  double r = kernel_norm(f, opt.norm);
  res.residuals.push_back(r);
  bool stalled = false;
  while (r > opt.tol && res.iterations < opt.max_iter) {
    KernelField trial = axpy(res.v, -1.0, jac.solve(f));
    u = full_field(trial, w);
    KernelField ft = residual_at(trial, u, field_multiply(u, u));
    const double rt = kernel_norm(ft, opt.norm);
    if (!(rt < r)) {
      stalled = true;
      break;
    }
    res.v = std::move(trial);
    f = std::move(ft);
    r = rt;
    res.residuals.push_back(r);
    ++res.iterations;
  }
  res.converged = r <= opt.tol || (stalled && r <= opt.stall_tol);
  return res;
}

KernelField kernel_coupling(const KernelJacobian& jac, const CoeffField& h, int JV) {
  KernelField c(JV);
  if (h.empty()) return c;
  const std::vector<double> d = product_diagonal(jac.u_squared(), trimmed(h), JV);
  for (int i = 0; i <= JV; ++i) c.v[i] = 6.0 * d[i];
  return c;
}

KernelField kernel_derivative(const KernelJacobian& jac, const CoeffField& h) {
  require_W(h);
  return jac.solve(kernel_coupling(jac, h, jac.JV()));
}

KernelField kernel_derivative(const KernelField& v, const CoeffField& w, const CoeffField& h) {
  return kernel_derivative(KernelJacobian(v, w), h);
}

}  // namespace rkg
