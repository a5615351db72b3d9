#include "ifr/nnls.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ifr/common.hpp"

namespace ifr {

namespace {

// Cholesky factor of G restricted to the passive set, grown one column at a
// time. Falls back to a fresh LDLT solve when the Gram block is numerically
// singular.
class PassiveFactor {
 public:
  PassiveFactor(const Eigen::MatrixXd& G, const Eigen::VectorXd& g) : G_(G), g_(g) {}

  void append(int j) {
    idx_.push_back(j);
    if (!chol_ok_) return;
    const auto p = static_cast<Eigen::Index>(idx_.size());
    Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(p, p);
    grown.topLeftCorner(p - 1, p - 1) = L_;
    Eigen::VectorXd col(p - 1);
    for (Eigen::Index i = 0; i < p - 1; ++i) col(i) = G_(idx_[i], j);
    Eigen::VectorXd l = col;
    if (p > 1) L_.triangularView<Eigen::Lower>().solveInPlace(l);
    const double d2 = G_(j, j) - l.squaredNorm();
    if (!(d2 > 1e-14 * G_(j, j))) {
      chol_ok_ = false;
      return;
    }
    grown.block(p - 1, 0, 1, p - 1) = l.transpose();
    grown(p - 1, p - 1) = std::sqrt(d2);
    L_ = std::move(grown);
  }

  void reset(const std::vector<int>& idx) {
    idx_.clear();
    L_.resize(0, 0);
    chol_ok_ = true;
    for (int j : idx) append(j);
  }

  const std::vector<int>& indices() const { return idx_; }

  Eigen::VectorXd solve() const {
    const auto p = static_cast<Eigen::Index>(idx_.size());
    Eigen::VectorXd rhs(p);
    for (Eigen::Index i = 0; i < p; ++i) rhs(i) = g_(idx_[i]);
    if (chol_ok_) {
      L_.triangularView<Eigen::Lower>().solveInPlace(rhs);
      L_.transpose().triangularView<Eigen::Upper>().solveInPlace(rhs);
      return rhs;
    }
    Eigen::MatrixXd Gp(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index k = 0; k < p; ++k) Gp(i, k) = G_(idx_[i], idx_[k]);
    return Gp.ldlt().solve(rhs);
  }

 private:
  const Eigen::MatrixXd& G_;
  const Eigen::VectorXd& g_;
  std::vector<int> idx_;
  Eigen::MatrixXd L_;
  bool chol_ok_ = true;
};

}  // namespace

NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iter) {
  if (A.rows() != b.size()) throw ValidationError("nnls: A and b sizes differ");
  const Eigen::Index n = A.cols();
  if (max_iter <= 0) max_iter = static_cast<int>(3 * n);
  const Eigen::MatrixXd G = A.transpose() * A;
  const Eigen::VectorXd g = A.transpose() * b;
  const double tol = 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff()) * std::max<double>(1.0, static_cast<double>(n));

  NnlsResult res;
  res.x = Eigen::VectorXd::Zero(n);
  std::vector<char> in_p(static_cast<std::size_t>(n), 0);
  PassiveFactor fac(G, g);
  Eigen::VectorXd w = g;

  while (res.iterations < max_iter) {
    Eigen::Index best = -1;
    double wmax = tol;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!in_p[j] && w(j) > wmax) wmax = w(j), best = j;
    if (best < 0) {
      res.converged = true;
      break;
    }
    in_p[best] = 1;
    fac.append(static_cast<int>(best));

    while (true) {
      ++res.iterations;
      const auto& passive = fac.indices();
      const Eigen::VectorXd z = fac.solve();
      double alpha = 2.0;
      for (std::size_t i = 0; i < passive.size(); ++i) {
        if (z(i) <= 0.0) {
          const double xi = res.x(passive[i]);
          const double d = xi - z(i);
          alpha = std::min(alpha, d > 0.0 ? xi / d : 0.0);
        }
      }
      if (alpha > 1.0) {
        for (std::size_t i = 0; i < passive.size(); ++i) res.x(passive[i]) = z(i);
        break;
      }
      for (std::size_t i = 0; i < passive.size(); ++i) res.x(passive[i]) += alpha * (z(i) - res.x(passive[i]));
      const double floor = 1e-15 * std::max(1.0, res.x.cwiseAbs().maxCoeff());
      std::vector<int> kept;
      for (int j : passive) {
        if (res.x(j) <= floor) {
          res.x(j) = 0.0;
          in_p[j] = 0;
        } else {
          kept.push_back(j);
        }
      }
      fac.reset(kept);
      if (kept.empty() || res.iterations >= max_iter) break;
    }
    w = g - G * res.x;
  }

  // Polish the final passive set with a QR solve on A itself.
  const auto& passive = fac.indices();
  if (res.converged && !passive.empty()) {
    Eigen::MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(passive.size()));
    for (std::size_t i = 0; i < passive.size(); ++i) Ap.col(static_cast<Eigen::Index>(i)) = A.col(passive[i]);
    const Eigen::VectorXd z = Ap.colPivHouseholderQr().solve(b);
    if (z.minCoeff() > 0.0)
      for (std::size_t i = 0; i < passive.size(); ++i) res.x(passive[i]) = z(static_cast<Eigen::Index>(i));
  }
  res.residual_norm = (A * res.x - b).norm();
  return res;
}

double kkt_violation(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& x) {
  const Eigen::VectorXd w = A.transpose() * (b - A * x);
  double v = std::max(0.0, -x.minCoeff());
  for (Eigen::Index j = 0; j < x.size(); ++j) v = std::max(v, x(j) > 0.0 ? std::abs(w(j)) : w(j));
  return v;
}

}  // namespace ifr
