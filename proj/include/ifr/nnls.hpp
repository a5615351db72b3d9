#pragma once

#include <Eigen/Dense>

namespace ifr {

struct NnlsResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual_norm = 0.0;  // ||A x - b||
  bool converged = false;
};

/// Lawson-Hanson active-set solver for min ||A x - b|| subject to x >= 0.
/// Passive-set subproblems are solved on the Gram matrix; the final passive
/// set is re-solved by QR on A for accuracy. max_iter <= 0 means 3 * cols.
NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iter = 0);

/// Largest violation of the KKT conditions at x: negative entries, positive
/// gradient components on the active set, and nonzero gradient on the
/// passive set (gradient of 0.5 ||A x - b||^2, sign flipped).
double kkt_violation(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& x);

}  // namespace ifr
