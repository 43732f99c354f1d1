#pragma once

#include <Eigen/Dense>

namespace hqmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Singular values below this fraction of the largest one are truncated.
inline constexpr double kPinvTolerance = 1e-8;

/// Moore-Penrose pseudo-inverse. Singular values below rel_tol * max(sigma_max, reference)
/// are truncated; `reference` lets a projected matrix be judged against the
/// scale of its unprojected original, so projection round-off is not inverted.
MatrixXd pinv(const MatrixXd& a, double rel_tol = kPinvTolerance, double reference = 0.0);

/// Numerical rank under the same truncation rule as pinv().
int rank(const MatrixXd& a, double rel_tol = kPinvTolerance, double reference = 0.0);

/// Smallest singular value kept by pinv(), or 0 when none is kept.
double smallestRetainedSingularValue(const MatrixXd& a, double rel_tol = kPinvTolerance, double reference = 0.0);

/// Largest singular value (0 for an empty matrix).
double largestSingularValue(const MatrixXd& a);

/// Projection of a symmetric matrix onto the PSD cone (negative eigenvalues clipped).
MatrixXd projectPsd(const MatrixXd& a);

double minEigenvalue(const MatrixXd& symmetric);

inline MatrixXd symmetrize(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

inline double infNorm(const MatrixXd& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

bool allFinite(const MatrixXd& a);

MatrixXd blockDiagonal(const MatrixXd& a, const MatrixXd& b);

}  // namespace hqmpc
