#include "hqmpc/linalg.hpp"

#include <algorithm>

namespace hqmpc {

namespace {

Eigen::BDCSVD<MatrixXd> svdOf(const MatrixXd& a) {
  return Eigen::BDCSVD<MatrixXd>(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

}  // namespace

MatrixXd pinv(const MatrixXd& a, double rel_tol, double reference) {
  if (a.size() == 0) return MatrixXd::Zero(a.cols(), a.rows());
  const auto svd = svdOf(a);
  const VectorXd& s = svd.singularValues();
  const double cutoff = rel_tol * std::max(s.size() > 0 ? s(0) : 0.0, reference);
  VectorXd s_inv = VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) s_inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

int rank(const MatrixXd& a, double rel_tol, double reference) {
  if (a.size() == 0) return 0;
  const VectorXd s = svdOf(a).singularValues();
  const double cutoff = rel_tol * std::max(s(0), reference);
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) ++r;
  }
  return r;
}

double smallestRetainedSingularValue(const MatrixXd& a, double rel_tol, double reference) {
  if (a.size() == 0) return 0.0;
  const VectorXd s = svdOf(a).singularValues();
  const double cutoff = rel_tol * std::max(s(0), reference);
  double smallest = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) smallest = s(i);
  }
  return smallest;
}

double largestSingularValue(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  return svdOf(a).singularValues()(0);
}

MatrixXd projectPsd(const MatrixXd& a) {
  if (a.size() == 0) return a;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(a));
  const VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
  return symmetrize(es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose());
}

double minEigenvalue(const MatrixXd& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(symmetric), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

bool allFinite(const MatrixXd& a) { return a.allFinite(); }

MatrixXd blockDiagonal(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out = MatrixXd::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

}  // namespace hqmpc
