#include "propaff/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Jacobi>
#include <algorithm>
#include <cmath>

#include "propaff/errors.hpp"

namespace propaff {

namespace {
constexpr double kPi = 3.14159265358979323846;

double clamp01(double v) { return std::min(1.0, std::max(-1.0, v)); }
}  // namespace

double operator_norm(const MatrixXd& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  if (a.rows() <= 16 && a.cols() <= 16) {
    Eigen::JacobiSVD<MatrixXd> svd(a);
    return svd.singularValues()(0);
  }
  Eigen::BDCSVD<MatrixXd> svd(a);
  return svd.singularValues()(0);
}

MatrixXd orthonormal_columns(const MatrixXd& a, double tol) {
  if (a.cols() == 0) return MatrixXd(a.rows(), 0);
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return MatrixXd(a.rows(), 0);
  int rank = 0;
  while (rank < sv.size() && sv(rank) > tol * sv(0)) ++rank;
  return svd.matrixU().leftCols(rank);
}

MatrixXd null_space(const MatrixXd& a, double tol) {
  if (a.rows() == 0) return MatrixXd::Identity(a.cols(), a.cols());
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cutoff = (sv.size() > 0 ? sv(0) : 0.0) * tol;
  int rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  return svd.matrixV().rightCols(a.cols() - rank);
}

MatrixXd orthogonal_complement(const MatrixXd& b) {
  const auto n = b.rows();
  if (b.cols() == 0) return MatrixXd::Identity(n, n);
  return null_space(b.transpose());
}

MatrixXd intersect_subspaces(const MatrixXd& a, const MatrixXd& b, double tol) {
  const MatrixXd qa = orthonormal_columns(a);
  const MatrixXd qb = orthonormal_columns(b);
  if (qa.cols() == 0 || qb.cols() == 0) return MatrixXd(a.rows(), 0);
  MatrixXd stacked(a.rows(), qa.cols() + qb.cols());
  stacked << qa, -qb;
  const MatrixXd ker = null_space(stacked, tol);
  if (ker.cols() == 0) return MatrixXd(a.rows(), 0);
  return orthonormal_columns(qa * ker.topRows(qa.cols()));
}

VectorXd principal_angles(const MatrixXd& a, const MatrixXd& b) {
  if (a.cols() != b.cols()) throw DomainError("principal_angles: dimension mismatch");
  if (a.cols() == 0) return VectorXd(0);
  Eigen::JacobiSVD<MatrixXd> svd(a.transpose() * b);
  VectorXd angles(a.cols());
  for (int i = 0; i < a.cols(); ++i) angles(i) = std::acos(clamp01(svd.singularValues()(i)));
  std::sort(angles.data(), angles.data() + angles.size(), std::greater<double>());
  return angles;
}

double hausdorff_angle(const MatrixXd& f1, const MatrixXd& f2) {
  if (f1.cols() < 1) throw DomainError("hausdorff_angle: empty subspace");
  return principal_angles(f1, f2)(0);
}

double projective_angle(const VectorXd& x, const VectorXd& y) {
  const double nx = x.norm(), ny = y.norm();
  if (nx <= 0.0 || ny <= 0.0) throw DomainError("projective_angle: zero vector");
  return std::acos(clamp01(std::abs(x.dot(y)) / (nx * ny)));
}

double subspace_residual(const MatrixXd& a, const MatrixXd& b) {
  if (a.cols() == 0) return 0.0;
  const MatrixXd qa = orthonormal_columns(a);
  return (qa - b * (b.transpose() * qa)).norm();
}

namespace {

using MatrixXcd = Eigen::MatrixXcd;
using Complexd = std::complex<double>;

// Swap the diagonal entries at positions k-1, k of the upper-triangular T by
// a unitary similarity (ztrexc with a single Givens rotation), updating U.
void swap_adjacent(MatrixXcd& t, MatrixXcd& u, int k) {
  const Complexd t11 = t(k - 1, k - 1);
  const Complexd t12 = t(k - 1, k);
  const Complexd t22 = t(k, k);
  // (t12, t22 - t11) spans the eigenvector of the 2x2 block for t22.
  Eigen::JacobiRotation<Complexd> rot;
  rot.makeGivens(t12, t22 - t11);
  t.applyOnTheLeft(k - 1, k, rot.adjoint());
  t.applyOnTheRight(k - 1, k, rot);
  u.applyOnTheRight(k - 1, k, rot);
  t(k, k - 1) = Complexd(0, 0);
}

}  // namespace

MatrixXd invariant_subspace(const MatrixXd& a,
                            const std::function<bool(std::complex<double>)>& select) {
  const int n = static_cast<int>(a.rows());
  MatrixXcd ac = a.cast<Complexd>();
  Eigen::ComplexSchur<MatrixXcd> schur(ac);
  if (schur.info() != Eigen::Success) throw SplittingError("complex Schur failed to converge");
  MatrixXcd t = schur.matrixT();
  MatrixXcd u = schur.matrixU();

  std::vector<bool> sel(n);
  int count = 0;
  for (int i = 0; i < n; ++i) {
    sel[i] = select(t(i, i));
    if (sel[i]) ++count;
  }
  if (count == 0) return MatrixXd(n, 0);

  // Bubble every selected eigenvalue up to the leading block.
  int target = 0;
  for (int j = 0; j < n; ++j) {
    if (!sel[j]) continue;
    for (int k = j; k > target; --k) {
      swap_adjacent(t, u, k);
      std::swap(sel[k - 1], sel[k]);
    }
    ++target;
  }

  // The selection is conjugation-closed, so the complex invariant subspace is
  // the complexification of a real one; recover it from real and imaginary
  // parts.
  const MatrixXcd lead = u.leftCols(count);
  MatrixXd stacked(n, 2 * count);
  stacked << lead.real(), lead.imag();
  MatrixXd basis = orthonormal_columns(stacked, 1e-9);
  if (basis.cols() != count)
    throw SplittingError("invariant subspace is not conjugation-stable: real rank " +
                         std::to_string(basis.cols()) + " vs " + std::to_string(count));
  return basis;
}

std::vector<std::complex<double>> eigenvalues_of(const MatrixXd& a) {
  Eigen::EigenSolver<MatrixXd> es(a, false);
  std::vector<std::complex<double>> out(a.rows());
  for (int i = 0; i < a.rows(); ++i) out[i] = es.eigenvalues()(i);
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  if (x.size() != y.size() || x.size() < 2) throw DomainError("fit_line: need >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  LineFit fit;
  const double denom = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0;
  const double mean_y = sy / n;
  double ss_tot = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double pred = fit.slope * x[i] + fit.intercept;
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
  }
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

}  // namespace propaff
