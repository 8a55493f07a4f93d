#ifndef PROPAFF_LINALG_HPP
#define PROPAFF_LINALG_HPP

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <vector>

namespace propaff {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Spectral (operator 2-)norm.
double operator_norm(const MatrixXd& a);

// Orthonormal basis of the column span; columns with singular value below
// tol * sigma_max are dropped.
MatrixXd orthonormal_columns(const MatrixXd& a, double tol = 1e-10);

// Orthonormal basis of the right null space of a.
MatrixXd null_space(const MatrixXd& a, double tol = 1e-10);

// Orthonormal basis of the orthogonal complement of span(b).
MatrixXd orthogonal_complement(const MatrixXd& b);

// Orthonormal basis of span(a) `intersect` span(b). a, b need not be
// orthonormal. tol is the relative singular-value threshold.
MatrixXd intersect_subspaces(const MatrixXd& a, const MatrixXd& b, double tol = 1e-8);

// Principal angles between equal-dimensional subspaces with orthonormal
// bases, sorted descending. hausdorff_angle is the largest one.
VectorXd principal_angles(const MatrixXd& a, const MatrixXd& b);
double hausdorff_angle(const MatrixXd& f1, const MatrixXd& f2);

// Angle between the lines spanned by x and y, in [0, pi/2].
double projective_angle(const VectorXd& x, const VectorXd& y);

// How far the columns of a stick out of span(b); b orthonormal.
double subspace_residual(const MatrixXd& a, const MatrixXd& b);

// Real orthonormal basis of the invariant subspace of a spanned by the
// eigenvalues selected by the predicate. The selection must be closed under
// complex conjugation. Implemented with a complex Schur form reordered by
// adjacent Givens swaps.
MatrixXd invariant_subspace(const MatrixXd& a,
                            const std::function<bool(std::complex<double>)>& select);

std::vector<std::complex<double>> eigenvalues_of(const MatrixXd& a);

// Least-squares fit y = slope * x + intercept; returns {slope, intercept, r2}.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace propaff

#endif
