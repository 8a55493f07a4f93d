#ifndef PROPAFF_LIE_MODEL_HPP
#define PROPAFF_LIE_MODEL_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "propaff/errors.hpp"
#include "propaff/linalg.hpp"

namespace propaff {

enum class Family { SL, SOn1 };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// A contiguous block of adapted-basis indices.
struct IndexRange {
  int offset = 0;
  int size = 0;
  bool contains(int i) const { return i >= offset && i < offset + size; }
  int end() const { return offset + size; }
};

// Concrete matrix realization of the semisimple scaffolding for sl(n,R) or
// so(n,1): an adapted basis of g grouped as [n+ | a | z(m) | d | n-], the
// formal origin direction appended last, the longest-Weyl flip w0, and the
// inner product declared to make the adapted basis orthonormal (so all gram
// computations are plain Euclidean ones in adapted coordinates). On the d
// block the scaling is fixed by -Killing; everywhere else basis matrices are
// Frobenius-normalized.
class LieModel {
 public:
  static LieModel build(Family family, int n);

  Family family;
  int n = 0;          // matrix size parameter of the defining representation
  int def_dim = 0;    // defining-representation matrix size
  int dim_g = 0;
  int dim_ghat = 0;

  std::vector<MatrixXd> basis;  // defining-rep matrices, adapted scaling

  IndexRange nplus, cartan, zm, derived, nminus;  // primitive blocks, in order
  IndexRange z, m, l, pplus, pminus;              // unions (all contiguous)

  MatrixXd w0;       // defining rep, in G
  MatrixXd ad_w0;    // dim_g x dim_g
  MatrixXd killing;  // Killing form on g in adapted coordinates

  // Root functionals: row per n+ basis vector, column per cartan basis
  // vector, [a_j, y_i] = roots(i, j) * y_i.
  MatrixXd roots;

  VectorXd weyl_interior;  // coordinates of the fixed interior sample of a+

  int r0_index() const { return dim_g; }

  // Coordinates <-> defining-representation matrices.
  MatrixXd from_coords(const VectorXd& x) const;
  VectorXd to_coords(const MatrixXd& mat, double* residual = nullptr) const;

  VectorXd bracket(const VectorXd& x, const VectorXd& y) const;

  // Matrix of X -> h X h^-1 in the adapted basis; h must be in G.
  MatrixXd adjoint(const MatrixXd& h) const;
  bool in_group(const MatrixXd& h, double tol = 1e-8) const;

  // Projection from l onto z parallel to d; rejects vectors outside l.
  VectorXd project_z(const VectorXd& x) const;

  // v = v' - Ad(w0) v' for the fixed interior sample v' of a+; satisfies
  // -Ad(w0) v = v and v != 0.
  VectorXd neutral_vector() const;

  // Quasi-translation test for a matrix acting on l^ = l + R0, given in the
  // adapted [z | d | R0] coordinate order: translation on the z part,
  // orthogonal-affine on the d part, last row (0,...,0,1).
  bool is_quasi_translation(const MatrixXd& lhat_matrix, double tol = 1e-8) const;
  double quasi_translation_residual(const MatrixXd& lhat_matrix) const;

  // Orthonormal ghat bases of the standard subspaces (coordinate columns).
  MatrixXd ghat_block(const IndexRange& range, bool with_r0) const;

  MatrixXd ad_matrix(const VectorXd& x) const;  // ad(x) on g in coordinates

  // An empty model; only build() produces a usable one.
  LieModel() = default;

 private:
  void finalize();  // derived data + invariant verification

  Eigen::CompleteOrthogonalDecomposition<MatrixXd> coord_solver_;
  MatrixXd basis_flat_;  // def_dim^2 x dim_g
};

}  // namespace propaff

#endif
