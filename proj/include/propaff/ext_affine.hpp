#ifndef PROPAFF_EXT_AFFINE_HPP
#define PROPAFF_EXT_AFFINE_HPP

#include <Eigen/Dense>
#include <optional>

#include "propaff/lie_model.hpp"

namespace propaff {

// Element of G |x g acting on ghat = g + R0. lin is the Ad-image of the
// linear part in adapted coordinates, trans the translation vector; the
// optional defining-representation witness has Ad(defining) = lin and is
// propagated through all group operations.
struct ExtAffineMap {
  MatrixXd lin;
  VectorXd trans;
  std::optional<MatrixXd> defining;

  MatrixXd ghat_matrix() const;

  static ExtAffineMap identity(const LieModel& model);
  static ExtAffineMap translation(const LieModel& model, const VectorXd& v);
  // Builds Ad(h) (with membership check) composed with the translation by v.
  static ExtAffineMap from_defining(const LieModel& model, const MatrixXd& h,
                                    const VectorXd& v);
};

ExtAffineMap compose(const ExtAffineMap& a, const ExtAffineMap& b);
ExtAffineMap inverse(const ExtAffineMap& a);
ExtAffineMap linear_part(const ExtAffineMap& a);
ExtAffineMap power(const ExtAffineMap& a, int n);

// Killing-form preservation of the linear part (membership in Ad G).
double group_membership_residual(const LieModel& model, const ExtAffineMap& g);

// Orthonormal bases of the three dynamical subspaces of ghat, split by
// eigenvalue modulus (> 1 + tol_gap | within [1 - tol_gap, 1 + tol_gap] |
// < 1 - tol_gap).
struct DynamicalSplitting {
  MatrixXd Vgt, Aeq, Vlt;
  double tol_gap = 0.0;
};

constexpr double kDefaultTolGap = 1e-6;

DynamicalSplitting dynamical_splitting(const LieModel& model, const ExtAffineMap& g,
                                       double tol_gap = kDefaultTolGap);

bool is_R_regular(const LieModel& model, const ExtAffineMap& g,
                  double tol_gap = kDefaultTolGap);
bool is_R_regular(const LieModel& model, const DynamicalSplitting& split);

// Orthonormal bases of the stable extended affine spaces.
MatrixXd mpa_ge(const DynamicalSplitting& split);  // span(Vgt + Aeq)
MatrixXd mpa_le(const DynamicalSplitting& split);  // span(Vlt + Aeq)

// s(g) = ||g|V<|| * ||g^-1|A>=||, computed in orthonormal bases of the
// subspaces with images measured in the ambient gram norm.
double contraction_strength(const LieModel& model, const ExtAffineMap& g,
                            const DynamicalSplitting& split);
double contraction_strength(const LieModel& model, const ExtAffineMap& g,
                            double tol_gap = kDefaultTolGap);

struct Canonizer {
  ExtAffineMap phi;
  double C_bound = 0.0;  // max(||phi||, ||phi^-1||), achieved (upper) bound
};

// Canonizing map for an R-regular g: phi(A>=, A<=) = (p^+hat, p^-hat), and
// consequently phi maps (V>, A=, V<) onto (n+, l^, n-). C_bound is the
// achieved value after a coordinate-descent polish over L |x l.
Canonizer canonize(const LieModel& model, const ExtAffineMap& g,
                   double tol_gap = kDefaultTolGap);

// Canonizing map for a transverse pair of affine minimal parabolic algebras
// given as ghat column bases of dimension dim(p^hat).
Canonizer pair_canonize(const LieModel& model, const MatrixXd& a1, const MatrixXd& a2);

struct MargulisInvariant {
  VectorXd z;  // coordinates in the z block of the model
  double norm() const { return z.norm(); }
};

// M(g) = pi_z(phi(g(x) - x)) for x in A= intersect g_Aff and phi a linear
// canonizer of (V>=, V<=); recomputed internally with an independent
// (x, phi) pair and cross-checked.
MargulisInvariant margulis_invariant(const LieModel& model, const ExtAffineMap& g,
                                     double tol_gap = kDefaultTolGap);

// Single-witness evaluation used by the cross-check and by property tests:
// x_shift selects a point x* + V= * x_shift of A= intersect g_Aff, and
// l_element (a Lie-algebra element of l in coordinates) twists the canonizer
// by Ad(exp(l_element)) on the left.
MargulisInvariant margulis_invariant_witness(const LieModel& model, const ExtAffineMap& g,
                                             const DynamicalSplitting& split,
                                             const Canonizer& canon,
                                             const VectorXd& x_shift,
                                             const VectorXd& l_element);

// Variant taking the action as a function, so long products can be applied
// factor by factor instead of as one assembled matrix.
using GhatAction = std::function<VectorXd(const VectorXd&)>;
MargulisInvariant margulis_invariant_witness(const LieModel& model, const GhatAction& apply,
                                             const DynamicalSplitting& split,
                                             const Canonizer& canon,
                                             const VectorXd& x_shift,
                                             const VectorXd& l_element);

// Double-witness invariant from precomputed splitting and canonizer.
MargulisInvariant margulis_invariant_checked(const LieModel& model, const GhatAction& apply,
                                             const DynamicalSplitting& split,
                                             const Canonizer& canon);

// Nilradical of the linear part of an affine m.p.a. (given as a ghat column
// basis), returned as a ghat basis of dimension dim(n-).
MatrixXd mpa_nilradical(const LieModel& model, const MatrixXd& affine_mpa);

// Restriction of a ghat matrix to l^ in the [z | d | R0] coordinate order;
// *leakage reports how far the map moves l^ off itself.
MatrixXd restrict_to_lhat(const LieModel& model, const MatrixXd& ghat_matrix,
                          double* leakage = nullptr);

// Min-norm point of span(basis) intersect g_Aff, as a ghat vector with last
// coordinate 1.
VectorXd min_norm_affine_point(const LieModel& model, const MatrixXd& basis);

}  // namespace propaff

#endif
