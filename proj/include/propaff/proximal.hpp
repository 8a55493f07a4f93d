#ifndef PROPAFF_PROXIMAL_HPP
#define PROPAFF_PROXIMAL_HPP

#include <optional>
#include <vector>

#include "propaff/ext_affine.hpp"
#include "propaff/rng.hpp"

namespace propaff {

// Lexicographic p-element subsets of {0, ..., d-1}.
std::vector<std::vector<int>> lex_subsets(int d, int p);

// p-th exterior power (compound matrix) in the lexicographic-subset basis of
// Lambda^p of the adapted orthonormal basis. Entries are p x p minors, so the
// input need not be diagonalizable. The default entry loop is OpenMP
// parallel; the serial variant is the reference used in tests and benches.
MatrixXd exterior_power(const MatrixXd& a, int p);
MatrixXd exterior_power_serial(const MatrixXd& a, int p);

// Decomposable vector of a d x p basis: all p x p row minors.
VectorXd wedge_columns(const MatrixXd& basis);

struct ProximalData {
  double lambda = 0.0;  // top eigenvalue, real and signed
  VectorXd Es;          // unit attracting direction
  MatrixXd Eu;          // orthonormal basis of the repelling hyperplane
  double stilde = 0.0;  // ||gamma|Eu|| / |lambda|
};

// Empty when the top-modulus eigenvalue is complex, repeated, or within tol
// of the second modulus.
std::optional<ProximalData> proximal_data(const MatrixXd& gamma, double tol = 1e-6);

struct BridgeReport {
  bool regular = false;
  bool proximal = false;
  double es_angle = 0.0;  // angle(E^s, wedge of A>= basis); valid when regular
  double s = 0.0;         // s(g); valid when regular
  double stilde = 0.0;    // stilde(Lambda^p g); valid when proximal
};

// R-regularity of g versus proximality of Lambda^p(g) on ghat, with the
// attracting-line alignment and the two contraction strengths.
BridgeReport regular_proximal_bridge(const LieModel& model, const ExtAffineMap& g,
                                     double tol_gap = kDefaultTolGap);

// alpha1 = max principal angle, alpha2 = projective angle of the wedges;
// checks alpha1 <= alpha2 <= sqrt(p) * alpha1 and throws PropertyViolation on
// failure.
std::pair<double, double> angle_compression_check(const MatrixXd& f1, const MatrixXd& f2);

struct LipschitzRegion {
  enum Kind { AroundAttracting, AwayFromRepelling } kind = AroundAttracting;
  double zeta = 0.5;
};

struct LipschitzReport {
  double empirical = 0.0;  // sampled sup of angle ratios
  double stilde = 0.0;
  double ratio = 0.0;  // empirical / stilde
  int pairs = 0;
};

LipschitzReport lipschitz_sample(const MatrixXd& gamma, const LipschitzRegion& region,
                                 int n_samples, std::uint64_t seed);

}  // namespace propaff

#endif
