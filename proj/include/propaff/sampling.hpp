#ifndef PROPAFF_SAMPLING_HPP
#define PROPAFF_SAMPLING_HPP

#include <unsupported/Eigen/MatrixFunctions>

#include "propaff/ext_affine.hpp"
#include "propaff/rng.hpp"

namespace propaff {

// Interior Weyl-chamber sample with root values bounded away from zero, as
// coordinates supported on the Cartan block.
inline VectorXd random_weyl_interior(const LieModel& model, Rng& rng) {
  if (model.family == Family::SL) {
    const int n = model.n;
    Eigen::VectorXd diag(n);
    diag(0) = 0.0;
    for (int i = 1; i < n; ++i) diag(i) = diag(i - 1) - rng.uniform(0.35, 0.9);
    diag.array() -= diag.mean();
    MatrixXd mat = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) mat(i, i) = diag(i);
    return model.to_coords(mat);
  }
  VectorXd x = VectorXd::Zero(model.dim_g);
  x(model.cartan.offset) = rng.uniform(0.7, 1.6);
  return x;
}

// exp of a random Lie-algebra element, coordinates ~ N(0, scale^2).
inline ExtAffineMap random_group_element(const LieModel& model, Rng& rng, double scale) {
  VectorXd coords(model.dim_g);
  for (int i = 0; i < model.dim_g; ++i) coords(i) = scale * rng.normal();
  const MatrixXd h = model.from_coords(coords).exp();
  return ExtAffineMap::from_defining(model, h, VectorXd::Zero(model.dim_g));
}

// Random R-regular linear element: a conjugate of exp(a), a interior in a+.
inline ExtAffineMap random_regular_linear(const LieModel& model, Rng& rng,
                                          double conj_scale = 0.5) {
  const VectorXd a = random_weyl_interior(model, rng);
  const MatrixXd expa = model.from_coords(a).exp();
  const ExtAffineMap r = random_group_element(model, rng, conj_scale);
  const MatrixXd h = (*r.defining) * expa * r.defining->partialPivLu().solve(
                                               MatrixXd::Identity(model.def_dim, model.def_dim));
  return ExtAffineMap::from_defining(model, h, VectorXd::Zero(model.dim_g));
}

inline ExtAffineMap random_regular_affine(const LieModel& model, Rng& rng,
                                          double conj_scale = 0.5, double trans_scale = 1.0) {
  ExtAffineMap g = random_regular_linear(model, rng, conj_scale);
  for (int i = 0; i < model.dim_g; ++i) g.trans(i) = trans_scale * rng.normal();
  return g;
}

// Maps that are deliberately not R-regular: identity, pure translations,
// exponentials of wall elements of a+, elliptic rotations, and mixes.
inline ExtAffineMap random_nonregular(const LieModel& model, Rng& rng) {
  const int kind = static_cast<int>(rng.uniform_int(0, 3));
  switch (kind) {
    case 0:
      return ExtAffineMap::identity(model);
    case 1: {
      VectorXd v(model.dim_g);
      for (int i = 0; i < model.dim_g; ++i) v(i) = rng.normal();
      return ExtAffineMap::translation(model, v);
    }
    case 2: {
      // wall element: one simple root value forced to zero
      VectorXd a = random_weyl_interior(model, rng);
      if (model.family == Family::SL) {
        MatrixXd mat = model.from_coords(a);
        mat(1, 1) = mat(0, 0);  // kill the first simple root
        mat.diagonal().array() -= mat.diagonal().mean();
        a = model.to_coords(mat);
      } else {
        a.setZero();  // rank one: the only wall is 0
      }
      const ExtAffineMap r = random_group_element(model, rng, 0.4);
      const MatrixXd h = (*r.defining) * model.from_coords(a).exp() *
                         r.defining->partialPivLu().solve(
                             MatrixXd::Identity(model.def_dim, model.def_dim));
      ExtAffineMap g = ExtAffineMap::from_defining(model, h, VectorXd::Zero(model.dim_g));
      for (int i = 0; i < model.dim_g; ++i) g.trans(i) = 0.5 * rng.normal();
      return g;
    }
    default: {
      // elliptic: exp of a compact-direction element (antisymmetric part)
      VectorXd coords(model.dim_g);
      for (int i = 0; i < model.dim_g; ++i) coords(i) = 0.6 * rng.normal();
      MatrixXd x = model.from_coords(coords);
      MatrixXd k = 0.5 * (x - x.transpose());
      if (model.family == Family::SOn1) {
        // keep only the so(n) block (Cartan-fixed part)
        k.row(model.def_dim - 1).setZero();
        k.col(model.def_dim - 1).setZero();
      }
      const MatrixXd h = k.exp();
      return ExtAffineMap::from_defining(model, h, VectorXd::Zero(model.dim_g));
    }
  }
}

}  // namespace propaff

#endif
