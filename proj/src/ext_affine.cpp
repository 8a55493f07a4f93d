#include "propaff/ext_affine.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>
#include <vector>

namespace propaff {

namespace {

double scale_of(const MatrixXd& a) { return std::max(1.0, a.norm()); }

// Ad(exp(sum t_j a_j)) acts diagonally in the adapted basis: multiplier
// exp(alpha(a)) on each root vector, 1 on l. The n- block mirrors the n+
// enumeration with negated roots.
VectorXd cartan_multipliers(const LieModel& model, const VectorXd& t) {
  VectorXd mult = VectorXd::Ones(model.dim_g);
  for (int i = 0; i < model.nplus.size; ++i) {
    const double alpha = model.roots.row(i).dot(t);
    mult(model.nplus.offset + i) = std::exp(alpha);
    mult(model.nminus.offset + i) = std::exp(-alpha);
  }
  return mult;
}

}  // namespace

MatrixXd ExtAffineMap::ghat_matrix() const {
  const auto n = lin.rows();
  MatrixXd m = MatrixXd::Zero(n + 1, n + 1);
  m.topLeftCorner(n, n) = lin;
  m.topRightCorner(n, 1) = trans;
  m(n, n) = 1.0;
  return m;
}

ExtAffineMap ExtAffineMap::identity(const LieModel& model) {
  return {MatrixXd::Identity(model.dim_g, model.dim_g), VectorXd::Zero(model.dim_g),
          MatrixXd::Identity(model.def_dim, model.def_dim)};
}

ExtAffineMap ExtAffineMap::translation(const LieModel& model, const VectorXd& v) {
  return {MatrixXd::Identity(model.dim_g, model.dim_g), v,
          MatrixXd::Identity(model.def_dim, model.def_dim)};
}

ExtAffineMap ExtAffineMap::from_defining(const LieModel& model, const MatrixXd& h,
                                         const VectorXd& v) {
  return {model.adjoint(h), v, h};
}

ExtAffineMap compose(const ExtAffineMap& a, const ExtAffineMap& b) {
  ExtAffineMap out;
  out.lin = a.lin * b.lin;
  out.trans = a.lin * b.trans + a.trans;
  if (a.defining && b.defining) out.defining = (*a.defining) * (*b.defining);
  return out;
}

ExtAffineMap inverse(const ExtAffineMap& a) {
  ExtAffineMap out;
  const auto lu = a.lin.partialPivLu();
  out.lin = lu.solve(MatrixXd::Identity(a.lin.rows(), a.lin.cols()));
  out.trans = -lu.solve(a.trans);
  if (a.defining)
    out.defining = a.defining->partialPivLu().solve(
        MatrixXd::Identity(a.defining->rows(), a.defining->cols()));
  return out;
}

ExtAffineMap linear_part(const ExtAffineMap& a) {
  ExtAffineMap out = a;
  out.trans = VectorXd::Zero(a.trans.size());
  return out;
}

ExtAffineMap power(const ExtAffineMap& a, int n) {
  if (n < 0) return power(inverse(a), -n);
  ExtAffineMap out{MatrixXd::Identity(a.lin.rows(), a.lin.cols()),
                   VectorXd::Zero(a.trans.size()),
                   a.defining ? std::optional<MatrixXd>(MatrixXd::Identity(
                                    a.defining->rows(), a.defining->cols()))
                              : std::nullopt};
  for (int i = 0; i < n; ++i) out = compose(out, a);
  return out;
}

double group_membership_residual(const LieModel& model, const ExtAffineMap& g) {
  const MatrixXd diff = g.lin.transpose() * model.killing * g.lin - model.killing;
  return diff.norm() / scale_of(model.killing);
}

DynamicalSplitting dynamical_splitting(const LieModel& model, const ExtAffineMap& g,
                                       double tol_gap) {
  const MatrixXd a = g.ghat_matrix();
  if (std::abs(g.lin.partialPivLu().determinant()) < 1e-12)
    throw DomainError("dynamical_splitting: map is not invertible");

  const auto eigs = eigenvalues_of(a);
  std::vector<double> gt, eq, lt;
  for (const auto& l : eigs) {
    const double m = std::abs(l);
    if (m > 1.0 + tol_gap)
      gt.push_back(m);
    else if (m < 1.0 - tol_gap)
      lt.push_back(m);
    else
      eq.push_back(m);
  }
  // Reject moduli sitting on a classification boundary: a perturbation of
  // the same order as tol_gap would flip their cluster.
  for (const auto& l : eigs) {
    const double m = std::abs(l);
    if (std::abs(m / (1.0 + tol_gap) - 1.0) < tol_gap / 4 ||
        std::abs(m / (1.0 - tol_gap) - 1.0) < tol_gap / 4)
      throw SplittingError("eigenvalue modulus sits on the |lambda|=1 cluster boundary");
  }
  // And cluster separations that are too tight relative to the gap.
  if (!gt.empty()) {
    const double lo = *std::min_element(gt.begin(), gt.end());
    const double hi = eq.empty() ? 0.0 : *std::max_element(eq.begin(), eq.end());
    if (hi > 0.0 && lo / hi < 1.0 + tol_gap / 4)
      throw SplittingError("eigenvalue modulus too close to the |lambda|=1 cluster");
  }
  if (!lt.empty()) {
    const double hi = *std::max_element(lt.begin(), lt.end());
    const double lo = eq.empty() ? 0.0 : *std::min_element(eq.begin(), eq.end());
    if (lo > 0.0 && lo / hi < 1.0 + tol_gap / 4)
      throw SplittingError("eigenvalue modulus too close to the |lambda|=1 cluster");
  }

  DynamicalSplitting split;
  split.tol_gap = tol_gap;
  split.Vgt = invariant_subspace(
      a, [tol_gap](std::complex<double> l) { return std::abs(l) > 1.0 + tol_gap; });
  split.Aeq = invariant_subspace(a, [tol_gap](std::complex<double> l) {
    const double m = std::abs(l);
    return m >= 1.0 - tol_gap && m <= 1.0 + tol_gap;
  });
  split.Vlt = invariant_subspace(
      a, [tol_gap](std::complex<double> l) { return std::abs(l) < 1.0 - tol_gap; });

  if (split.Vgt.cols() + split.Aeq.cols() + split.Vlt.cols() != model.dim_ghat)
    throw SplittingError("dynamical subspaces do not tile ghat");
  const double inv_tol = 1e-7 * scale_of(a);
  for (const MatrixXd* b : {&split.Vgt, &split.Aeq, &split.Vlt}) {
    if (b->cols() == 0) continue;
    const MatrixXd img = a * (*b);
    if ((img - (*b) * (b->transpose() * img)).norm() > inv_tol)
      throw SplittingError("dynamical subspace is not invariant");
  }
  // A= is the only block meeting R0; V> and V< stay inside g.
  const int r0 = model.r0_index();
  if (split.Aeq.row(r0).norm() <= 1e-9)
    throw SplittingError("neutral space does not meet the affine chart");
  if (split.Vgt.cols() > 0 && split.Vgt.row(r0).norm() > 1e-7)
    throw SplittingError("expanding space leaves g");
  if (split.Vlt.cols() > 0 && split.Vlt.row(r0).norm() > 1e-7)
    throw SplittingError("contracting space leaves g");
  return split;
}

bool is_R_regular(const LieModel& model, const DynamicalSplitting& split) {
  return split.Aeq.cols() == model.l.size + 1;
}

bool is_R_regular(const LieModel& model, const ExtAffineMap& g, double tol_gap) {
  return is_R_regular(model, dynamical_splitting(model, g, tol_gap));
}

MatrixXd mpa_ge(const DynamicalSplitting& split) {
  MatrixXd joined(split.Aeq.rows(), split.Vgt.cols() + split.Aeq.cols());
  joined << split.Vgt, split.Aeq;
  return orthonormal_columns(joined);
}

MatrixXd mpa_le(const DynamicalSplitting& split) {
  MatrixXd joined(split.Aeq.rows(), split.Vlt.cols() + split.Aeq.cols());
  joined << split.Vlt, split.Aeq;
  return orthonormal_columns(joined);
}

double contraction_strength(const LieModel& model, const ExtAffineMap& g,
                            const DynamicalSplitting& split) {
  if (!is_R_regular(model, split))
    throw DomainError("contraction_strength: map is not R-regular");
  const MatrixXd a = g.ghat_matrix();
  const MatrixXd ainv = inverse(g).ghat_matrix();
  const MatrixXd ge = mpa_ge(split);
  return operator_norm(a * split.Vlt) * operator_norm(ainv * ge);
}

double contraction_strength(const LieModel& model, const ExtAffineMap& g, double tol_gap) {
  return contraction_strength(model, g, dynamical_splitting(model, g, tol_gap));
}

VectorXd min_norm_affine_point(const LieModel& model, const MatrixXd& basis) {
  const VectorXd r = basis.row(model.r0_index()).transpose();
  const double rn2 = r.squaredNorm();
  if (rn2 <= 1e-18) throw DegeneratePairError("subspace is contained in g");
  VectorXd x = basis * (r / rn2);
  return x;
}

MatrixXd restrict_to_lhat(const LieModel& model, const MatrixXd& ghat_matrix,
                          double* leakage) {
  const int dl = model.l.size;
  std::vector<int> idx(dl + 1);
  for (int i = 0; i < dl; ++i) idx[i] = model.l.offset + i;
  idx[dl] = model.r0_index();
  MatrixXd sub(dl + 1, dl + 1);
  for (int i = 0; i <= dl; ++i)
    for (int j = 0; j <= dl; ++j) sub(i, j) = ghat_matrix(idx[i], idx[j]);
  if (leakage) {
    double out = 0.0;
    for (int i = 0; i < model.dim_ghat; ++i) {
      if (model.l.contains(i) || i == model.r0_index()) continue;
      for (int j = 0; j <= dl; ++j) out += ghat_matrix(i, idx[j]) * ghat_matrix(i, idx[j]);
    }
    *leakage = std::sqrt(out);
  }
  return sub;
}

// ---------------------------------------------------------------------------
// Canonizers
// ---------------------------------------------------------------------------

namespace {

// Recover h in SL(n) mapping the eigenbasis of w (real eigenvalues with
// distinct moduli) to the standard basis ordered by decreasing modulus.
MatrixXd sl_frame_from_eigen(const LieModel& model, const MatrixXd& w, double tol_gap) {
  const int n = model.def_dim;
  Eigen::EigenSolver<MatrixXd> es(w);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    return std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(j));
  });
  MatrixXd p(n, n);
  for (int k = 0; k < n; ++k) {
    const auto lambda = es.eigenvalues()(order[k]);
    if (std::abs(lambda.imag()) > 1e-8 * std::abs(lambda))
      throw DegeneratePairError("defining eigenvalues are not real");
    if (k + 1 < n) {
      const double ratio =
          std::abs(lambda) / std::abs(es.eigenvalues()(order[k + 1]));
      if (ratio < 1.0 + tol_gap / 4)
        throw DegeneratePairError("defining eigenvalue moduli are not distinct");
    }
    VectorXd v = es.eigenvectors().col(order[k]).real();
    p.col(k) = v / v.norm();
  }
  const double det = p.determinant();
  if (std::abs(det) < 1e-12) throw DegeneratePairError("degenerate eigenbasis");
  p /= std::pow(std::abs(det), 1.0 / n);
  if (p.determinant() < 0) p.col(0) *= -1.0;
  return p.partialPivLu().solve(MatrixXd::Identity(n, n));
}

// Build h in SO(n,1)+ sending the future-null direction u_plus to e_{n-1} +
// e_n and the past-null u_minus to e_{n-1} - e_n (0-based), aligning the
// spacelike complement orthonormally.
MatrixXd so_frame_from_null_pair(const LieModel& model, VectorXd u_plus, VectorXd u_minus) {
  const int nn = model.def_dim;  // n + 1
  MatrixXd j = MatrixXd::Identity(nn, nn);
  j(nn - 1, nn - 1) = -1.0;

  if (std::abs(u_plus(nn - 1)) < 1e-10 || std::abs(u_minus(nn - 1)) < 1e-10)
    throw DegeneratePairError("null direction has vanishing time component");
  u_plus *= (u_plus(nn - 1) > 0 ? 1.0 : -1.0);
  u_minus *= (u_minus(nn - 1) < 0 ? 1.0 : -1.0);
  const double s = u_plus.dot(j * u_minus);
  if (s < 1e-12) throw DegeneratePairError("null directions are not transverse");
  u_plus *= std::sqrt(2.0 / s);
  u_minus *= std::sqrt(2.0 / s);

  // Spacelike complement of the null plane, built by form-orthogonal
  // Gram-Schmidt over the standard basis so the standard pair yields the
  // identity frame.
  const double pairing = u_plus.dot(j * u_minus);
  auto project_out_plane = [&](const VectorXd& v) {
    return VectorXd(v - (v.dot(j * u_minus) / pairing) * u_plus -
                    (v.dot(j * u_plus) / pairing) * u_minus);
  };
  MatrixXd m(nn, nn - 2);
  int found = 0;
  for (int cand = 0; cand < nn && found < nn - 2; ++cand) {
    VectorXd v = project_out_plane(VectorXd::Unit(nn, cand));
    for (int t = 0; t < found; ++t) v -= (v.dot(j * m.col(t))) * m.col(t);
    const double q = v.dot(j * v);
    if (q <= 1e-10) continue;
    m.col(found++) = v / std::sqrt(q);
  }
  if (found != nn - 2) throw DegeneratePairError("complement is not spacelike");

  MatrixXd u(nn, nn);
  u.leftCols(nn - 2) = m;
  u.col(nn - 2) = 0.5 * (u_plus + u_minus);
  u.col(nn - 1) = 0.5 * (u_plus - u_minus);
  if (u.determinant() < 0) u.col(0) *= -1.0;
  return j * u.transpose() * j;  // U^{-1} for U in O(n,1)
}

MatrixXd so_frame_from_eigen(const LieModel& model, const MatrixXd& w, double tol_gap) {
  Eigen::EigenSolver<MatrixXd> es(w);
  const int nn = model.def_dim;
  int top = 0, bot = 0;
  for (int i = 1; i < nn; ++i) {
    if (std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(top))) top = i;
    if (std::abs(es.eigenvalues()(i)) < std::abs(es.eigenvalues()(bot))) bot = i;
  }
  for (int i : {top, bot})
    if (std::abs(es.eigenvalues()(i).imag()) > 1e-8 * std::abs(es.eigenvalues()(i)))
      throw DegeneratePairError("extreme eigenvalues are not real");
  if (std::abs(es.eigenvalues()(top)) < (1.0 + tol_gap / 4) * 1.0)
    throw DegeneratePairError("defining spectrum has no expansion");
  const VectorXd u_plus = es.eigenvectors().col(top).real();
  const VectorXd u_minus = es.eigenvectors().col(bot).real();
  return so_frame_from_null_pair(model, u_plus, u_minus);
}

// g-coordinate basis of the linear part of an extended affine subspace.
MatrixXd linear_part_basis(const LieModel& model, const MatrixXd& a) {
  const MatrixXd ker = null_space(a.row(model.r0_index()));
  const MatrixXd w = orthonormal_columns(a * ker);
  return w.topRows(model.dim_g);
}

// Nilradical of a minimal parabolic subalgebra, as the Killing-radical.
MatrixXd nilradical(const LieModel& model, const MatrixXd& p_basis) {
  const MatrixXd restricted = p_basis.transpose() * model.killing * p_basis;
  const MatrixXd ker = null_space(restricted, 1e-8);
  if (ker.cols() != model.nminus.size)
    throw DegeneratePairError("linear part is not a minimal parabolic algebra");
  return orthonormal_columns(p_basis * ker);
}

// Ascending flag fixed by a parabolic of sl(n), from power images of its
// nilradical: F_k = image(span(N)^{n-k}).
std::vector<MatrixXd> sl_flag(const LieModel& model, const MatrixXd& nil) {
  const int n = model.def_dim;
  std::vector<MatrixXd> gens;
  for (int c = 0; c < nil.cols(); ++c) gens.push_back(model.from_coords(nil.col(c)));

  std::vector<MatrixXd> flag(n + 1);
  flag[n] = MatrixXd::Identity(n, n);

  std::vector<MatrixXd> current = gens;
  for (int power = 1; power < n; ++power) {
    // image of the current span
    MatrixXd stacked(n, static_cast<Eigen::Index>(current.size()) * n);
    for (size_t t = 0; t < current.size(); ++t)
      stacked.middleCols(static_cast<Eigen::Index>(t) * n, n) = current[t];
    flag[n - power] = orthonormal_columns(stacked, 1e-8);
    if (flag[n - power].cols() != n - power)
      throw DegeneratePairError("nilradical power images do not form a flag");
    if (power + 1 < n) {
      // span of products gens * current, compressed
      std::vector<MatrixXd> next;
      for (const auto& gmat : gens)
        for (const auto& cmat : current) next.push_back(gmat * cmat);
      MatrixXd flat(n * n, static_cast<Eigen::Index>(next.size()));
      for (size_t t = 0; t < next.size(); ++t)
        flat.col(static_cast<Eigen::Index>(t)) =
            Eigen::Map<const VectorXd>(next[t].data(), n * n);
      const MatrixXd span = orthonormal_columns(flat, 1e-8);
      current.clear();
      for (int c = 0; c < span.cols(); ++c) {
        MatrixXd x(n, n);
        Eigen::Map<VectorXd>(x.data(), n * n) = span.col(c);
        current.push_back(x);
      }
    }
  }
  return flag;
}

// Isotropic line fixed by a parabolic of so(n,1): image of products of
// nilradical elements.
VectorXd so_isotropic_direction(const LieModel& model, const MatrixXd& nil) {
  const int nn = model.def_dim;
  std::vector<MatrixXd> gens;
  for (int c = 0; c < nil.cols(); ++c) gens.push_back(model.from_coords(nil.col(c)));
  MatrixXd stacked(nn, static_cast<Eigen::Index>(gens.size() * gens.size()) * nn);
  Eigen::Index at = 0;
  for (const auto& a : gens)
    for (const auto& b : gens) {
      stacked.middleCols(at, nn) = a * b;
      at += nn;
    }
  const MatrixXd img = orthonormal_columns(stacked, 1e-6);
  if (img.cols() != 1)
    throw DegeneratePairError("nilradical products do not single out a null line");
  VectorXd u = img.col(0);
  MatrixXd j = MatrixXd::Identity(nn, nn);
  j(nn - 1, nn - 1) = -1.0;
  if (std::abs(u.dot(j * u)) > 1e-6)
    throw DegeneratePairError("recovered direction is not null");
  return u;
}

// Defining-representation element mapping the pair of parabolic linear parts
// onto (p+, p-), recovered without a witness.
MatrixXd frame_from_pair(const LieModel& model, const MatrixXd& w1, const MatrixXd& w2) {
  const MatrixXd n1 = nilradical(model, w1);
  const MatrixXd n2 = nilradical(model, w2);
  if (model.family == Family::SL) {
    const int n = model.def_dim;
    const auto f1 = sl_flag(model, n1);
    const auto f2 = sl_flag(model, n2);
    MatrixXd p(n, n);
    for (int i = 1; i <= n; ++i) {
      const MatrixXd line = intersect_subspaces(f1[i], f2[n - i + 1], 1e-7);
      if (line.cols() != 1) throw DegeneratePairError("flags are not transverse");
      VectorXd v = line.col(0);
      int imax = 0;
      v.cwiseAbs().maxCoeff(&imax);
      if (v(imax) < 0) v *= -1.0;
      p.col(i - 1) = v;
    }
    const double det = p.determinant();
    if (std::abs(det) < 1e-12) throw DegeneratePairError("transverse flags are degenerate");
    p /= std::pow(std::abs(det), 1.0 / n);
    if (p.determinant() < 0) p.col(0) *= -1.0;
    return p.partialPivLu().solve(MatrixXd::Identity(n, n));
  }
  const VectorXd u1 = so_isotropic_direction(model, n1);
  const VectorXd u2 = so_isotropic_direction(model, n2);
  return so_frame_from_null_pair(model, u1, u2);
}

struct StandardTargets {
  MatrixXd pplus_hat, pminus_hat, lhat, nplus, nminus;
};

StandardTargets standard_targets(const LieModel& model) {
  StandardTargets t;
  t.pplus_hat = model.ghat_block(model.pplus, true);
  t.pminus_hat = model.ghat_block(model.pminus, true);
  t.lhat = model.ghat_block(model.l, true);
  t.nplus = model.ghat_block(model.nplus, false);
  t.nminus = model.ghat_block(model.nminus, false);
  return t;
}

double canonizer_objective(const ExtAffineMap& phi) {
  return std::max(operator_norm(phi.ghat_matrix()), operator_norm(inverse(phi).ghat_matrix()));
}

// Coordinate descent over L |x l: Cartan rescalings and z-translations, both
// stabilizing (p+hat, p-hat), to shrink max(||phi||, ||phi^-1||).
ExtAffineMap polish_canonizer(const LieModel& model, const ExtAffineMap& phi0) {
  const int na = model.cartan.size;
  const int nz = model.z.size;
  VectorXd ta = VectorXd::Zero(na);
  VectorXd tz = VectorXd::Zero(nz);

  auto candidate = [&](const VectorXd& a, const VectorXd& zt) {
    const VectorXd mult = cartan_multipliers(model, a);
    ExtAffineMap cand;
    cand.lin = mult.asDiagonal() * phi0.lin;
    cand.trans = mult.asDiagonal() * phi0.trans;
    for (int i = 0; i < nz; ++i) cand.trans(model.z.offset + i) += zt(i);
    return cand;
  };

  double best = canonizer_objective(candidate(ta, tz));
  double step = 0.25;
  for (int sweep = 0; sweep < 50 && step > 1e-3; ++sweep) {
    bool improved = false;
    for (int p = 0; p < na + nz; ++p) {
      for (const double delta : {step, -step}) {
        VectorXd a = ta, zt = tz;
        if (p < na)
          a(p) += delta;
        else
          zt(p - na) += delta;
        const double value = canonizer_objective(candidate(a, zt));
        if (value < best - 1e-12) {
          best = value;
          ta = a;
          tz = zt;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }

  // Rebuild the winning twist with its defining witness.
  VectorXd a_coords = VectorXd::Zero(model.dim_g);
  for (int j = 0; j < na; ++j) a_coords(model.cartan.offset + j) = ta(j);
  VectorXd w = VectorXd::Zero(model.dim_g);
  for (int i = 0; i < nz; ++i) w(model.z.offset + i) = tz(i);
  const MatrixXd h_u = model.from_coords(a_coords).exp();
  return compose(ExtAffineMap::from_defining(model, h_u, w), phi0);
}

void verify_canonizer(const LieModel& model, const ExtAffineMap& phi,
                      const DynamicalSplitting* split, const MatrixXd& a1,
                      const MatrixXd& a2) {
  const StandardTargets targets = standard_targets(model);
  const MatrixXd m = phi.ghat_matrix();
  const double tol = 1e-7;
  if (subspace_residual(m * a1, targets.pplus_hat) > tol ||
      subspace_residual(m * a2, targets.pminus_hat) > tol)
    throw DegeneratePairError("canonizing map does not send the pair to (p+hat, p-hat)");
  if (split) {
    if (split->Vgt.cols() > 0 && subspace_residual(m * split->Vgt, targets.nplus) > tol)
      throw InstabilityError("canonizer does not align the expanding space with n+");
    if (split->Vlt.cols() > 0 && subspace_residual(m * split->Vlt, targets.nminus) > tol)
      throw InstabilityError("canonizer does not align the contracting space with n-");
    if (subspace_residual(m * split->Aeq, targets.lhat) > tol)
      throw InstabilityError("canonizer does not align the neutral space with l^");
  }
}

Canonizer finish_canonizer(const LieModel& model, const ExtAffineMap& phi0,
                           const DynamicalSplitting* split, const MatrixXd& a1,
                           const MatrixXd& a2) {
  verify_canonizer(model, phi0, split, a1, a2);
  const ExtAffineMap phi = polish_canonizer(model, phi0);
  verify_canonizer(model, phi, split, a1, a2);
  return {phi, canonizer_objective(phi)};
}

}  // namespace

Canonizer canonize(const LieModel& model, const ExtAffineMap& g, double tol_gap) {
  const DynamicalSplitting split = dynamical_splitting(model, g, tol_gap);
  if (!is_R_regular(model, split)) throw DomainError("canonize: map is not R-regular");
  const MatrixXd age = mpa_ge(split);
  const MatrixXd ale = mpa_le(split);

  MatrixXd h;
  if (g.defining) {
    h = (model.family == Family::SL) ? sl_frame_from_eigen(model, *g.defining, tol_gap)
                                     : so_frame_from_eigen(model, *g.defining, tol_gap);
  } else {
    h = frame_from_pair(model, linear_part_basis(model, age), linear_part_basis(model, ale));
  }
  const VectorXd x = min_norm_affine_point(model, split.Aeq);
  const ExtAffineMap phi0 = compose(ExtAffineMap::from_defining(model, h, VectorXd::Zero(model.dim_g)),
                                    ExtAffineMap::translation(model, -x.head(model.dim_g)));
  return finish_canonizer(model, phi0, &split, age, ale);
}

Canonizer pair_canonize(const LieModel& model, const MatrixXd& a1_in, const MatrixXd& a2_in) {
  const int p = model.pplus.size + 1;
  if (a1_in.rows() != model.dim_ghat || a2_in.rows() != model.dim_ghat ||
      a1_in.cols() != p || a2_in.cols() != p)
    throw DomainError("pair_canonize: bases must have dim(p^hat) columns");
  const MatrixXd a1 = orthonormal_columns(a1_in);
  const MatrixXd a2 = orthonormal_columns(a2_in);
  if (a1.cols() != p || a2.cols() != p)
    throw DomainError("pair_canonize: rank-deficient input basis");

  const MatrixXd inter = intersect_subspaces(a1, a2, 1e-8);
  if (inter.cols() != model.l.size + 1)
    throw DegeneratePairError("pair is not transverse");

  const MatrixXd h =
      frame_from_pair(model, linear_part_basis(model, a1), linear_part_basis(model, a2));
  const VectorXd x = min_norm_affine_point(model, inter);
  const ExtAffineMap phi0 = compose(ExtAffineMap::from_defining(model, h, VectorXd::Zero(model.dim_g)),
                                    ExtAffineMap::translation(model, -x.head(model.dim_g)));
  return finish_canonizer(model, phi0, nullptr, a1, a2);
}

MatrixXd mpa_nilradical(const LieModel& model, const MatrixXd& affine_mpa) {
  const MatrixXd basis = orthonormal_columns(affine_mpa);
  const MatrixXd w = linear_part_basis(model, basis);
  const MatrixXd nil = nilradical(model, w);  // g-coordinates
  MatrixXd out = MatrixXd::Zero(model.dim_ghat, nil.cols());
  out.topRows(model.dim_g) = nil;
  return out;
}

// ---------------------------------------------------------------------------
// Margulis invariant
// ---------------------------------------------------------------------------

MargulisInvariant margulis_invariant_witness(const LieModel& model, const GhatAction& apply,
                                             const DynamicalSplitting& split,
                                             const Canonizer& canon, const VectorXd& x_shift,
                                             const VectorXd& l_element) {
  const int r0 = model.r0_index();
  VectorXd x = min_norm_affine_point(model, split.Aeq);
  if (x_shift.size() > 0) {
    // shift within the linear part of A=, staying in the affine chart
    const MatrixXd veq = orthonormal_columns(
        split.Aeq * null_space(split.Aeq.row(r0)));
    for (int i = 0; i < std::min<int>(veq.cols(), static_cast<int>(x_shift.size())); ++i)
      x += x_shift(i) * veq.col(i);
  }

  const VectorXd image = apply(x);
  const VectorXd disp_hat = image - x;
  if (std::abs(disp_hat(r0)) > 1e-9 * std::max(1.0, image.norm()))
    throw InstabilityError("displacement leaves the affine chart");
  const VectorXd disp = disp_hat.head(model.dim_g);

  MatrixXd philin = linear_part(canon.phi).lin;
  if (l_element.size() == model.dim_g && l_element.norm() > 0) {
    const MatrixXd twist = model.adjoint(model.from_coords(l_element).exp());
    philin = twist * philin;
  }

  const VectorXd w = philin * disp;
  double outside = 0.0;
  for (int i = 0; i < model.dim_g; ++i)
    if (!model.l.contains(i)) outside += w(i) * w(i);
  if (std::sqrt(outside) > 1e-6 * std::max(1.0, w.norm()))
    throw InstabilityError("canonized displacement is not in l");

  MargulisInvariant out;
  out.z = w.segment(model.z.offset, model.z.size);
  return out;
}

MargulisInvariant margulis_invariant_witness(const LieModel& model, const ExtAffineMap& g,
                                             const DynamicalSplitting& split,
                                             const Canonizer& canon, const VectorXd& x_shift,
                                             const VectorXd& l_element) {
  const MatrixXd m = g.ghat_matrix();
  return margulis_invariant_witness(
      model, [&m](const VectorXd& x) { return VectorXd(m * x); }, split, canon, x_shift,
      l_element);
}

MargulisInvariant margulis_invariant_checked(const LieModel& model, const GhatAction& apply,
                                             const DynamicalSplitting& split,
                                             const Canonizer& canon) {
  const VectorXd no_shift(0);
  const MargulisInvariant m1 =
      margulis_invariant_witness(model, apply, split, canon, no_shift, VectorXd::Zero(0));

  // Independent witness: a different point of A= and a canonizer twisted by a
  // fixed element of L.
  VectorXd shift = VectorXd::Constant(model.l.size, 0.5);
  VectorXd twist = VectorXd::Zero(model.dim_g);
  for (int j = 0; j < model.cartan.size; ++j)
    twist(model.cartan.offset + j) = 0.3 * model.weyl_interior(model.cartan.offset + j);
  if (model.m.size > 0) twist(model.m.offset) = 0.25;
  const MargulisInvariant m2 =
      margulis_invariant_witness(model, apply, split, canon, shift, twist);

  if ((m1.z - m2.z).norm() > 1e-7 * std::max(1.0, m1.z.norm()))
    throw InstabilityError("Margulis invariant witnesses disagree");
  return m1;
}

MargulisInvariant margulis_invariant(const LieModel& model, const ExtAffineMap& g,
                                     double tol_gap) {
  const DynamicalSplitting split = dynamical_splitting(model, g, tol_gap);
  if (!is_R_regular(model, split))
    throw DomainError("margulis_invariant: map is not R-regular");
  const Canonizer canon = canonize(model, g, tol_gap);
  const MatrixXd m = g.ghat_matrix();
  return margulis_invariant_checked(
      model, [&m](const VectorXd& x) { return VectorXd(m * x); }, split, canon);
}

}  // namespace propaff
