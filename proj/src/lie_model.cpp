#include "propaff/lie_model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace propaff {

namespace {

constexpr double kStructTol = 1e-10;

MatrixXd flatten_basis(const std::vector<MatrixXd>& basis) {
  const auto nn = basis.empty() ? 0 : basis[0].size();
  MatrixXd flat(nn, static_cast<Eigen::Index>(basis.size()));
  for (size_t i = 0; i < basis.size(); ++i)
    flat.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const VectorXd>(basis[i].data(), nn);
  return flat;
}

// Minkowski form diag(1,...,1,-1) for so(n,1).
MatrixXd minkowski(int n) {
  MatrixXd j = MatrixXd::Identity(n + 1, n + 1);
  j(n, n) = -1.0;
  return j;
}

}  // namespace

std::string family_name(Family f) { return f == Family::SL ? "sl" : "so_n1"; }

Family family_from_name(const std::string& name) {
  if (name == "sl") return Family::SL;
  if (name == "so_n1" || name == "so") return Family::SOn1;
  throw ConstructionError("unknown family: " + name);
}

LieModel LieModel::build(Family family, int n) {
  if (n < 2) throw ConstructionError("model requires n >= 2");
  LieModel model;
  model.family = family;
  model.n = n;

  if (family == Family::SL) {
    model.def_dim = n;
    const int q = n * (n - 1) / 2;
    const int dim_a = n - 1;
    model.dim_g = n * n - 1;

    model.nplus = {0, q};
    model.cartan = {q, dim_a};
    model.zm = {q + dim_a, 0};
    model.derived = {q + dim_a, 0};
    model.nminus = {q + dim_a, q};

    model.basis.reserve(model.dim_g);
    // n+: strict uppers E_ij, i < j, row-major. Frobenius norm already 1.
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        MatrixXd e = MatrixXd::Zero(n, n);
        e(i, j) = 1.0;
        model.basis.push_back(e);
      }
    // a: orthonormal basis of traceless diagonals,
    // h_k = diag(1,...,1,-k,0,...,0)/sqrt(k(k+1)).
    for (int k = 1; k < n; ++k) {
      MatrixXd h = MatrixXd::Zero(n, n);
      for (int i = 0; i < k; ++i) h(i, i) = 1.0;
      h(k, k) = -static_cast<double>(k);
      model.basis.push_back(h / std::sqrt(static_cast<double>(k) * (k + 1)));
    }
    // n-: strict lowers E_ij, i > j, mirroring the n+ order.
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        MatrixXd e = MatrixXd::Zero(n, n);
        e(j, i) = 1.0;
        model.basis.push_back(e);
      }

    // w0: antidiagonal signed permutation with det 1.
    model.w0 = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) model.w0(n - 1 - i, i) = 1.0;
    if (model.w0.determinant() < 0) model.w0.col(0) *= -1.0;

    // v' = diag(n-1, n-3, ..., -(n-1)), Frobenius-normalized.
    MatrixXd vp = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) vp(i, i) = static_cast<double>(n - 1 - 2 * i);
    vp /= vp.norm();
    model.finalize();
    model.weyl_interior = model.to_coords(vp);
    return model;
  }

  // so(n,1) in the signature (n,1) realization: X = (A, B; B^T, 0) with A
  // antisymmetric. a = R * (E_{n-1,n} + E_{n,n-1}) (0-based), m = so(n-1) in
  // the upper-left block.
  model.def_dim = n + 1;
  const int q = n - 1;
  const int dim_m = (n - 1) * (n - 2) / 2;
  model.dim_g = n * (n + 1) / 2;

  std::vector<MatrixXd> m_basis;
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n - 1; ++j) {
      MatrixXd e = MatrixXd::Zero(n + 1, n + 1);
      e(i, j) = 1.0;
      e(j, i) = -1.0;
      m_basis.push_back(e / std::sqrt(2.0));
    }

  // Split m into its center and derived part numerically (z(m) is all of m
  // when m is abelian, zero when m is semisimple).
  std::vector<MatrixXd> zm_basis, d_basis;
  if (dim_m > 0) {
    const int mm = dim_m;
    // ad of m on m in the m_basis coordinates (Frobenius-orthonormal).
    auto m_coords = [&](const MatrixXd& x) {
      VectorXd c(mm);
      for (int t = 0; t < mm; ++t) c(t) = (x.array() * m_basis[t].array()).sum();
      return c;
    };
    MatrixXd stacked(mm * mm, mm);
    std::vector<MatrixXd> brackets;
    for (int i = 0; i < mm; ++i) {
      for (int j = 0; j < mm; ++j) {
        const MatrixXd br = m_basis[i] * m_basis[j] - m_basis[j] * m_basis[i];
        stacked.block(j * mm, i, mm, 1) = m_coords(br);
        brackets.push_back(br);
      }
    }
    const MatrixXd center = null_space(stacked, 1e-9);
    MatrixXd derived_flat((n + 1) * (n + 1), static_cast<Eigen::Index>(brackets.size()));
    for (size_t t = 0; t < brackets.size(); ++t)
      derived_flat.col(static_cast<Eigen::Index>(t)) =
          Eigen::Map<const VectorXd>(brackets[t].data(), (n + 1) * (n + 1));
    const MatrixXd derived_basis = orthonormal_columns(derived_flat, 1e-9);
    if (center.cols() + derived_basis.cols() != mm)
      throw ConstructionError("m does not split into center + derived part");
    for (int t = 0; t < center.cols(); ++t) {
      MatrixXd x = MatrixXd::Zero(n + 1, n + 1);
      for (int s = 0; s < mm; ++s) x += center(s, t) * m_basis[s];
      zm_basis.push_back(x / x.norm());  // Frobenius-normalized
    }
    for (int t = 0; t < derived_basis.cols(); ++t) {
      MatrixXd x = MatrixXd::Zero(n + 1, n + 1);
      Eigen::Map<VectorXd>(x.data(), (n + 1) * (n + 1)) = derived_basis.col(t);
      d_basis.push_back(x);  // rescaled to -Killing = 1 in finalize()
    }
  }

  model.nplus = {0, q};
  model.cartan = {q, 1};
  model.zm = {q + 1, static_cast<int>(zm_basis.size())};
  model.derived = {model.zm.end(), static_cast<int>(d_basis.size())};
  model.nminus = {model.derived.end(), q};

  model.basis.reserve(model.dim_g);
  // n+(e_k): upper block row/col structure from the standard realization.
  for (int k = 0; k < n - 1; ++k) {
    MatrixXd e = MatrixXd::Zero(n + 1, n + 1);
    e(k, n - 1) = -1.0;
    e(k, n) = 1.0;
    e(n - 1, k) = 1.0;
    e(n, k) = 1.0;
    model.basis.push_back(e / 2.0);
  }
  {
    MatrixXd x = MatrixXd::Zero(n + 1, n + 1);
    x(n - 1, n) = 1.0;
    x(n, n - 1) = 1.0;
    model.basis.push_back(x / std::sqrt(2.0));
  }
  for (const auto& zmat : zm_basis) model.basis.push_back(zmat);
  for (const auto& dmat : d_basis) model.basis.push_back(dmat);
  for (int k = 0; k < n - 1; ++k) {
    MatrixXd e = MatrixXd::Zero(n + 1, n + 1);
    e(k, n - 1) = 1.0;
    e(k, n) = 1.0;
    e(n - 1, k) = -1.0;
    e(n, k) = 1.0;
    model.basis.push_back(e / 2.0);
  }

  // w0: rotation by pi in the (e_{n-2}, e_{n-1}) spatial plane (0-based);
  // reverses the a-axis and swaps n+ with n-.
  model.w0 = MatrixXd::Identity(n + 1, n + 1);
  model.w0(n - 2, n - 2) = -1.0;
  model.w0(n - 1, n - 1) = -1.0;

  model.finalize();
  // v' = the a-generator itself.
  VectorXd vp = VectorXd::Zero(model.dim_g);
  vp(model.cartan.offset) = 1.0;
  model.weyl_interior = vp;
  return model;
}

void LieModel::finalize() {
  dim_ghat = dim_g + 1;
  z = {cartan.offset, cartan.size + zm.size};
  m = {zm.offset, zm.size + derived.size};
  l = {cartan.offset, cartan.size + zm.size + derived.size};
  pplus = {0, nplus.size + l.size};
  pminus = {l.offset, l.size + nminus.size};

  if (static_cast<int>(basis.size()) != dim_g)
    throw ConstructionError("basis size mismatch");
  if (nminus.end() != dim_g) throw ConstructionError("index ranges do not tile g");

  basis_flat_ = flatten_basis(basis);
  coord_solver_.compute(basis_flat_);
  if (coord_solver_.rank() != dim_g)
    throw ConstructionError("adapted basis is linearly dependent");

  // Killing form from structure constants.
  std::vector<MatrixXd> ad(dim_g);
  for (int i = 0; i < dim_g; ++i) {
    VectorXd ei = VectorXd::Zero(dim_g);
    ei(i) = 1.0;
    ad[i] = ad_matrix(ei);
  }
  killing.resize(dim_g, dim_g);
  for (int i = 0; i < dim_g; ++i)
    for (int j = 0; j <= i; ++j) killing(i, j) = killing(j, i) = (ad[i] * ad[j]).trace();

  // Rescale the d block so the gram (identity in coordinates) matches
  // -Killing there, then recompute the dependent data.
  bool rescaled = false;
  for (int i = derived.offset; i < derived.end(); ++i) {
    const double kii = killing(i, i);
    if (kii >= -kStructTol) throw ConstructionError("Killing form not negative on d");
    const double scale = 1.0 / std::sqrt(-kii);
    if (std::abs(scale - 1.0) > 1e-14) {
      basis[i] *= scale;
      rescaled = true;
    }
  }
  if (rescaled) {
    basis_flat_ = flatten_basis(basis);
    coord_solver_.compute(basis_flat_);
    for (int i = 0; i < dim_g; ++i) {
      VectorXd ei = VectorXd::Zero(dim_g);
      ei(i) = 1.0;
      ad[i] = ad_matrix(ei);
    }
    for (int i = 0; i < dim_g; ++i)
      for (int j = 0; j <= i; ++j) killing(i, j) = killing(j, i) = (ad[i] * ad[j]).trace();
  }

  if (!in_group(w0, 1e-8)) throw ConstructionError("w0 is not in G");
  ad_w0 = adjoint(w0);

  // --- structural verification -------------------------------------------
  const double tol = kStructTol;

  // d = q + p accounting.
  const int p = pplus.size + 1;
  if (dim_ghat != nminus.size + p) throw ConstructionError("d != q + p");

  // Root-space structure of n+ under the Cartan block.
  roots.resize(nplus.size, cartan.size);
  for (int i = 0; i < nplus.size; ++i) {
    VectorXd y = VectorXd::Zero(dim_g);
    y(nplus.offset + i) = 1.0;
    for (int j = 0; j < cartan.size; ++j) {
      VectorXd x = VectorXd::Zero(dim_g);
      x(cartan.offset + j) = 1.0;
      const VectorXd br = bracket(x, y);
      roots(i, j) = br(nplus.offset + i);
      VectorXd resid = br - roots(i, j) * y;
      if (resid.norm() > 1e-9)
        throw ConstructionError("n+ basis vector is not a root vector");
    }
  }

  // Bracket closure: [l, n+] in n+, [n+, n+] in n+, [m, m] in m, [a, l] = 0
  // style checks, done by block membership of bracket coordinates.
  auto outside_block = [&](const VectorXd& v, const IndexRange& range) {
    double out = 0.0;
    for (int i = 0; i < dim_g; ++i)
      if (!range.contains(i)) out += v(i) * v(i);
    return std::sqrt(out);
  };
  for (int i = l.offset; i < l.end(); ++i)
    for (int j = nplus.offset; j < nplus.end(); ++j) {
      VectorXd x = VectorXd::Zero(dim_g), y = VectorXd::Zero(dim_g);
      x(i) = 1.0;
      y(j) = 1.0;
      if (outside_block(bracket(x, y), nplus) > tol)
        throw ConstructionError("[l, n+] leaves n+");
    }
  for (int i = nplus.offset; i < nplus.end(); ++i)
    for (int j = nplus.offset; j < nplus.end(); ++j) {
      VectorXd x = VectorXd::Zero(dim_g), y = VectorXd::Zero(dim_g);
      x(i) = 1.0;
      y(j) = 1.0;
      if (outside_block(bracket(x, y), nplus) > tol)
        throw ConstructionError("[n+, n+] leaves n+");
    }
  for (int i = cartan.offset; i < cartan.end(); ++i)
    for (int j = m.offset; j < m.end(); ++j) {
      VectorXd x = VectorXd::Zero(dim_g), y = VectorXd::Zero(dim_g);
      x(i) = 1.0;
      y(j) = 1.0;
      if (bracket(x, y).norm() > tol) throw ConstructionError("[a, m] != 0");
    }
  for (int i = z.offset; i < z.end(); ++i)
    for (int j = l.offset; j < l.end(); ++j) {
      VectorXd x = VectorXd::Zero(dim_g), y = VectorXd::Zero(dim_g);
      x(i) = 1.0;
      y(j) = 1.0;
      if (bracket(x, y).norm() > tol) throw ConstructionError("z does not centralize l");
    }

  // Gram orthogonality across blocks is automatic (identity in coordinates);
  // check that the declared gram matches -Killing on d.
  for (int i = derived.offset; i < derived.end(); ++i)
    for (int j = derived.offset; j < derived.end(); ++j) {
      const double expect = (i == j) ? -1.0 : 0.0;
      if (std::abs(killing(i, j) - expect) > 1e-8)
        throw ConstructionError("gram does not match -Killing on d");
    }

  // Killing negative definite on m.
  if (m.size > 0) {
    const MatrixXd km = killing.block(m.offset, m.offset, m.size, m.size);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(km);
    if (es.eigenvalues().maxCoeff() > -1e-9)
      throw ConstructionError("Killing form not negative definite on m");
  }

  // Ad(w0) maps the n+ block onto the n- block and fixes l setwise.
  for (int jcol = nplus.offset; jcol < nplus.end(); ++jcol) {
    double out = 0.0;
    for (int i = 0; i < dim_g; ++i)
      if (!nminus.contains(i)) out += ad_w0(i, jcol) * ad_w0(i, jcol);
    if (std::sqrt(out) > 1e-9) throw ConstructionError("Ad(w0) n+ != n-");
  }
  for (int jcol = l.offset; jcol < l.end(); ++jcol) {
    double out = 0.0;
    for (int i = 0; i < dim_g; ++i)
      if (!l.contains(i)) out += ad_w0(i, jcol) * ad_w0(i, jcol);
    if (std::sqrt(out) > 1e-9) throw ConstructionError("Ad(w0) does not fix l");
  }
}

MatrixXd LieModel::from_coords(const VectorXd& x) const {
  MatrixXd out = MatrixXd::Zero(def_dim, def_dim);
  for (int i = 0; i < dim_g; ++i)
    if (x(i) != 0.0) out += x(i) * basis[i];
  return out;
}

VectorXd LieModel::to_coords(const MatrixXd& mat, double* residual) const {
  const VectorXd flat = Eigen::Map<const VectorXd>(mat.data(), mat.size());
  const VectorXd coords = coord_solver_.solve(flat);
  if (residual) *residual = (basis_flat_ * coords - flat).norm();
  return coords;
}

VectorXd LieModel::bracket(const VectorXd& x, const VectorXd& y) const {
  const MatrixXd mx = from_coords(x);
  const MatrixXd my = from_coords(y);
  double resid = 0.0;
  const VectorXd out = to_coords(mx * my - my * mx, &resid);
  return out;
}

MatrixXd LieModel::ad_matrix(const VectorXd& x) const {
  MatrixXd out(dim_g, dim_g);
  const MatrixXd mx = from_coords(x);
  for (int j = 0; j < dim_g; ++j) {
    const MatrixXd br = mx * basis[j] - basis[j] * mx;
    out.col(j) = to_coords(br);
  }
  return out;
}

bool LieModel::in_group(const MatrixXd& h, double tol) const {
  if (h.rows() != def_dim || h.cols() != def_dim) return false;
  const double det = h.determinant();
  if (family == Family::SL) {
    if (std::abs(std::abs(det) - 1.0) > tol) return false;
    if (n % 2 == 0 && det < 0) return false;
    return true;
  }
  const MatrixXd j = minkowski(n);
  if ((h.transpose() * j * h - j).norm() > tol * (1.0 + h.squaredNorm())) return false;
  if (std::abs(det - 1.0) > tol * (1.0 + h.squaredNorm())) return false;
  if (h(n, n) <= 0.0) return false;  // orthochronous
  return true;
}

MatrixXd LieModel::adjoint(const MatrixXd& h) const {
  if (!in_group(h)) throw DomainError("adjoint: element is not in G");
  const MatrixXd hinv = h.partialPivLu().solve(MatrixXd::Identity(def_dim, def_dim));
  MatrixXd out(dim_g, dim_g);
  for (int j = 0; j < dim_g; ++j) {
    double resid = 0.0;
    out.col(j) = to_coords(h * basis[j] * hinv, &resid);
    if (resid > 1e-7 * (1.0 + h.squaredNorm()))
      throw DomainError("adjoint: conjugation leaves the Lie algebra");
  }
  return out;
}

VectorXd LieModel::project_z(const VectorXd& x) const {
  double out_l = 0.0;
  for (int i = 0; i < dim_g; ++i)
    if (!l.contains(i)) out_l += x(i) * x(i);
  if (std::sqrt(out_l) > 1e-9 * std::max(1.0, x.norm()))
    throw DomainError("project_z: vector is not in l");
  VectorXd out = VectorXd::Zero(dim_g);
  for (int i = z.offset; i < z.end(); ++i) out(i) = x(i);
  return out;
}

VectorXd LieModel::neutral_vector() const {
  const VectorXd v = weyl_interior - ad_w0 * weyl_interior;
  return v;
}

double LieModel::quasi_translation_residual(const MatrixXd& q) const {
  const int dz = z.size;
  const int dd = derived.size;
  const int dl = dz + dd;
  if (q.rows() != dl + 1 || q.cols() != dl + 1)
    throw DomainError("quasi_translation: matrix must act on l^");
  double r2 = 0.0;
  // z-linear block = identity
  r2 += (q.block(0, 0, dz, dz) - MatrixXd::Identity(dz, dz)).squaredNorm();
  // no z <-> d mixing
  r2 += q.block(0, dz, dz, dd).squaredNorm();
  r2 += q.block(dz, 0, dd, dz).squaredNorm();
  // d-linear block orthogonal
  if (dd > 0) {
    const MatrixXd r = q.block(dz, dz, dd, dd);
    r2 += (r.transpose() * r - MatrixXd::Identity(dd, dd)).squaredNorm();
  }
  // last row (0, ..., 0, 1)
  r2 += q.row(dl).head(dl).squaredNorm();
  r2 += (q(dl, dl) - 1.0) * (q(dl, dl) - 1.0);
  return std::sqrt(r2);
}

bool LieModel::is_quasi_translation(const MatrixXd& q, double tol) const {
  return quasi_translation_residual(q) < tol;
}

MatrixXd LieModel::ghat_block(const IndexRange& range, bool with_r0) const {
  const int cols = range.size + (with_r0 ? 1 : 0);
  MatrixXd b = MatrixXd::Zero(dim_ghat, cols);
  for (int i = 0; i < range.size; ++i) b(range.offset + i, i) = 1.0;
  if (with_r0) b(r0_index(), range.size) = 1.0;
  return b;
}

}  // namespace propaff
