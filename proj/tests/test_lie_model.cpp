#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "propaff/lie_model.hpp"

using namespace propaff;

namespace {

// Counting oracle, independent of the LieModel construction: enumerate the
// triangular/diagonal matrix families directly.
struct SlCounts {
  int strict_upper = 0, diag_traceless = 0;
};
SlCounts count_sl(int n) {
  SlCounts c;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i < j) ++c.strict_upper;
  c.diag_traceless = n - 1;
  return c;
}

int count_so_m(int n) {  // dim so(n-1)
  int count = 0;
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n - 1; ++j) ++count;
  return count;
}

}  // namespace

TEST_CASE("sl(2) dimensions") {
  const auto model = LieModel::build(Family::SL, 2);
  const auto c = count_sl(2);
  CHECK(model.dim_g == 3);
  CHECK(model.nplus.size == c.strict_upper);
  CHECK(model.nplus.size == 1);
  CHECK(model.cartan.size == c.diag_traceless);
  CHECK(model.m.size == 0);
  const int p = model.pplus.size + 1;
  const int q = model.nminus.size;
  CHECK(p == 3);
  CHECK(q == 1);
  CHECK(model.dim_ghat == 4);
  CHECK(model.dim_ghat == p + q);
}

TEST_CASE("sl(3) dimensions") {
  const auto model = LieModel::build(Family::SL, 3);
  const auto c = count_sl(3);
  CHECK(model.dim_g == 8);
  CHECK(model.nplus.size == c.strict_upper);
  CHECK(model.pplus.size == 5);
  CHECK(model.pplus.size + 1 == 6);
  CHECK(model.nminus.size == 3);
  CHECK(model.dim_ghat == 9);
}

TEST_CASE("so(4,1) dimensions") {
  const auto model = LieModel::build(Family::SOn1, 4);
  CHECK(model.dim_g == 10);
  CHECK(model.l.size == 4);
  CHECK(model.derived.size == 3);  // d = m ~ so(3)
  CHECK(model.m.size == count_so_m(4));
  CHECK(model.zm.size == 0);
  CHECK(model.nplus.size == 3);
}

TEST_CASE("so(3,1) has abelian m, so z(m) = m") {
  const auto model = LieModel::build(Family::SOn1, 3);
  CHECK(model.m.size == 1);
  CHECK(model.zm.size == 1);
  CHECK(model.derived.size == 0);
}

TEST_CASE("unsupported parameters are rejected") {
  CHECK_THROWS_AS(LieModel::build(Family::SL, 1), ConstructionError);
  CHECK_THROWS_AS(LieModel::build(Family::SOn1, 0), ConstructionError);
}

TEST_CASE("bracket: antisymmetry, sl2 relations, Jacobi") {
  const auto model = LieModel::build(Family::SL, 2);
  MatrixXd h(2, 2), e(2, 2);
  h << 1, 0, 0, -1;
  e << 0, 1, 0, 0;
  const VectorXd hc = model.to_coords(h);
  const VectorXd ec = model.to_coords(e);

  CHECK(model.bracket(hc, hc).norm() == doctest::Approx(0.0));
  // direct 2x2 commutator oracle: [H, E] = 2E
  const MatrixXd comm = h * e - e * h;
  CHECK((comm - 2.0 * e).norm() == doctest::Approx(0.0));
  CHECK((model.bracket(hc, ec) - 2.0 * ec).norm() < 1e-12);

  // Jacobi on a basis triple of sl(3)
  const auto m3 = LieModel::build(Family::SL, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 3; j < 6; ++j)
      for (int k = 6; k < 8; ++k) {
        VectorXd x = VectorXd::Zero(8), y = VectorXd::Zero(8), z = VectorXd::Zero(8);
        x(i) = 1;
        y(j) = 1;
        z(k) = 1;
        const VectorXd jac = m3.bracket(x, m3.bracket(y, z)) +
                             m3.bracket(y, m3.bracket(z, x)) +
                             m3.bracket(z, m3.bracket(x, y));
        CHECK(jac.norm() < 1e-10);
      }
}

TEST_CASE("bracket of a with m vanishes") {
  const auto model = LieModel::build(Family::SOn1, 4);
  VectorXd a = VectorXd::Zero(model.dim_g);
  a(model.cartan.offset) = 1.0;
  for (int i = model.m.offset; i < model.m.end(); ++i) {
    VectorXd mv = VectorXd::Zero(model.dim_g);
    mv(i) = 1.0;
    CHECK(model.bracket(a, mv).norm() < 1e-12);
  }
}

TEST_CASE("adjoint: identity, multiplicativity, diagonal eigenvalues") {
  const auto model = LieModel::build(Family::SL, 2);
  const MatrixXd id = MatrixXd::Identity(2, 2);
  CHECK((model.adjoint(id) - MatrixXd::Identity(3, 3)).norm() < 1e-12);

  MatrixXd h(2, 2);
  h << 2.0, 0.0, 0.0, 0.5;
  const MatrixXd ad = model.adjoint(h);
  // oracle: h E h^-1 = 4E, h H h^-1 = H, h F h^-1 = F/4
  MatrixXd e(2, 2), f(2, 2), hh(2, 2);
  e << 0, 1, 0, 0;
  f << 0, 0, 1, 0;
  hh << 1, 0, 0, -1;
  CHECK((h * e * h.inverse() - 4.0 * e).norm() < 1e-12);
  CHECK((ad * model.to_coords(e) - 4.0 * model.to_coords(e)).norm() < 1e-12);
  CHECK((ad * model.to_coords(hh) - model.to_coords(hh)).norm() < 1e-12);
  CHECK((ad * model.to_coords(f) - 0.25 * model.to_coords(f)).norm() < 1e-12);

  MatrixXd r(2, 2);
  r << std::cos(0.4), -std::sin(0.4), std::sin(0.4), std::cos(0.4);
  CHECK((model.adjoint(h * r) - model.adjoint(h) * model.adjoint(r)).norm() < 1e-8);

  MatrixXd bad(2, 2);
  bad << 2, 0, 0, 2;  // det 4: not in the group
  CHECK_THROWS_AS(model.adjoint(bad), DomainError);
}

TEST_CASE("Ad(w0) maps the n+ block to the n- block") {
  for (const auto& model :
       {LieModel::build(Family::SL, 2), LieModel::build(Family::SL, 3),
        LieModel::build(Family::SOn1, 4)}) {
    const MatrixXd ad = model.ad_w0;
    for (int j = model.nplus.offset; j < model.nplus.end(); ++j) {
      double outside = 0.0;
      for (int i = 0; i < model.dim_g; ++i)
        if (!model.nminus.contains(i)) outside += ad(i, j) * ad(i, j);
      CHECK(std::sqrt(outside) < 1e-10);
    }
  }
}

TEST_CASE("root-space structure of n+") {
  for (const auto& model :
       {LieModel::build(Family::SL, 3), LieModel::build(Family::SOn1, 4)}) {
    for (int i = 0; i < model.nplus.size; ++i) {
      VectorXd y = VectorXd::Zero(model.dim_g);
      y(model.nplus.offset + i) = 1.0;
      for (int j = 0; j < model.cartan.size; ++j) {
        VectorXd x = VectorXd::Zero(model.dim_g);
        x(model.cartan.offset + j) = 1.0;
        const VectorXd br = model.bracket(x, y);
        CHECK((br - model.roots(i, j) * y).norm() < 1e-9);
      }
    }
  }
}

TEST_CASE("project_z: identity on z, kernel d, a + m |-> a on so(4,1)") {
  const auto model = LieModel::build(Family::SOn1, 4);
  VectorXd zv = VectorXd::Zero(model.dim_g);
  zv(model.z.offset) = 0.7;
  CHECK((model.project_z(zv) - zv).norm() < 1e-12);

  VectorXd dv = VectorXd::Zero(model.dim_g);
  dv(model.derived.offset) = 1.3;
  CHECK(model.project_z(dv).norm() < 1e-12);

  // z(m) = 0 for m = so(3), so pi_z(a + m-part) = a.
  VectorXd mixed = zv + dv;
  CHECK((model.project_z(mixed) - zv).norm() < 1e-12);

  VectorXd outside = VectorXd::Zero(model.dim_g);
  outside(model.nplus.offset) = 1.0;
  CHECK_THROWS_AS(model.project_z(outside), DomainError);
}

TEST_CASE("project_z is idempotent") {
  const auto model = LieModel::build(Family::SOn1, 4);
  VectorXd x = VectorXd::Zero(model.dim_g);
  for (int i = model.l.offset; i < model.l.end(); ++i) x(i) = 0.1 * (i + 1);
  const VectorXd once = model.project_z(x);
  CHECK((model.project_z(once) - once).norm() < 1e-12);
}

TEST_CASE("neutral vector: v = 2 v' and -Ad(w0) v = v") {
  for (const auto& model :
       {LieModel::build(Family::SL, 2), LieModel::build(Family::SL, 3),
        LieModel::build(Family::SOn1, 2), LieModel::build(Family::SOn1, 4)}) {
    const VectorXd v = model.neutral_vector();
    CHECK(v.norm() > 1e-9);
    CHECK((-(model.ad_w0 * v) - v).norm() < 1e-9);
    // w0 reverses the chosen interior sample in both families
    CHECK((v - 2.0 * model.weyl_interior).norm() < 1e-9);
    // v lies in the Cartan block
    for (int i = 0; i < model.dim_g; ++i)
      if (!model.cartan.contains(i)) CHECK(std::abs(v(i)) < 1e-12);
  }
}

TEST_CASE("Killing form negative definite on m") {
  const auto model = LieModel::build(Family::SOn1, 4);
  const MatrixXd km =
      model.killing.block(model.m.offset, model.m.offset, model.m.size, model.m.size);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(km);
  CHECK(es.eigenvalues().maxCoeff() < -1e-9);
  // and the adapted scaling makes -Killing the identity on d
  for (int i = model.derived.offset; i < model.derived.end(); ++i)
    CHECK(model.killing(i, i) == doctest::Approx(-1.0));
}

TEST_CASE("quasi-translation predicate") {
  const auto model = LieModel::build(Family::SOn1, 4);
  const int dz = model.z.size, dd = model.derived.size, dl = dz + dd;

  MatrixXd q = MatrixXd::Identity(dl + 1, dl + 1);
  q(0, dl) = 0.4;  // z-translation
  // rotation on the d block
  MatrixXd rot = MatrixXd::Identity(dd, dd);
  rot(0, 0) = std::cos(0.5);
  rot(0, 1) = -std::sin(0.5);
  rot(1, 0) = std::sin(0.5);
  rot(1, 1) = std::cos(0.5);
  q.block(dz, dz, dd, dd) = rot;
  q(dz, dl) = -0.2;  // d-translation
  CHECK(model.is_quasi_translation(q));

  // scaling the z block must be rejected
  MatrixXd bad1 = q;
  bad1(0, 0) = 1.5;
  CHECK_FALSE(model.is_quasi_translation(bad1));

  // non-orthogonal d block must be rejected
  MatrixXd bad2 = q;
  bad2.block(dz, dz, dd, dd) *= 1.2;
  CHECK_FALSE(model.is_quasi_translation(bad2));

  // mixing z into d must be rejected
  MatrixXd bad3 = q;
  bad3(dz, 0) = 0.3;
  CHECK_FALSE(model.is_quasi_translation(bad3));
}

TEST_CASE("for sl the l-hat automorphisms accepted are pure translations") {
  const auto model = LieModel::build(Family::SL, 2);
  const int dl = model.l.size;
  REQUIRE(model.derived.size == 0);
  MatrixXd q = MatrixXd::Identity(dl + 1, dl + 1);
  q(0, dl) = 2.0;
  CHECK(model.is_quasi_translation(q));
  MatrixXd bad = q;
  bad(0, 0) = -1.0;  // any nontrivial linear part fails
  CHECK_FALSE(model.is_quasi_translation(bad));
}

TEST_CASE("to_coords round-trips and reports residuals") {
  const auto model = LieModel::build(Family::SOn1, 3);
  VectorXd x(model.dim_g);
  for (int i = 0; i < model.dim_g; ++i) x(i) = std::sin(1.0 + i);
  double resid = 1.0;
  const VectorXd back = model.to_coords(model.from_coords(x), &resid);
  CHECK((back - x).norm() < 1e-12);
  CHECK(resid < 1e-12);

  // a matrix outside the algebra has a large residual
  MatrixXd off = MatrixXd::Identity(model.def_dim, model.def_dim);
  model.to_coords(off, &resid);
  CHECK(resid > 0.5);
}
