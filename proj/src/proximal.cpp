#include "propaff/proximal.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace propaff {

std::vector<std::vector<int>> lex_subsets(int d, int p) {
  std::vector<std::vector<int>> out;
  if (p < 0 || p > d) return out;
  std::vector<int> cur(p);
  for (int i = 0; i < p; ++i) cur[i] = i;
  while (true) {
    out.push_back(cur);
    int i = p - 1;
    while (i >= 0 && cur[i] == d - p + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (int j = i + 1; j < p; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

namespace {

double minor_det(const MatrixXd& cols, const std::vector<int>& rows) {
  const int p = static_cast<int>(rows.size());
  MatrixXd sub(p, p);
  for (int i = 0; i < p; ++i) sub.row(i) = cols.row(rows[i]);
  if (p == 1) return sub(0, 0);
  if (p == 2) return sub(0, 0) * sub(1, 1) - sub(0, 1) * sub(1, 0);
  return sub.partialPivLu().determinant();
}

MatrixXd exterior_power_impl(const MatrixXd& a, int p, bool parallel) {
  const int d = static_cast<int>(a.rows());
  if (p < 1 || p > d) throw DomainError("exterior_power: p out of range");
  const auto subsets = lex_subsets(d, p);
  const int m = static_cast<int>(subsets.size());
  MatrixXd out(m, m);
#pragma omp parallel for schedule(dynamic) if (parallel && m > 32)
  for (int ci = 0; ci < m; ++ci) {
    MatrixXd cols(d, p);
    for (int t = 0; t < p; ++t) cols.col(t) = a.col(subsets[ci][t]);
    for (int ri = 0; ri < m; ++ri) out(ri, ci) = minor_det(cols, subsets[ri]);
  }
  return out;
}

}  // namespace

MatrixXd exterior_power(const MatrixXd& a, int p) { return exterior_power_impl(a, p, true); }

MatrixXd exterior_power_serial(const MatrixXd& a, int p) {
  return exterior_power_impl(a, p, false);
}

VectorXd wedge_columns(const MatrixXd& basis) {
  const int d = static_cast<int>(basis.rows());
  const int p = static_cast<int>(basis.cols());
  const auto subsets = lex_subsets(d, p);
  VectorXd out(static_cast<Eigen::Index>(subsets.size()));
  for (size_t i = 0; i < subsets.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = minor_det(basis, subsets[i]);
  return out;
}

std::optional<ProximalData> proximal_data(const MatrixXd& gamma, double tol) {
  const int d = static_cast<int>(gamma.rows());
  Eigen::EigenSolver<MatrixXd> es(gamma);
  int top = 0;
  for (int i = 1; i < d; ++i)
    if (std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(top))) top = i;
  const auto lambda = es.eigenvalues()(top);
  const double mod = std::abs(lambda);
  if (mod <= 0.0) return std::nullopt;
  if (std::abs(lambda.imag()) > tol * mod) return std::nullopt;
  double second = 0.0;
  for (int i = 0; i < d; ++i) {
    if (i == top) continue;
    second = std::max(second, std::abs(es.eigenvalues()(i)));
  }
  if (second > (1.0 - tol) * mod) return std::nullopt;

  ProximalData data;
  data.lambda = lambda.real();
  VectorXd v = es.eigenvectors().col(top).real();
  data.Es = v / v.norm();
  const double cut = 0.5 * (second / mod + 1.0);
  data.Eu = invariant_subspace(
      gamma, [&](std::complex<double> l) { return std::abs(l) < cut * mod; });
  if (data.Eu.cols() != d - 1) return std::nullopt;
  data.stilde = operator_norm(gamma * data.Eu) / mod;

  const double scale = std::max(1.0, gamma.norm());
  if ((gamma * data.Es - data.lambda * data.Es).norm() > 1e-7 * scale)
    throw InstabilityError("attracting direction fails its eigen equation");
  const MatrixXd img = gamma * data.Eu;
  if ((img - data.Eu * (data.Eu.transpose() * img)).norm() > 1e-7 * scale)
    throw InstabilityError("repelling hyperplane is not invariant");
  return data;
}

BridgeReport regular_proximal_bridge(const LieModel& model, const ExtAffineMap& g,
                                     double tol_gap) {
  BridgeReport report;
  const int p = model.pplus.size + 1;
  const DynamicalSplitting split = dynamical_splitting(model, g, tol_gap);
  report.regular = is_R_regular(model, split);

  const MatrixXd lam = exterior_power(g.ghat_matrix(), p);
  const auto pd = proximal_data(lam, tol_gap);
  report.proximal = pd.has_value();
  if (pd) report.stilde = pd->stilde;
  if (report.regular) {
    report.s = contraction_strength(model, g, split);
    if (pd) report.es_angle = projective_angle(pd->Es, wedge_columns(mpa_ge(split)));
  }
  return report;
}

std::pair<double, double> angle_compression_check(const MatrixXd& f1, const MatrixXd& f2) {
  if (f1.cols() != f2.cols() || f1.cols() < 1)
    throw DomainError("angle_compression_check: dimension mismatch");
  const int p = static_cast<int>(f1.cols());
  const MatrixXd q1 = orthonormal_columns(f1);
  const MatrixXd q2 = orthonormal_columns(f2);
  const double alpha1 = hausdorff_angle(q1, q2);
  const double alpha2 = projective_angle(wedge_columns(q1), wedge_columns(q2));
  if (alpha1 > alpha2 + 1e-9)
    throw PropertyViolation("angle compression: alpha1 > alpha2");
  if (alpha2 > std::sqrt(static_cast<double>(p)) * alpha1 + 1e-9)
    throw PropertyViolation("angle compression: alpha2 > sqrt(p) alpha1");
  return {alpha1, alpha2};
}

LipschitzReport lipschitz_sample(const MatrixXd& gamma, const LipschitzRegion& region,
                                 int n_samples, std::uint64_t seed) {
  const auto pd = proximal_data(gamma);
  if (!pd) throw DomainError("lipschitz_sample: map is not proximal");
  const int d = static_cast<int>(gamma.rows());
  Rng rng(seed);

  auto random_unit = [&]() {
    VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = rng.normal();
    return VectorXd(v / v.norm());
  };

  std::vector<VectorXd> points;
  int budget = 200 * n_samples;
  while (static_cast<int>(points.size()) < n_samples && budget-- > 0) {
    if (region.kind == LipschitzRegion::AroundAttracting) {
      VectorXd w = random_unit();
      w -= w.dot(pd->Es) * pd->Es;
      if (w.norm() < 1e-12) continue;
      w.normalize();
      const double theta = rng.uniform(0.0, region.zeta);
      points.push_back(std::cos(theta) * pd->Es + std::sin(theta) * w);
    } else {
      const VectorXd v = random_unit();
      // angle between the line and the hyperplane Eu
      const double along = (pd->Eu.transpose() * v).norm();
      if (std::acos(std::min(1.0, along)) < region.zeta) continue;
      points.push_back(v);
    }
  }
  if (static_cast<int>(points.size()) < 2)
    throw SamplingError("lipschitz_sample: region sampling budget exhausted");

  LipschitzReport report;
  report.stilde = pd->stilde;
  for (size_t i = 0; i < points.size(); ++i)
    for (size_t j = i + 1; j < points.size(); ++j) {
      const double denom = projective_angle(points[i], points[j]);
      if (denom < 1e-12) continue;
      const double num = projective_angle(gamma * points[i], gamma * points[j]);
      report.empirical = std::max(report.empirical, num / denom);
      ++report.pairs;
    }
  report.ratio = report.empirical / report.stilde;
  return report;
}

}  // namespace propaff
