#include "propaff/schottky.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "propaff/sampling.hpp"

namespace propaff {

// ---------------------------------------------------------------------------
// Words
// ---------------------------------------------------------------------------

Word reduce(const Word& w) {
  Word out;
  for (const Letter& l : w.letters) {
    if (!out.letters.empty() && out.letters.back() == l.inverse())
      out.letters.pop_back();
    else
      out.letters.push_back(l);
  }
  return out;
}

bool is_reduced(const Word& w) {
  for (size_t i = 0; i + 1 < w.letters.size(); ++i)
    if (w.letters[i + 1] == w.letters[i].inverse()) return false;
  return true;
}

bool is_cyclically_reduced(const Word& w) {
  if (!is_reduced(w)) return false;
  if (w.letters.size() >= 2 && w.letters.front() == w.letters.back().inverse())
    return false;
  return true;
}

std::pair<Word, Word> cyclic_conjugate_to_reduced(const Word& w) {
  Word core = reduce(w);
  Word conj;
  while (core.letters.size() >= 2 && core.letters.front() == core.letters.back().inverse()) {
    conj.letters.push_back(core.letters.front());
    core.letters.erase(core.letters.begin());
    core.letters.pop_back();
  }
  return {core, conj};
}

Word concat(const Word& a, const Word& b) {
  Word out = a;
  out.letters.insert(out.letters.end(), b.letters.begin(), b.letters.end());
  return out;
}

Word word_inverse(const Word& w) {
  Word out;
  for (auto it = w.letters.rbegin(); it != w.letters.rend(); ++it)
    out.letters.push_back(it->inverse());
  return out;
}

namespace {

int letter_rank(const Letter& l) { return 2 * l.index + (l.sign < 0 ? 1 : 0); }

Letter letter_from_rank(int r) { return {r / 2, (r % 2) ? -1 : 1}; }

void enumerate_words(int k, int length, bool cyclic, std::vector<Word>& out) {
  if (length <= 0) return;
  Word cur;
  cur.letters.reserve(static_cast<size_t>(length));
  // depth-first in rank order gives lexicographic output
  std::function<void()> rec = [&]() {
    if (cur.length() == length) {
      if (!cyclic || cur.letters.front() != cur.letters.back().inverse())
        out.push_back(cur);
      return;
    }
    for (int r = 0; r < 2 * k; ++r) {
      const Letter l = letter_from_rank(r);
      if (!cur.letters.empty() && l == cur.letters.back().inverse()) continue;
      cur.letters.push_back(l);
      rec();
      cur.letters.pop_back();
    }
  };
  rec();
}

}  // namespace

std::vector<Word> cyclically_reduced_words(int k, int length) {
  std::vector<Word> out;
  enumerate_words(k, length, true, out);
  return out;
}

std::vector<Word> reduced_words(int k, int length) {
  std::vector<Word> out;
  enumerate_words(k, length, false, out);
  return out;
}

std::string word_to_string(const Word& w) {
  std::string out;
  for (const Letter& l : w.letters) {
    if (l.index >= 26) throw DomainError("word display supports at most 26 generators");
    out += static_cast<char>((l.sign > 0 ? 'a' : 'A') + l.index);
  }
  return out;
}

Word word_from_string(const std::string& s, int k) {
  Word w;
  for (char c : s) {
    Letter l;
    if (c >= 'a' && c <= 'z') l = {c - 'a', 1};
    else if (c >= 'A' && c <= 'Z') l = {c - 'A', -1};
    else throw DomainError(std::string("bad word letter: ") + c);
    if (l.index >= k) throw DomainError("word letter out of range");
    w.letters.push_back(l);
  }
  return w;
}

ExtAffineMap evaluate_word(const LieModel& model, const std::vector<ExtAffineMap>& gens,
                           const Word& w) {
  ExtAffineMap out = ExtAffineMap::identity(model);
  for (const Letter& l : w.letters) {
    if (l.index < 0 || l.index >= static_cast<int>(gens.size()))
      throw DomainError("word letter index out of range");
    out = compose(out, l.sign > 0 ? gens[static_cast<size_t>(l.index)]
                                  : inverse(gens[static_cast<size_t>(l.index)]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Factored word analysis
//
// Long words have enormous spectral spread; assembling them as one matrix
// destroys the unit-modulus cluster in double precision. All per-word
// quantities are therefore computed from the factors: dominant subspaces by
// orthogonal iteration with per-factor re-orthonormalization, displacements
// by applying one moderate factor at a time.
// ---------------------------------------------------------------------------

namespace {

struct FactorCache {
  const LieModel* model = nullptr;
  std::vector<MatrixXd> fwd, inv;  // ghat matrices of generators and inverses
};

FactorCache make_cache(const LieModel& model, const std::vector<ExtAffineMap>& gens) {
  FactorCache cache;
  cache.model = &model;
  for (const auto& g : gens) {
    cache.fwd.push_back(g.ghat_matrix());
    cache.inv.push_back(inverse(g).ghat_matrix());
  }
  return cache;
}

const MatrixXd& factor_of(const FactorCache& cache, const Letter& l) {
  return l.sign > 0 ? cache.fwd[static_cast<size_t>(l.index)]
                    : cache.inv[static_cast<size_t>(l.index)];
}

VectorXd apply_word_point(const FactorCache& cache, const Word& w, VectorXd x) {
  for (int j = w.length() - 1; j >= 0; --j)
    x = factor_of(cache, w.letters[static_cast<size_t>(j)]) * x;
  return x;
}

MatrixXd apply_word_frame(const FactorCache& cache, const Word& w, MatrixXd q) {
  for (int j = w.length() - 1; j >= 0; --j)
    q = factor_of(cache, w.letters[static_cast<size_t>(j)]) * q;
  return q;
}

// One re-orthonormalized pass of the word over a frame.
MatrixXd word_pass(const FactorCache& cache, const Word& w, MatrixXd q) {
  for (int j = w.length() - 1; j >= 0; --j) {
    q = factor_of(cache, w.letters[static_cast<size_t>(j)]) * q;
    q = orthonormal_columns(q);
  }
  return q;
}

MatrixXd dominant_subspace(const FactorCache& cache, const Word& w, int dim) {
  const int d = cache.model->dim_ghat;
  MatrixXd q = MatrixXd::Identity(d, dim);
  for (int pass = 0; pass < 80; ++pass) {
    MatrixXd next = word_pass(cache, w, q);
    if (next.cols() != dim)
      throw SplittingError("orthogonal iteration lost rank");
    if (pass >= 1 && subspace_residual(next, q) < 1e-12) return next;
    q = next;
  }
  throw SplittingError("orthogonal iteration stalled: word may not be R-regular");
}

struct ChainSplit {
  DynamicalSplitting split;
  bool regular = false;
};

ChainSplit chain_splitting(const FactorCache& cache, const Word& w, double tol_gap) {
  const LieModel& model = *cache.model;
  const int p = model.pplus.size + 1;
  const int q = model.nminus.size;
  const Word winv = word_inverse(w);

  ChainSplit out;
  const MatrixXd a_ge = dominant_subspace(cache, w, p);
  const MatrixXd a_le = dominant_subspace(cache, winv, p);
  out.split.Vgt = dominant_subspace(cache, w, q);
  out.split.Vlt = dominant_subspace(cache, winv, q);
  out.split.Aeq = intersect_subspaces(a_ge, a_le, 1e-8);
  out.split.tol_gap = tol_gap;
  out.regular = out.split.Aeq.cols() == model.l.size + 1;
  if (!out.regular) return out;

  // invariance and modulus classification, relative to the image scale
  for (const MatrixXd* b : {&out.split.Vgt, &out.split.Aeq, &out.split.Vlt}) {
    const MatrixXd img = apply_word_frame(cache, w, *b);
    if ((img - (*b) * (b->transpose() * img)).norm() > 1e-7 * std::max(1.0, img.norm()))
      throw SplittingError("word-invariant subspace drifted");
  }
  const MatrixXd eq_compress =
      out.split.Aeq.transpose() * apply_word_frame(cache, w, out.split.Aeq);
  for (const auto& lambda : eigenvalues_of(eq_compress))
    if (std::abs(std::abs(lambda) - 1.0) > tol_gap)
      throw SplittingError("neutral block of a word has non-unit modulus");
  return out;
}

struct WordAnalysis {
  DynamicalSplitting split;
  Canonizer canon;
  MargulisInvariant m;
};

// One Margulis witness for a word, computed as a boundary-value problem over
// the whole orbit p_0, f_l(p_0), f_{l-1} f_l(p_0), ...: forward iteration
// through the expanding directions amplifies base-point error by the top
// eigenvalue of the word, while the closed linear system keeps the orbit
// bounded (the Green's function of a hyperbolic chain decays both ways).
// `pin` fixes the V=-coordinates of the base point; `l_twist` composes the
// canonizer with Ad(exp(l_twist)).
VectorXd margulis_bvp_witness(const FactorCache& cache, const Word& w,
                              const DynamicalSplitting& split, const MatrixXd& philin,
                              const VectorXd& pin, const VectorXd& l_twist) {
  const LieModel& model = *cache.model;
  const int d = model.dim_ghat;
  const int l = w.length();
  const int r0 = model.r0_index();
  if (l < 1) throw DomainError("margulis of the empty word");

  const MatrixXd veq = orthonormal_columns(split.Aeq * null_space(split.Aeq.row(r0)));
  MatrixXd axis(d, veq.cols() + 1);
  axis << veq, VectorXd::Unit(d, r0);
  const MatrixXd comp = orthogonal_complement(axis);  // 2q directions of g

  const int rows = l * d + static_cast<int>(comp.cols()) + 1 + static_cast<int>(veq.cols());
  const int cols = (l + 1) * d;
  MatrixXd a = MatrixXd::Zero(rows, cols);
  VectorXd b = VectorXd::Zero(rows);
  int at = 0;
  for (int m = 1; m <= l; ++m) {  // p_m = f_{l-m+1} p_{m-1}
    const MatrixXd& f = factor_of(cache, w.letters[static_cast<size_t>(l - m)]);
    a.block(at, m * d, d, d) = MatrixXd::Identity(d, d);
    a.block(at, (m - 1) * d, d, d) = -f;
    at += d;
  }
  // closure: p_l - p_0 has no component transverse to V=
  a.block(at, l * d, comp.cols(), d) = comp.transpose();
  a.block(at, 0, comp.cols(), d) = -comp.transpose();
  at += static_cast<int>(comp.cols());
  // affine chart
  a(at, r0) = 1.0;
  b(at) = 1.0;
  ++at;
  // pin the V=-coordinates of the base point (selects the witness x)
  a.block(at, 0, veq.cols(), d) = veq.transpose();
  b.segment(at, veq.cols()) = pin;

  const VectorXd y = a.completeOrthogonalDecomposition().solve(b);
  const VectorXd p0 = y.segment(0, d);
  const VectorXd pl = y.segment(l * d, d);
  const VectorXd disp_hat = pl - p0;
  if (std::abs(disp_hat(r0)) > 1e-8 * (1.0 + disp_hat.norm()))
    throw InstabilityError("word orbit leaves the affine chart");

  MatrixXd phi = philin;
  if (l_twist.size() == model.dim_g && l_twist.norm() > 0)
    phi = model.adjoint(model.from_coords(l_twist).exp()) * phi;
  const VectorXd wvec = phi * disp_hat.head(model.dim_g);
  double outside = 0.0;
  for (int i = 0; i < model.dim_g; ++i)
    if (!model.l.contains(i)) outside += wvec(i) * wvec(i);
  if (std::sqrt(outside) > 1e-6 * std::max(1.0, wvec.norm()))
    throw InstabilityError("canonized word displacement is not in l");
  return wvec.segment(model.z.offset, model.z.size);
}

WordAnalysis analyze_word(const FactorCache& cache, const Word& w, double tol_gap) {
  const LieModel& model = *cache.model;
  WordAnalysis out;
  ChainSplit cs = chain_splitting(cache, w, tol_gap);
  if (!cs.regular) throw DomainError("word is not R-regular");
  out.split = std::move(cs.split);
  out.canon = pair_canonize(model, mpa_ge(out.split), mpa_le(out.split));
  const MatrixXd philin = linear_part(out.canon.phi).lin;

  const VectorXd pin1 = VectorXd::Zero(model.l.size);
  const VectorXd m1 =
      margulis_bvp_witness(cache, w, out.split, philin, pin1, VectorXd::Zero(0));

  VectorXd pin2 = VectorXd::Constant(model.l.size, 0.5);
  VectorXd twist = VectorXd::Zero(model.dim_g);
  for (int j = 0; j < model.cartan.size; ++j)
    twist(model.cartan.offset + j) = 0.3 * model.weyl_interior(model.cartan.offset + j);
  if (model.m.size > 0) twist(model.m.offset) = 0.25;
  const VectorXd m2 = margulis_bvp_witness(cache, w, out.split, philin, pin2, twist);

  if ((m1 - m2).norm() > 1e-7 * std::max(1.0, m1.norm()))
    throw InstabilityError("word invariant witnesses disagree");
  out.m.z = m1;
  return out;
}

}  // namespace

WordReport analyze_word_over(const LieModel& model, const std::vector<ExtAffineMap>& gens,
                             const Word& w, double tol_gap) {
  const FactorCache cache = make_cache(model, gens);
  WordReport report;
  const ChainSplit cs = chain_splitting(cache, w, tol_gap);
  report.regular = cs.regular;
  report.split = cs.split;
  if (!report.regular) return report;
  const WordAnalysis analysis = analyze_word(cache, w, tol_gap);
  report.split = analysis.split;
  report.canon = analysis.canon;
  report.m = analysis.m;
  return report;
}

namespace {

Word random_cyclically_reduced(Rng& rng, int k, int length) {
  while (true) {
    Word w;
    for (int i = 0; i < length; ++i) {
      for (int tries = 0; tries < 64; ++tries) {
        const Letter l = letter_from_rank(static_cast<int>(rng.uniform_int(0, 2 * k - 1)));
        if (!w.letters.empty() && l == w.letters.back().inverse()) continue;
        w.letters.push_back(l);
        break;
      }
    }
    if (w.length() == length && is_cyclically_reduced(w)) return w;
  }
}

}  // namespace

MuEstimate estimate_mu(const LieModel& model, const std::vector<ExtAffineMap>& gens,
                       int max_len, int n_pairs, std::uint64_t seed) {
  const int k = static_cast<int>(gens.size());
  std::vector<std::pair<Word, Word>> pairs;

  // every admissible letter pair first
  for (int r1 = 0; r1 < 2 * k; ++r1)
    for (int r2 = 0; r2 < 2 * k; ++r2) {
      Word a, b;
      a.letters.push_back(letter_from_rank(r1));
      b.letters.push_back(letter_from_rank(r2));
      if (is_cyclically_reduced(concat(a, b))) pairs.emplace_back(a, b);
    }

  Rng rng(seed);
  int budget = 50 * n_pairs;
  while (static_cast<int>(pairs.size()) < n_pairs && budget-- > 0) {
    const int la = static_cast<int>(rng.uniform_int(1, std::max(1, max_len)));
    const int lb = static_cast<int>(rng.uniform_int(1, std::max(1, max_len)));
    const Word a = random_cyclically_reduced(rng, k, la);
    const Word b = random_cyclically_reduced(rng, k, lb);
    if (!is_cyclically_reduced(concat(a, b))) continue;
    pairs.emplace_back(a, b);
  }

  MuEstimate est;
  const FactorCache cache = make_cache(model, gens);
  const int count = static_cast<int>(pairs.size());
  std::vector<double> defects(static_cast<size_t>(count), -1.0);
  std::vector<std::string> errors(static_cast<size_t>(count));

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    try {
      const Word& wa = pairs[static_cast<size_t>(i)].first;
      const Word& wb = pairs[static_cast<size_t>(i)].second;
      const ChainSplit sa = chain_splitting(cache, wa, kDefaultTolGap);
      const ChainSplit sb = chain_splitting(cache, wb, kDefaultTolGap);
      if (!sa.regular || !sb.regular) {
        errors[static_cast<size_t>(i)] = "factor is not R-regular";
        continue;
      }
      // The additivity bound only covers non-degenerate pairs; degenerate
      // draws (possible for abusive generator families) are excluded rather
      // than poisoning mu_hat.
      const MatrixXd ge[2] = {mpa_ge(sa.split), mpa_ge(sb.split)};
      const MatrixXd le[2] = {mpa_le(sa.split), mpa_le(sb.split)};
      double min_sv = 1e300;
      for (int a = 0; a < 2 && min_sv > 1e-6; ++a)
        for (int b = 0; b < 2 && min_sv > 1e-6; ++b) {
          MatrixXd joined(model.dim_ghat, ge[a].cols() + le[b].cols());
          joined << ge[a], le[b];
          Eigen::JacobiSVD<MatrixXd> svd(joined);
          min_sv = std::min(min_sv, svd.singularValues().minCoeff());
        }
      if (min_sv <= 1e-6) {
        errors[static_cast<size_t>(i)] = "pair is numerically degenerate";
        continue;
      }
      const VectorXd mg = analyze_word(cache, wa, kDefaultTolGap).m.z;
      const VectorXd mh = analyze_word(cache, wb, kDefaultTolGap).m.z;
      const VectorXd mgh = analyze_word(cache, concat(wa, wb), kDefaultTolGap).m.z;
      defects[static_cast<size_t>(i)] = (mgh - mg - mh).norm();
    } catch (const Error& e) {
      errors[static_cast<size_t>(i)] = e.what();
    }
  }

  for (int i = 0; i < count; ++i) {
    if (defects[static_cast<size_t>(i)] >= 0.0) {
      est.defects.push_back(defects[static_cast<size_t>(i)]);
      est.mu_hat = std::max(est.mu_hat, defects[static_cast<size_t>(i)]);
    } else {
      ++est.excluded;
      est.warnings.push_back("pair (" + word_to_string(pairs[static_cast<size_t>(i)].first) +
                             ", " + word_to_string(pairs[static_cast<size_t>(i)].second) +
                             ") excluded: " + errors[static_cast<size_t>(i)]);
    }
  }

  est.histogram.assign(10, 0);
  if (est.mu_hat > 0)
    for (double d : est.defects) {
      const int bin = std::min(9, static_cast<int>(std::floor(10.0 * d / est.mu_hat)));
      ++est.histogram[static_cast<size_t>(bin)];
    }
  return est;
}

// ---------------------------------------------------------------------------
// Generator construction
// ---------------------------------------------------------------------------

namespace {

struct PoweredSeed {
  ExtAffineMap gamma;  // linear, powered
  Canonizer canon;
  DynamicalSplitting split;
};

// All ordered admissible pairs (u, v), v != u^-1, over the generators and
// their inverses; returns indices into the list {g_0, .., g_{k-1}, g_0^-1, ..}.
std::vector<std::pair<int, int>> admissible_pairs(int k) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < 2 * k; ++i)
    for (int j = 0; j < 2 * k; ++j)
      if (j != (i + k) % (2 * k)) out.emplace_back(i, j);
  return out;
}

VectorXd embed_z(const LieModel& model, const VectorXd& z) {
  VectorXd out = VectorXd::Zero(model.dim_g);
  out.segment(model.z.offset, model.z.size) = z;
  return out;
}

std::vector<ExtAffineMap> attach_translations(const LieModel& model,
                                              const std::vector<PoweredSeed>& seeds,
                                              const VectorXd& m0_z) {
  std::vector<ExtAffineMap> out;
  for (const auto& seed : seeds) {
    const VectorXd w =
        linear_part(seed.canon.phi).lin.partialPivLu().solve(embed_z(model, m0_z));
    out.push_back(compose(ExtAffineMap::translation(model, w), seed.gamma));
  }
  return out;
}

}  // namespace

GeneratorSet build_generators(const LieModel& model, int k, std::uint64_t seed,
                              double s_target, const BuildOptions& opts) {
  if (k < 2) throw DomainError("build_generators: k >= 2 required");

  const VectorXd v = model.neutral_vector();
  const VectorXd v_hat = v / v.norm();
  const VectorXd v_hat_z = v_hat.segment(model.z.offset, model.z.size);

  for (int attempt = 0; attempt < opts.resample_budget; ++attempt) {
    Rng rng = Rng::child(seed, static_cast<std::uint64_t>(attempt));

    // (1) random R-regular linear seeds with transversal stable spaces
    std::vector<ExtAffineMap> bases;
    for (int i = 0; i < k; ++i) bases.push_back(random_regular_linear(model, rng, 0.5));

    std::vector<ExtAffineMap> all;  // generators then inverses
    for (const auto& b : bases) all.push_back(b);
    for (const auto& b : bases) all.push_back(inverse(b));

    bool transversal = true;
    std::vector<DynamicalSplitting> splits;
    try {
      for (const auto& u : all) splits.push_back(dynamical_splitting(model, u));
    } catch (const Error&) {
      continue;
    }
    for (const auto& [i, j] : admissible_pairs(k)) {
      MatrixXd joined(model.dim_ghat, mpa_ge(splits[static_cast<size_t>(i)]).cols() +
                                          mpa_le(splits[static_cast<size_t>(j)]).cols());
      joined << mpa_ge(splits[static_cast<size_t>(i)]), mpa_le(splits[static_cast<size_t>(j)]);
      Eigen::JacobiSVD<MatrixXd> svd(joined);
      if (svd.singularValues().minCoeff() < opts.transversality_margin) {
        transversal = false;
        break;
      }
    }
    if (!transversal) continue;

    // (3) smallest power N with every s(gamma_i^+-N) at or below the target;
    // keeping N minimal keeps word norms manageable downstream
    auto worst_s_at = [&](int n, std::vector<PoweredSeed>* out) -> double {
      double worst = 0.0;
      if (out) out->clear();
      for (const auto& b : bases) {
        PoweredSeed s;
        s.gamma = power(b, n);
        s.split = dynamical_splitting(model, s.gamma);
        worst = std::max(worst, contraction_strength(model, s.gamma, s.split));
        worst = std::max(worst, contraction_strength(model, inverse(s.gamma)));
        if (out) out->push_back(std::move(s));
      }
      return worst;
    };
    int big_n = 0;
    std::vector<PoweredSeed> seeds;
    try {
      int hi = 1;
      while (hi <= 4096 && worst_s_at(hi, nullptr) > s_target) hi *= 2;
      if (hi > 4096) continue;
      int lo = std::max(1, hi / 2 + 1);
      while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (worst_s_at(mid, nullptr) <= s_target)
          hi = mid;
        else
          lo = mid + 1;
      }
      big_n = hi;
      worst_s_at(big_n, &seeds);
    } catch (const Error&) {
      continue;
    }

    // (2) pair non-degeneracy bound C over the admissible pairs
    double c_bound = 1.0;
    std::vector<Canonizer> canonizers;
    try {
      for (auto& s : seeds) {
        s.canon = canonize(model, s.gamma);
        canonizers.push_back(s.canon);
      }
      std::vector<DynamicalSplitting> powered_splits;
      for (const auto& s : seeds) powered_splits.push_back(s.split);
      for (const auto& s : seeds)
        powered_splits.push_back(dynamical_splitting(model, inverse(s.gamma)));
      for (const auto& [i, j] : admissible_pairs(k)) {
        const Canonizer pc =
            pair_canonize(model, mpa_ge(powered_splits[static_cast<size_t>(i)]),
                          mpa_le(powered_splits[static_cast<size_t>(j)]));
        c_bound = std::max(c_bound, pc.C_bound);
      }
    } catch (const Error&) {
      continue;
    }

    // (4) bootstrap mu on provisional unit-invariant generators
    const std::vector<ExtAffineMap> provisional = attach_translations(model, seeds, v_hat_z);
    double mu = 0.0;
    try {
      const MuEstimate boot = estimate_mu(model, provisional, opts.mu_max_len,
                                          opts.mu_pairs, seed ^ 0x5bd1e995u);
      if (boot.defects.empty()) continue;  // nothing measurable: bad draw
      mu = boot.mu_hat;
    } catch (const Error&) {
      continue;
    }

    // (5) attach tau_{phi_i^-1(M0)} and re-estimate, rescaling on growth;
    // the final rescale keeps ||M0|| = 2 mu_hat exactly.
    GeneratorSet out;
    out.model = model;
    out.seed = seed;
    out.s_target = s_target;
    out.N = big_n;
    out.C = c_bound;
    out.canonizers = canonizers;
    bool attached = false;
    for (int round = 0; round < 4; ++round) {
      const VectorXd m0_z = 2.0 * mu * v_hat_z;
      out.gens = attach_translations(model, seeds, m0_z);
      double mu_next = 0.0;
      try {
        mu_next = estimate_mu(model, out.gens, opts.mu_max_len, opts.mu_pairs,
                              seed ^ 0x9e3779b9u)
                      .mu_hat;
      } catch (const Error&) {
        break;
      }
      if (mu_next <= 1.5 * mu || round == 3) {
        out.mu_hat = mu_next;
        out.M0 = 2.0 * mu_next * v_hat_z;
        out.gens = attach_translations(model, seeds, out.M0);
        attached = true;
        break;
      }
      mu = mu_next;
    }
    if (!attached) continue;

    // (6) verify the hypotheses; escalate the power once if contraction
    // degraded past the target after attaching translations.
    HypothesisReport report = verify_hypotheses(out);
    if (!report.all_ok && !report.contraction_ok && big_n <= 2048) {
      big_n = static_cast<int>(std::ceil(1.5 * big_n));
      for (size_t i = 0; i < seeds.size(); ++i) {
        seeds[i].gamma = power(bases[i], big_n);
        seeds[i].split = dynamical_splitting(model, seeds[i].gamma);
        seeds[i].canon = canonize(model, seeds[i].gamma);
      }
      out.N = big_n;
      out.canonizers.clear();
      for (const auto& s : seeds) out.canonizers.push_back(s.canon);
      out.gens = attach_translations(model, seeds, out.M0);
      report = verify_hypotheses(out);
    }
    if (!report.all_ok) continue;
    return out;
  }
  throw SamplingError("build_generators: rejection budget exhausted, try another seed");
}

HypothesisReport verify_hypotheses(const GeneratorSet& gens) {
  const LieModel& model = gens.model;
  const int k = static_cast<int>(gens.gens.size());
  HypothesisReport report;
  report.regular_ok = true;
  report.contraction_ok = true;
  report.invariant_ok = true;
  report.pairs_ok = true;
  report.pair_bound = 1.0;

  std::vector<ExtAffineMap> all = gens.gens;
  for (int i = 0; i < k; ++i) all.push_back(inverse(gens.gens[static_cast<size_t>(i)]));

  std::vector<DynamicalSplitting> splits;
  for (int i = 0; i < 2 * k; ++i) {
    HypothesisReport::PerGenerator per;
    try {
      splits.push_back(dynamical_splitting(model, all[static_cast<size_t>(i)]));
      per.regular = is_R_regular(model, splits.back());
    } catch (const Error&) {
      per.regular = false;
      splits.push_back(DynamicalSplitting{});
    }
    if (!per.regular) report.regular_ok = false;
    if (i < k) report.generators.push_back(per);
  }
  if (!report.regular_ok) return report;

  for (int i = 0; i < k; ++i) {
    auto& per = report.generators[static_cast<size_t>(i)];
    try {
      per.s_forward = contraction_strength(model, all[static_cast<size_t>(i)],
                                           splits[static_cast<size_t>(i)]);
      per.s_inverse = contraction_strength(model, all[static_cast<size_t>(i + k)],
                                           splits[static_cast<size_t>(i + k)]);
      const MargulisInvariant m = margulis_invariant(model, all[static_cast<size_t>(i)]);
      per.m0_deviation = (m.z - gens.M0).norm();
    } catch (const Error&) {
      per.s_forward = per.s_inverse = per.m0_deviation =
          std::numeric_limits<double>::infinity();
    }
    report.max_s = std::max({report.max_s, per.s_forward, per.s_inverse});
    report.max_m0_deviation = std::max(report.max_m0_deviation, per.m0_deviation);
  }
  report.contraction_ok = report.max_s <= gens.s_target * (1.0 + 1e-9);
  report.invariant_ok = report.max_m0_deviation <= 1e-6;

  for (const auto& [i, j] : admissible_pairs(k)) {
    try {
      const Canonizer pc = pair_canonize(model, mpa_ge(splits[static_cast<size_t>(i)]),
                                         mpa_le(splits[static_cast<size_t>(j)]));
      report.pair_bound = std::max(report.pair_bound, pc.C_bound);
    } catch (const Error& e) {
      report.pairs_ok = false;
      const auto name = [&](int t) {
        Word w;
        w.letters.push_back({t % k, t < k ? 1 : -1});
        return word_to_string(w);
      };
      report.pair_failure = "(" + name(i) + ", " + name(j) + "): " + e.what();
      break;
    }
  }

  report.all_ok =
      report.regular_ok && report.pairs_ok && report.contraction_ok && report.invariant_ok;
  return report;
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

namespace {

CertificateRow certify_row_cached(const FactorCache& cache, const GeneratorSet& gens,
                                  const std::vector<VectorXd>& letter_invariants,
                                  const Word& w, double tol) {
  CertificateRow row;
  row.word = w;
  row.length = w.length();
  try {
    const ChainSplit cs = chain_splitting(cache, w, kDefaultTolGap);
    row.regular = cs.regular;
    if (!row.regular) {
      row.error = "word is not R-regular";
      return row;
    }
    const Canonizer canon = pair_canonize(gens.model, mpa_ge(cs.split), mpa_le(cs.split));
    const auto apply = [&cache, &w](const VectorXd& x) {
      return apply_word_point(cache, w, x);
    };
    const MargulisInvariant m =
        margulis_invariant_checked(gens.model, apply, cs.split, canon);
    row.margulis_norm = m.norm();
    VectorXd expected = VectorXd::Zero(gens.model.z.size);
    for (const Letter& l : w.letters)
      expected += letter_invariants[static_cast<size_t>(letter_rank(l))];
    row.defect = (m.z - expected).norm();
    row.pass = row.margulis_norm >= static_cast<double>(row.length) * gens.mu_hat - tol;
  } catch (const Error& e) {
    row.regular = false;
    row.error = e.what();
  }
  return row;
}

}  // namespace

CertificateRow certify_row(const GeneratorSet& gens,
                           const std::vector<VectorXd>& letter_invariants, const Word& w,
                           double tol) {
  const FactorCache cache = make_cache(gens.model, gens.gens);
  return certify_row_cached(cache, gens, letter_invariants, w, tol);
}

Certificate certify_growth(const GeneratorSet& gens, int L, const CertifyOptions& opts) {
  Certificate cert;
  cert.L = L;
  cert.mu_hat = gens.mu_hat;
  cert.tol = opts.tol;
  cert.ball_radius = opts.ball_radius;
  const int k = static_cast<int>(gens.gens.size());

  const FactorCache cache = make_cache(gens.model, gens.gens);
  std::vector<VectorXd> letter_invariants(static_cast<size_t>(2 * k));
  for (int i = 0; i < k; ++i) {
    Word plus, minus;
    plus.letters.push_back({i, 1});
    minus.letters.push_back({i, -1});
    letter_invariants[static_cast<size_t>(2 * i)] =
        analyze_word(cache, plus, kDefaultTolGap).m.z;
    letter_invariants[static_cast<size_t>(2 * i + 1)] =
        analyze_word(cache, minus, kDefaultTolGap).m.z;
  }

  std::vector<Word> words;
  for (int l = 1; l <= L; ++l) {
    const auto batch = cyclically_reduced_words(k, l);
    words.insert(words.end(), batch.begin(), batch.end());
  }
  cert.rows.resize(words.size());

  const int count = static_cast<int>(words.size());
#pragma omp parallel for schedule(dynamic) if (opts.parallel)
  for (int i = 0; i < count; ++i)
    cert.rows[static_cast<size_t>(i)] =
        certify_row_cached(cache, gens, letter_invariants, words[static_cast<size_t>(i)], opts.tol);

  cert.pass = true;
  std::vector<double> xs, ys;
  for (const auto& row : cert.rows) {
    if (!row.regular) {
      cert.pass = false;
      if (cert.failure.empty())
        cert.failure = "word " + word_to_string(row.word) + ": " +
                       (row.error.empty() ? "not R-regular" : row.error);
      continue;
    }
    if (!row.pass) {
      cert.pass = false;
      if (cert.failure.empty())
        cert.failure = "word " + word_to_string(row.word) + ": invariant below linear bound";
    }
    xs.push_back(row.length);
    ys.push_back(row.margulis_norm);
  }
  if (xs.size() >= 2) {
    cert.slope_fit = fit_line(xs, ys);
    if (cert.slope_fit.slope < gens.mu_hat - opts.tol) {
      cert.pass = false;
      if (cert.failure.empty()) cert.failure = "growth slope below mu_hat";
    }
  }

  // disjointness spot checks on the longest and shortest enumerated words
  if (!cert.rows.empty()) {
    std::vector<size_t> picks = {0, cert.rows.size() / 2, cert.rows.size() - 1};
    for (size_t p : picks) {
      if (!cert.rows[p].regular) continue;
      DisplacementCheck check;
      check.word = cert.rows[p].word;
      check.radius = opts.ball_radius;
      check.disjoint = check_displacement(gens, cert.rows[p].word, opts.ball_radius);
      cert.displacement_checks.push_back(std::move(check));
    }
  }
  return cert;
}

bool check_displacement(const GeneratorSet& gens, const Word& w, double radius) {
  if (!is_cyclically_reduced(w))
    throw DomainError("check_displacement: word must be cyclically reduced");
  const FactorCache cache = make_cache(gens.model, gens.gens);
  WordAnalysis analysis;
  try {
    analysis = analyze_word(cache, w, kDefaultTolGap);
  } catch (const Error& e) {
    throw DomainError(std::string("check_displacement: ") + e.what());
  }
  double max_disp = 0.0;
  for (const auto& gen : gens.gens) {
    max_disp = std::max(max_disp, gen.trans.norm());
    max_disp = std::max(max_disp, inverse(gen).trans.norm());
  }
  return analysis.m.norm() > 2.0 * analysis.canon.C_bound * (2.0 * radius + max_disp);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

Json generator_set_to_json(const GeneratorSet& gens) {
  Json out = Json::object();
  out.set("model", model_descriptor(gens.model));
  out.set("seed", gens.seed);
  out.set("s_target", gens.s_target);
  out.set("N", std::int64_t{gens.N});
  out.set("C", gens.C);
  out.set("mu_hat", gens.mu_hat);
  out.set("M0", to_json(gens.M0));
  Json gen_arr = Json::array();
  for (const auto& g : gens.gens) gen_arr.push(map_to_json(gens.model, g));
  out.set("generators", std::move(gen_arr));
  Json can_arr = Json::array();
  for (const auto& c : gens.canonizers) {
    Json entry = Json::object();
    entry.set("map", map_to_json(gens.model, c.phi));
    entry.set("C_bound", c.C_bound);
    can_arr.push(std::move(entry));
  }
  out.set("canonizers", std::move(can_arr));
  return out;
}

GeneratorSet generator_set_from_json(const Json& j) {
  GeneratorSet gens;
  gens.model = model_from_descriptor(j.at("model"));
  gens.seed = static_cast<std::uint64_t>(j.at("seed").as_int());
  gens.s_target = j.at("s_target").as_double();
  gens.N = static_cast<int>(j.at("N").as_int());
  gens.C = j.at("C").as_double();
  gens.mu_hat = j.at("mu_hat").as_double();
  gens.M0 = vector_from_json(j.at("M0"));
  const Json& arr = j.at("generators");
  for (size_t i = 0; i < arr.size(); ++i)
    gens.gens.push_back(map_from_json(gens.model, arr.at(i)));
  if (j.has("canonizers")) {
    const Json& cans = j.at("canonizers");
    for (size_t i = 0; i < cans.size(); ++i) {
      Canonizer c;
      c.phi = map_from_json(gens.model, cans.at(i).at("map"));
      c.C_bound = cans.at(i).at("C_bound").as_double();
      gens.canonizers.push_back(std::move(c));
    }
  }
  return gens;
}

Json certificate_to_json(const Certificate& cert) {
  Json out = Json::object();
  out.set("L", std::int64_t{cert.L});
  out.set("mu_hat", cert.mu_hat);
  out.set("tol", cert.tol);
  out.set("pass", cert.pass);
  if (!cert.failure.empty()) out.set("failure", cert.failure);
  Json slope = Json::object();
  slope.set("slope", cert.slope_fit.slope);
  slope.set("intercept", cert.slope_fit.intercept);
  slope.set("r2", cert.slope_fit.r2);
  out.set("slope_fit", std::move(slope));
  out.set("ball_radius", cert.ball_radius);
  Json rows = Json::array();
  for (const auto& row : cert.rows) {
    Json r = Json::object();
    r.set("word", word_to_string(row.word));
    r.set("length", std::int64_t{row.length});
    r.set("regular", row.regular);
    r.set("margulis_norm", row.margulis_norm);
    r.set("defect", row.defect);
    r.set("pass", row.pass);
    if (!row.error.empty()) r.set("error", row.error);
    rows.push(std::move(r));
  }
  out.set("rows", std::move(rows));
  Json checks = Json::array();
  for (const auto& check : cert.displacement_checks) {
    Json c = Json::object();
    c.set("word", word_to_string(check.word));
    c.set("radius", check.radius);
    c.set("disjoint", check.disjoint);
    checks.push(std::move(c));
  }
  out.set("displacement_checks", std::move(checks));
  return out;
}

std::string certificate_to_csv(const Certificate& cert) {
  std::string out = "length,margulis_norm,defect\n";
  for (const auto& row : cert.rows) {
    out += std::to_string(row.length);
    out += ',';
    out += format_double(row.margulis_norm);
    out += ',';
    out += format_double(row.defect);
    out += '\n';
  }
  return out;
}

}  // namespace propaff
