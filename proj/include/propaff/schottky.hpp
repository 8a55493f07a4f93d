#ifndef PROPAFF_SCHOTTKY_HPP
#define PROPAFF_SCHOTTKY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "propaff/ext_affine.hpp"
#include "propaff/json_io.hpp"
#include "propaff/linalg.hpp"

namespace propaff {

struct Letter {
  int index = 0;  // 0-based generator index
  int sign = 1;   // +1 or -1
  bool operator==(const Letter& o) const { return index == o.index && sign == o.sign; }
  Letter inverse() const { return {index, -sign}; }
};

struct Word {
  std::vector<Letter> letters;
  int length() const { return static_cast<int>(letters.size()); }
  bool empty() const { return letters.empty(); }
};

Word reduce(const Word& w);
bool is_reduced(const Word& w);
bool is_cyclically_reduced(const Word& w);

// (core, conjugator) with w = conjugator . core . conjugator^-1 and core
// cyclically reduced.
std::pair<Word, Word> cyclic_conjugate_to_reduced(const Word& w);

Word concat(const Word& a, const Word& b);
Word word_inverse(const Word& w);

// All cyclically reduced words of exactly the given length over k
// generators, ordered lexicographically ((index asc, '+' before '-')).
std::vector<Word> cyclically_reduced_words(int k, int length);
std::vector<Word> reduced_words(int k, int length);

// Compact display: 'a'..'z' for generators, 'A'..'Z' for inverses.
std::string word_to_string(const Word& w);
Word word_from_string(const std::string& s, int k);

ExtAffineMap evaluate_word(const LieModel& model, const std::vector<ExtAffineMap>& gens,
                           const Word& w);

// Splitting, canonizer, and Margulis invariant of a word over explicit
// generator maps, computed from the factors (orthogonal iteration for the
// dynamical subspaces, a closed boundary-value solve for the displacement)
// so that long products never lose the unit-modulus cluster.
struct WordReport {
  bool regular = false;
  DynamicalSplitting split;
  Canonizer canon;      // valid when regular
  MargulisInvariant m;  // valid when regular
};
WordReport analyze_word_over(const LieModel& model, const std::vector<ExtAffineMap>& gens,
                             const Word& w, double tol_gap = kDefaultTolGap);

// Built family of affine generators with its certification data.
struct GeneratorSet {
  LieModel model;
  std::vector<ExtAffineMap> gens;
  std::vector<Canonizer> canonizers;  // of the linear parts
  double C = 0.0;                     // max pair non-degeneracy bound
  double mu_hat = 0.0;                // empirical additivity constant
  VectorXd M0;                        // common Margulis invariant, z coordinates
  int N = 1;                          // power applied to the linear seeds
  std::uint64_t seed = 0;
  double s_target = 1e-3;
};

struct MuEstimate {
  double mu_hat = 0.0;
  std::vector<double> defects;
  std::vector<std::int64_t> histogram;  // 10 uniform bins over [0, mu_hat]
  int excluded = 0;                     // products that failed R-regularity
  std::vector<std::string> warnings;
};

// Max additivity defect ||M(gh) - M(g) - M(h)|| over sampled pairs of
// cyclically reduced words whose concatenation is cyclically reduced. All
// admissible letter pairs are always included; the remaining budget samples
// longer words. Deterministic in the seed.
MuEstimate estimate_mu(const LieModel& model, const std::vector<ExtAffineMap>& gens,
                       int max_len, int n_pairs, std::uint64_t seed);

struct BuildOptions {
  int mu_max_len = 2;
  int mu_pairs = 48;
  int resample_budget = 40;
  int power_rounds = 12;
  double transversality_margin = 0.03;
};

// Random strongly contracting R-regular linear seeds, powered until
// s <= s_target, equipped with translations tau_{phi_i^-1(M0)} so every
// generator has Margulis invariant M0 with ||M0|| = 2 mu_hat.
GeneratorSet build_generators(const LieModel& model, int k, std::uint64_t seed,
                              double s_target, const BuildOptions& opts = {});

struct HypothesisReport {
  struct PerGenerator {
    bool regular = false;
    double s_forward = 0.0, s_inverse = 0.0;
    double m0_deviation = 0.0;
  };
  std::vector<PerGenerator> generators;
  bool regular_ok = false;        // every generator R-regular
  bool pairs_ok = false;          // every admissible pair canonizable
  double pair_bound = 0.0;        // achieved max C over admissible pairs
  std::string pair_failure;       // offending pair when !pairs_ok
  bool contraction_ok = false;    // all s values at or below s_target
  double max_s = 0.0;
  bool invariant_ok = false;      // ||M(g_i) - M0|| <= 1e-6 for every i
  double max_m0_deviation = 0.0;
  bool all_ok = false;
};

HypothesisReport verify_hypotheses(const GeneratorSet& gens);

struct CertificateRow {
  Word word;
  int length = 0;
  bool regular = false;
  double margulis_norm = 0.0;
  double defect = 0.0;  // ||M(w) - sum of letter invariants||
  bool pass = false;
  std::string error;
};

struct DisplacementCheck {
  Word word;
  double radius = 0.0;
  bool disjoint = false;  // false = inconclusive, never "intersects"
};

struct Certificate {
  int L = 0;
  double mu_hat = 0.0;
  double tol = 1e-6;
  std::vector<CertificateRow> rows;
  LineFit slope_fit;  // ||M|| against word length
  bool pass = false;
  std::string failure;
  double ball_radius = 0.0;
  std::vector<DisplacementCheck> displacement_checks;
};

struct CertifyOptions {
  double tol = 1e-6;
  bool parallel = true;
  double ball_radius = 1.0;
};

// Enumerates every cyclically reduced word of length 1..L (no symmetry
// quotient), asserts R-regularity, computes the invariant and its additivity
// defect, and checks ||M(w)|| >= l * mu_hat - tol per row. Row evaluation is
// embarrassingly parallel; assembly is a deterministic ordered reduction.
Certificate certify_growth(const GeneratorSet& gens, int L, const CertifyOptions& opts = {});

// Per-word kernel shared by the parallel path and the serial reference.
CertificateRow certify_row(const GeneratorSet& gens,
                           const std::vector<VectorXd>& letter_invariants, const Word& w,
                           double tol);

// Sufficient-disjointness test: true when ||M(w)|| exceeds
// 2 C(w) (2 radius + max generator displacement of the origin).
bool check_displacement(const GeneratorSet& gens, const Word& w, double radius);

Json generator_set_to_json(const GeneratorSet& gens);
GeneratorSet generator_set_from_json(const Json& j);
Json certificate_to_json(const Certificate& cert);
std::string certificate_to_csv(const Certificate& cert);

}  // namespace propaff

#endif
