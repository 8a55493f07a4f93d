#ifndef PROPAFF_ERRORS_HPP
#define PROPAFF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace propaff {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Model construction failed (unsupported family/n, invariant violation).
struct ConstructionError : Error {
  using Error::Error;
};

// A precondition on the mathematical domain was violated (map not in the
// group, vector outside the required subspace, non-regular input, ...).
struct DomainError : Error {
  using Error::Error;
};

// Eigenvalue moduli too close to a cluster boundary to separate the
// dynamical subspaces reliably.
struct SplittingError : Error {
  using Error::Error;
};

// A pair of extended affine spaces is numerically non-transverse, so no
// canonizing map exists.
struct DegeneratePairError : Error {
  using Error::Error;
};

// Two independent computations of the same invariant disagreed beyond
// tolerance.
struct InstabilityError : Error {
  using Error::Error;
};

// Random search exhausted its rejection budget.
struct SamplingError : Error {
  using Error::Error;
};

// Generator construction or hypothesis verification failed.
struct VerificationError : Error {
  using Error::Error;
};

// A sampled mathematical property check failed (test harness signal).
struct PropertyViolation : Error {
  using Error::Error;
};

}  // namespace propaff

#endif
