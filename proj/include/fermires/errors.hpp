#pragma once

#include <stdexcept>
#include <string>

namespace fermires {

// Base class for every error the library throws on its own behalf.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Graph solve: the free coordinates do not lie over the level surface.
struct OutOfRange final : Error {
  using Error::Error;
};

// Graph solve: the solved cosine sits at +-1, so the chart is invalid.
struct DegenerateBranch final : Error {
  using Error::Error;
};

// Normal/curvature requested where the gradient of the symbol vanishes.
struct AtCriticalPoint final : Error {
  using Error::Error;
};

// Chart evaluation requested outside the patch validity radius.
struct OutsidePatch final : Error {
  using Error::Error;
};

// Eigen-rotation undefined: the Hessian eigenvalues coincide.
struct EigenvalueCollision final : Error {
  using Error::Error;
};

// Newton polyhedron of a model with no monomials of degree >= 2.
struct EmptySupport final : Error {
  using Error::Error;
};

// A documented numerical precondition failed at run time.
struct PreconditionViolated final : Error {
  using Error::Error;
};

// Resolvent kernel requested for z on the spectrum [0, 12].
struct OnSpectrum final : Error {
  using Error::Error;
};

// Grid doubling (or another cap-limited refinement) hit its cap.
struct NoConvergence final : Error {
  using Error::Error;
};

// A Taylor model matches none of the known normal-form cases; reported
// rather than guessed.
struct UnclassifiedPoint final : Error {
  using Error::Error;
};

} // namespace fermires
