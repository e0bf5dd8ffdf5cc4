#pragma once

#include <stdexcept>
#include <string>

namespace degwave {

/// Base for every error raised by the library. Diagnostic outcomes that
/// still produce a result (energy drift, CG non-convergence, coercivity
/// warnings) are reported through status fields instead.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonDegenerate : public Error { using Error::Error; };
class NotPositive : public Error { using Error::Error; };
class NonIntegrableDrift : public Error { using Error::Error; };
class GridMismatch : public Error { using Error::Error; };
class NegativeSquare : public Error { using Error::Error; };
class EigensolveFailure : public Error { using Error::Error; };
class ClassRequired : public Error { using Error::Error; };
class SolverFailure : public Error { using Error::Error; };
class HypothesisViolated : public Error { using Error::Error; };
class TimeTooShort : public Error { using Error::Error; };
class BudgetZero : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

}  // namespace degwave
