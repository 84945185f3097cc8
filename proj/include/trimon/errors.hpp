#pragma once

#include <stdexcept>
#include <string>

namespace trimon {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define TRIMON_ERROR_TYPE(Name)                              \
  struct Name : Error {                                      \
    explicit Name(const std::string& what)                   \
        : Error(std::string(#Name) + ": " + what) {}         \
  }

TRIMON_ERROR_TYPE(NonPositiveDefinite);
TRIMON_ERROR_TYPE(ZeroDetuning);
TRIMON_ERROR_TYPE(UnknownTransition);
TRIMON_ERROR_TYPE(InconsistentLedger);
TRIMON_ERROR_TYPE(FrequencyCollision);
TRIMON_ERROR_TYPE(NegativeDephasing);
TRIMON_ERROR_TYPE(StepTooCoarse);
TRIMON_ERROR_TYPE(SingularConfusion);
TRIMON_ERROR_TYPE(InsufficientShots);
TRIMON_ERROR_TYPE(NoConvergence);
TRIMON_ERROR_TYPE(FitFailure);
TRIMON_ERROR_TYPE(InvalidOrdering);
TRIMON_ERROR_TYPE(UnsupportedTerm);
TRIMON_ERROR_TYPE(OptimizerStall);
TRIMON_ERROR_TYPE(InconsistentGrid);
TRIMON_ERROR_TYPE(NonPSDInput);
TRIMON_ERROR_TYPE(ValidationError);

#undef TRIMON_ERROR_TYPE

}  // namespace trimon
