#pragma once

#include <stdexcept>
#include <string>

namespace lfsel {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define LFSEL_ERROR(Name)                       \
  struct Name : error {                         \
    explicit Name(const std::string& what)      \
        : error(std::string(#Name ": ") + what) {} \
  }

LFSEL_ERROR(ClampedMaximizer);
LFSEL_ERROR(NonconvexSample);
LFSEL_ERROR(RangeError);
LFSEL_ERROR(CflViolation);
LFSEL_ERROR(NoConvergence);
LFSEL_ERROR(InvalidPath);
LFSEL_ERROR(DualityMismatch);
LFSEL_ERROR(BoundViolation);
LFSEL_ERROR(NewtonDiverged);
LFSEL_ERROR(NotHyperbolic);
LFSEL_ERROR(RiccatiBlowup);
LFSEL_ERROR(NotPeriodic);
LFSEL_ERROR(ManifoldEscape);
LFSEL_ERROR(NotStabilized);
LFSEL_ERROR(InvalidChoice);
LFSEL_ERROR(NoSeparatrix);
LFSEL_ERROR(SchemaError);

#undef LFSEL_ERROR

}  // namespace lfsel
