#pragma once

#include <stdexcept>
#include <string>

namespace msk {

/// Base of all domain errors. `name()` is the stable identifier printed by
/// the CLI on stderr; `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& msg)
      : std::runtime_error(name + ": " + msg), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define MSK_DEFINE_ERROR(Name)                          \
  class Name : public Error {                           \
   public:                                              \
    explicit Name(const std::string& msg = "")          \
        : Error(#Name, msg) {}                          \
  };

// model
MSK_DEFINE_ERROR(AsymmetricMatrix)
MSK_DEFINE_ERROR(NegativeEntry)
MSK_DEFINE_ERROR(SingularMatrix)
MSK_DEFINE_ERROR(BadRatios)
MSK_DEFINE_ERROR(BadParams)
MSK_DEFINE_ERROR(DimensionMismatch)

// quadrature
MSK_DEFINE_ERROR(NonFiniteValue)
MSK_DEFINE_ERROR(NegativeVariance)

// rs_solver
MSK_DEFINE_ERROR(NoConvergence)
MSK_DEFINE_ERROR(InfeasibleIterate)
MSK_DEFINE_ERROR(SingularJacobian)
MSK_DEFINE_ERROR(NotIndefinite2x2)
MSK_DEFINE_ERROR(ZeroField)
MSK_DEFINE_ERROR(OnlyZeroFound)
MSK_DEFINE_ERROR(DimensionTooLarge)

// spectral_phase
MSK_DEFINE_ERROR(EigenFailure)
MSK_DEFINE_ERROR(ZeroSpectralRadius)
MSK_DEFINE_ERROR(NotPositiveDefinite)

// covariance
MSK_DEFINE_ERROR(NotStable)
MSK_DEFINE_ERROR(BackendDisagreement)
MSK_DEFINE_ERROR(StabilityViolated)

// parisi
MSK_DEFINE_ERROR(InvalidSequence)
MSK_DEFINE_ERROR(NegativeIncrement)
MSK_DEFINE_ERROR(StepTooSmall)

// simulator
MSK_DEFINE_ERROR(BadSize)
MSK_DEFINE_ERROR(TooLarge)
MSK_DEFINE_ERROR(LadderMisconfigured)

#undef MSK_DEFINE_ERROR

}  // namespace msk
