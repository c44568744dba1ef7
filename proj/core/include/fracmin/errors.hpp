#pragma once

#include <stdexcept>
#include <string>

namespace fracmin {

// Base for all failures raised by the library. The CLI maps ConfigInvalid to
// exit code 2 and every NumericalError to exit code 3, so new error types
// should derive from one of those two. code() is a stable machine-readable
// tag embedded in diagnostic output.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ConfigInvalid : public Error {
 public:
  explicit ConfigInvalid(const std::string& what)
      : Error("ConfigInvalid", what) {}
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

#define FRACMIN_DEFINE_NUMERICAL_ERROR(NAME)          \
  class NAME : public NumericalError {                \
   public:                                            \
    explicit NAME(const std::string& what)            \
        : NumericalError(#NAME, what) {}              \
  }

FRACMIN_DEFINE_NUMERICAL_ERROR(InvalidParams);
FRACMIN_DEFINE_NUMERICAL_ERROR(NonIntegrableSingularity);
FRACMIN_DEFINE_NUMERICAL_ERROR(BadDomain);
FRACMIN_DEFINE_NUMERICAL_ERROR(EmptyRange);
FRACMIN_DEFINE_NUMERICAL_ERROR(OrderingViolated);
FRACMIN_DEFINE_NUMERICAL_ERROR(GridMismatch);
FRACMIN_DEFINE_NUMERICAL_ERROR(SupportViolation);
FRACMIN_DEFINE_NUMERICAL_ERROR(DimensionTooLarge);
FRACMIN_DEFINE_NUMERICAL_ERROR(DegenerateFit);
FRACMIN_DEFINE_NUMERICAL_ERROR(NewtonDiverged);
FRACMIN_DEFINE_NUMERICAL_ERROR(OrderingCollapse);
FRACMIN_DEFINE_NUMERICAL_ERROR(BlowdownToZero);
FRACMIN_DEFINE_NUMERICAL_ERROR(DegenerateDenominator);
FRACMIN_DEFINE_NUMERICAL_ERROR(QuadratureFailure);
FRACMIN_DEFINE_NUMERICAL_ERROR(ExtensionRuleMissing);
FRACMIN_DEFINE_NUMERICAL_ERROR(RoughBoundary);
FRACMIN_DEFINE_NUMERICAL_ERROR(NoSignChange);
FRACMIN_DEFINE_NUMERICAL_ERROR(NonPositiveGap);

#undef FRACMIN_DEFINE_NUMERICAL_ERROR

}  // namespace fracmin
