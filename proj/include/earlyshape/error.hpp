#pragma once

#include <stdexcept>
#include <string>

namespace earlyshape {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;

  /// Rethrows the same error type with `context: ` prepended to the message.
  [[noreturn]] virtual void rethrow_with_context(const std::string& context) const {
    throw Error(context + ": " + what());
  }
};

template <class Derived>
struct ErrorOf : Error {
  using Error::Error;
  [[noreturn]] void rethrow_with_context(const std::string& context) const override {
    throw Derived(context + ": " + what());
  }
};

// Configuration and input validation problems. The CLI maps these to exit 1.
struct ShapeError : ErrorOf<ShapeError> { using ErrorOf::ErrorOf; };
struct NumericError : ErrorOf<NumericError> { using ErrorOf::ErrorOf; };
struct RangeError : ErrorOf<RangeError> { using ErrorOf::ErrorOf; };
struct BoundsError : ErrorOf<BoundsError> { using ErrorOf::ErrorOf; };
struct FormatError : ErrorOf<FormatError> { using ErrorOf::ErrorOf; };
struct ParseError : ErrorOf<ParseError> { using ErrorOf::ErrorOf; };
struct ValidationError : ErrorOf<ValidationError> { using ErrorOf::ErrorOf; };
struct ConfigError : ErrorOf<ConfigError> { using ErrorOf::ErrorOf; };
struct StratificationError : ErrorOf<StratificationError> { using ErrorOf::ErrorOf; };
struct EvaluationError : ErrorOf<EvaluationError> { using ErrorOf::ErrorOf; };

/// Filesystem failures. The CLI maps these to exit 2.
struct IoError : ErrorOf<IoError> { using ErrorOf::ErrorOf; };

}  // namespace earlyshape
