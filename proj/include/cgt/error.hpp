#pragma once

#include <stdexcept>
#include <string>

namespace cgt {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  argument,     // bad caller input or configuration
  format,       // malformed file (bad magic, bad version, bad JSON)
  corrupt,      // structurally valid file with inconsistent contents
  integrity,    // dataset / journal / pairing inconsistencies
  io,           // filesystem failures
  numeric,      // non-finite values
  training,     // divergence during optimization
  orchestration // missing pipeline artifacts
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define CGT_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(Kind, what) {}     \
  };

CGT_DEFINE_ERROR(ArgumentError, ErrorKind::argument)
CGT_DEFINE_ERROR(FormatError, ErrorKind::format)
CGT_DEFINE_ERROR(CorruptModelError, ErrorKind::corrupt)
CGT_DEFINE_ERROR(IntegrityError, ErrorKind::integrity)
CGT_DEFINE_ERROR(IoError, ErrorKind::io)
CGT_DEFINE_ERROR(NumericError, ErrorKind::numeric)
CGT_DEFINE_ERROR(TrainingError, ErrorKind::training)
CGT_DEFINE_ERROR(OrchestrationError, ErrorKind::orchestration)

#undef CGT_DEFINE_ERROR

/// Missing adversarial counterpart for a clean image.
class IncompletePairingError : public IntegrityError {
 public:
  using IntegrityError::IntegrityError;
};

/// Input tensor does not match what the model expects.
class InputError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Exit code convention: 0 success, 2 argument, 3 data integrity, 4 numeric/training.
int exit_code(ErrorKind kind) noexcept;

}  // namespace cgt
