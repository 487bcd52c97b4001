#pragma once

#include <stdexcept>

namespace attachnlp {

// Anything the caller can fix: bad files, bad flags, data violating an
// invariant. The CLI maps these to exit code 1.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failures at run time that are not the caller's fault (backend errors,
// I/O trouble mid-run). The CLI maps these to exit code 2.
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MalformedRecord final : ValidationError {
  using ValidationError::ValidationError;
};
struct UnknownSpeaker final : ValidationError {
  using ValidationError::ValidationError;
};
struct MissingLabel final : ValidationError {
  using ValidationError::ValidationError;
};
struct DuplicateDocId final : ValidationError {
  using ValidationError::ValidationError;
};
struct NonMonotonicBins final : ValidationError {
  using ValidationError::ValidationError;
};
struct UnlabeledDocument final : ValidationError {
  using ValidationError::ValidationError;
};
struct TestCountTooLarge final : ValidationError {
  using ValidationError::ValidationError;
};
struct EvalSetEmpty final : ValidationError {
  using ValidationError::ValidationError;
};
struct MissingClassInTrain final : ValidationError {
  using ValidationError::ValidationError;
};
struct InstanceSetMismatch final : ValidationError {
  using ValidationError::ValidationError;
};
struct LengthMismatch final : ValidationError {
  using ValidationError::ValidationError;
};
struct EmptyInput final : ValidationError {
  using ValidationError::ValidationError;
};
struct EmptyMatrix final : ValidationError {
  using ValidationError::ValidationError;
};
struct EmptyRuns final : ValidationError {
  using ValidationError::ValidationError;
};
struct InvalidConfig final : ValidationError {
  using ValidationError::ValidationError;
};
struct BackendFailure final : RuntimeFailure {
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace attachnlp
