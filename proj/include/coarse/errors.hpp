#pragma once

#include <stdexcept>
#include <string>

namespace coarse {

/// Malformed descriptor, file, grid or option.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

/// An operation's documented precondition did not hold at run time.
struct PreconditionError : std::runtime_error {
  explicit PreconditionError(const std::string& m) : std::runtime_error(m) {}
};

/// A point fed to a map lies outside its declared source subspace.
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& m) : std::runtime_error(m) {}
};

/// Broken internal invariant (dangling handle, impossible state).
struct InternalError : std::logic_error {
  explicit InternalError(const std::string& m) : std::logic_error(m) {}
};

}  // namespace coarse
