#pragma once

#include <stdexcept>
#include <string>

namespace cqed {

// Exit codes of the command-line tool map one-to-one onto these categories.
enum class ErrorKind { invalid_argument, config, solver, io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::invalid_argument, what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct SolverError : Error {
  explicit SolverError(const std::string& what) : Error(ErrorKind::solver, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

// Rethrows e as the same category with "context: " prepended.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string msg = context + ": " + e.what();
  switch (e.kind()) {
    case ErrorKind::invalid_argument: throw InvalidArgument(msg);
    case ErrorKind::config: throw ConfigError(msg);
    case ErrorKind::solver: throw SolverError(msg);
    case ErrorKind::io: throw IoError(msg);
  }
  throw Error(e.kind(), msg);
}

}  // namespace cqed
