#pragma once

#include <stdexcept>
#include <string>

namespace nucleval {

// Categories double as CLI exit codes.
enum class ErrorKind : int {
  kUsage = 1,
  kData = 2,
  kEndpoint = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::kUsage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class EndpointError : public Error {
 public:
  explicit EndpointError(const std::string& what)
      : Error(ErrorKind::kEndpoint, what) {}
};

}  // namespace nucleval
