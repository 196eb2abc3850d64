#pragma once

#include <stdexcept>
#include <string>

namespace certctl {

enum class ErrorKind {
  argument,
  resource,
  contract,
  domain_exit,
  config,
  internal,
};

// Every library failure is reported through one of these. The kind maps
// one-to-one onto the C API error codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& w) : Error(ErrorKind::argument, w) {}
};

// A mesh or enumeration would exceed its configured budget.
struct ResourceError : Error {
  explicit ResourceError(const std::string& w) : Error(ErrorKind::resource, w) {}
};

// Caller-supplied data violates a stated precondition (missing modulus,
// inconsistent generator, improper block sequence).
struct ContractError : Error {
  explicit ContractError(const std::string& w) : Error(ErrorKind::contract, w) {}
};

struct DomainExitError : Error {
  DomainExitError(const std::string& w, double t)
      : Error(ErrorKind::domain_exit, w), exit_time(t) {}
  double exit_time;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};

struct InternalError : Error {
  explicit InternalError(const std::string& w) : Error(ErrorKind::internal, w) {}
};

}  // namespace certctl
