#pragma once

#include <stdexcept>
#include <string>

namespace tenm {

// Base for every failure raised by the library. exit_code() is what the CLI returns.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 3; }
};

class ConfigError : public Error {
public:
  ConfigError(std::string key, const std::string& what)
    : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }
  int exit_code() const override { return 2; }

private:
  std::string key_;
};

class DomainError : public Error { using Error::Error; };
class UnsupportedOperation : public Error { using Error::Error; };

class InfeasibleDelta : public Error {
public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class BracketFailure : public Error { using Error::Error; };
class DivergenceError : public Error { using Error::Error; };
class ClosureFailure : public Error { using Error::Error; };
class RegimeError : public Error { using Error::Error; };
class IntegratorFault : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };

} // namespace tenm
