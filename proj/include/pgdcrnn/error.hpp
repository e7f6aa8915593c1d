#pragma once

#include <stdexcept>
#include <string>

namespace pgdcrnn {

/// Broad failure class; the CLI maps each to a distinct exit code.
enum class ErrorKind {
  kConfig,     // bad parameters or arguments
  kData,       // malformed or inconsistent input data
  kNumerical,  // divergence, degenerate statistics
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_config(const std::string &what);
[[noreturn]] void throw_data(const std::string &what);
[[noreturn]] void throw_numerical(const std::string &what);

}  // namespace pgdcrnn
