#pragma once

#include <stdexcept>
#include <string>

namespace bisimlab {

// All validation failures carry a stable code ("NonStochasticRow",
// "InfeasibleMarginals", ...) so callers/tests can match on it.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

}  // namespace bisimlab
