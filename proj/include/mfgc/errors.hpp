#pragma once

#include <stdexcept>
#include <string>

namespace mfg {

enum class ErrorCode {
  invalid_input,
  feasibility,  ///< mass exceeds the capacity of the integration region
  stalled,      ///< dual iteration cap hit before tolerance
  line_search_failure,
  io,
};

const char *to_string(ErrorCode code);

class SolverError : public std::runtime_error {
 public:
  SolverError(ErrorCode code, const std::string &what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mfg
