#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cctree {

enum class ErrorCode {
  Domain,            // parameter outside the admissible domain
  Boundary,          // pseudo-observation on the boundary of the unit square
  InsufficientData,  // too few rows for the requested operation
  Fit,               // likelihood could not be maximized
  Regression,        // rank-deficient design in a linear margin model
  Config,            // invalid option or option combination
  Schema,            // input table does not match the expected layout
  Input,             // covariate vector does not conform to a tree schema
  Scenario,          // simulation scenario incompatible with the family
  Ingestion,         // malformed surveillance record
  NoData,            // nothing left after filtering
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cctree
