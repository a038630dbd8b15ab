#include "cctree/error.hpp"

namespace cctree {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Domain: return "domain";
    case ErrorCode::Boundary: return "boundary";
    case ErrorCode::InsufficientData: return "insufficient_data";
    case ErrorCode::Fit: return "fit";
    case ErrorCode::Regression: return "regression";
    case ErrorCode::Config: return "config";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::Input: return "input";
    case ErrorCode::Scenario: return "scenario";
    case ErrorCode::Ingestion: return "ingestion";
    case ErrorCode::NoData: return "no_data";
  }
  return "unknown";
}

}  // namespace cctree
