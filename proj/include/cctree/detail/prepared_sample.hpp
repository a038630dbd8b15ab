#pragma once

#include <Eigen/Core>

#include "cctree/copula.hpp"

namespace cctree::detail {

// Pseudo-observations with the family-specific per-point transforms cached,
// so the likelihood can be evaluated at many parameters cheaply.
class PreparedSample {
 public:
  PreparedSample(const CopulaSpec& spec, const Eigen::Ref<const Eigen::MatrixX2d>& data);

  Index rows() const { return cols_.rows(); }

  double loglik(double theta) const;

  // Writes log c_theta at every point into out (length rows()).
  void log_densities(double theta, Eigen::Ref<Eigen::VectorXd> out) const;

 private:
  CopulaSpec spec_;
  Eigen::Matrix<double, Eigen::Dynamic, 4> cols_;
};

}  // namespace cctree::detail
