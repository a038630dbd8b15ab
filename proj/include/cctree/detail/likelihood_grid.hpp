#pragma once

#include <vector>

#include <Eigen/Core>

#include "cctree/copula.hpp"

namespace cctree::detail {

// Log-densities of every row at a fixed grid of Kendall-tau values spanning
// fit_tau_range(). Summing the rows of a subset gives its exact
// log-likelihood profile on the grid, which the split search uses to screen
// candidates before refining the best ones.
class LikelihoodGrid {
 public:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  LikelihoodGrid(const CopulaSpec& spec, const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                 double spacing = 0.0025);

  Index rows() const { return values_.rows(); }
  Index points() const { return static_cast<Index>(tau_.size()); }
  double tau(Index g) const { return tau_[static_cast<std::size_t>(g)]; }
  auto row(Index i) const { return values_.row(i); }

 private:
  std::vector<double> tau_;
  RowMatrix values_;
};

// Maximum of a gridded profile: the argmax and a parabolic estimate of the
// peak value through its neighbours.
struct ProfilePeak {
  Index index = 0;
  double value = 0.0;
};

ProfilePeak profile_peak(const Eigen::Ref<const Eigen::RowVectorXd>& profile);

}  // namespace cctree::detail
