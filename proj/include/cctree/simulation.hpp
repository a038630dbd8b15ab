#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cctree/copula.hpp"
#include "cctree/dataset.hpp"
#include "cctree/pruning.hpp"
#include "cctree/tree.hpp"

namespace cctree {

enum class TauSurface { Step, SteepSigmoid, GentleSigmoid };

std::string_view surface_name(TauSurface surface);
TauSurface parse_surface(std::string_view name);

/// Kendall tau as a function of (x1, x2) in the unit square. The sigmoids are
/// 0.3 - 0.2 / (1 + exp(-s (x1 - 0.4))) - 0.4 / (1 + exp(-s (x2 - 0.75)))
/// with s = 40 (steep) or s = 15 (gentle); they dip below zero near (1, 1).
double tau_surface(TauSurface surface, double x1, double x2);

struct ScenarioSpec {
  CopulaSpec copula;
  TauSurface surface = TauSurface::Step;
  Index n = 1000;
  std::uint64_t seed = 0;
};

/// Lower and upper clamp applied to the surface for families with tau > 0.
inline constexpr double kSimTauFloor = 0.01;
inline constexpr double kSimTauCeil = 0.9;

struct SimulatedDataset {
  Eigen::MatrixX2d x;
  Eigen::VectorXd tau_true;
  Eigen::VectorXd theta_true;
  Eigen::MatrixX2d u;
  Eigen::MatrixX2d y;
  Index clamped = 0;  // rows whose surface value was clamped into the family's range

  /// Responses y with numeric covariates x1, x2.
  Dataset dataset() const;
};

/// X ~ U(0,1)^2, U ~ C_theta(X), Y(j) = Phi^{-1}(U(j)) + mu(j)(X) with
/// mu(1) = 1 + 0.2 x1 + 0.05 x2 and mu(2) = 1 - 0.1 x1 + 0.2 x2.
SimulatedDataset generate(const ScenarioSpec& spec);

enum class PseudoSource { U, V, W };  // true margins, parametric normal, kernel
enum class ModelKind { Conditional, Benchmark };

std::string_view source_name(PseudoSource source);
std::string_view model_name(ModelKind model);

struct ModelMetrics {
  double mse_tau = 0.0;
  double mse_copula = 0.0;  // copula CDFs compared at the true U
  double loglik = 0.0;      // on the pseudo-observations the model was fitted to
  int n_splits = 0;
};

/// Metrics of per-row parameter estimates theta_hat against the truth.
ModelMetrics evaluate(const CopulaSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& theta_hat,
                      const SimulatedDataset& sim, const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                      int n_splits);

ModelMetrics evaluate(const CopulaTree& model, const SimulatedDataset& sim,
                      const Eigen::Ref<const Eigen::MatrixX2d>& pseudo);

struct PipelineConfig {
  StoppingConfig stopping;
  CvConfig cv{3, 2, 0, SelectionRule::MaxMean};
  std::vector<PseudoSource> sources{PseudoSource::U, PseudoSource::V, PseudoSource::W};
  std::optional<double> bandwidth;  // default 0.4, or 0.3 for Gumbel
};

struct ReplicationRecord {
  TauSurface surface = TauSurface::Step;
  Family family = Family::Clayton;
  PseudoSource source = PseudoSource::U;
  ModelKind model = ModelKind::Conditional;
  int rep = 0;
  ModelMetrics metrics;
};

/// Pseudo-observations of one source for a simulated dataset.
Eigen::MatrixX2d pseudo_for(const SimulatedDataset& sim, PseudoSource source, Family family,
                            std::optional<double> bandwidth = std::nullopt);

/// One dataset, every configured source, conditional and benchmark fits.
/// The CV seed is derived from the scenario seed.
std::vector<ReplicationRecord> run_replication(const ScenarioSpec& spec,
                                               const PipelineConfig& config, int rep);

struct StudyConfig {
  std::vector<Family> families{Family::Clayton, Family::Frank, Family::Gumbel};
  std::vector<TauSurface> surfaces{TauSurface::Step, TauSurface::SteepSigmoid,
                                   TauSurface::GentleSigmoid};
  int replications = 50;
  Index n = 1000;
  std::uint64_t seed = 0;
  PipelineConfig pipeline;

  static StudyConfig desk();   // 50 x 1000
  static StudyConfig paper();  // 500 x 1000
};

struct StudyResult {
  std::vector<ReplicationRecord> records;  // ordered by family, surface, rep, source, model
  Index clamped_rows = 0;
};

/// Seed of replication `rep` of a (family, surface) cell.
std::uint64_t replication_seed(std::uint64_t base, Family family, TauSurface surface, int rep);

StudyResult run_study(const StudyConfig& config);

}  // namespace cctree
