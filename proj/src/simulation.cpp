#include "cctree/simulation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "cctree/error.hpp"
#include "cctree/margins.hpp"
#include "cctree/random.hpp"
#include "cctree/special.hpp"

namespace cctree {

std::string_view surface_name(TauSurface surface) {
  switch (surface) {
    case TauSurface::Step: return "step";
    case TauSurface::SteepSigmoid: return "steep-sigmoid";
    case TauSurface::GentleSigmoid: return "gentle-sigmoid";
  }
  return "unknown";
}

TauSurface parse_surface(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(c == '_' ? '-' : std::tolower(c)); });
  if (lower == "step") return TauSurface::Step;
  if (lower == "steep-sigmoid" || lower == "steep") return TauSurface::SteepSigmoid;
  if (lower == "gentle-sigmoid" || lower == "gentle") return TauSurface::GentleSigmoid;
  throw Error(ErrorCode::Config, "unknown tau surface '" + std::string(name) + "'");
}

double tau_surface(TauSurface surface, double x1, double x2) {
  if (surface == TauSurface::Step) {
    if (x2 < 0.75) return x1 < 0.4 ? 0.3 : 0.5;
    return x1 < 0.4 ? 0.7 : 0.9;
  }
  const double s = surface == TauSurface::SteepSigmoid ? 40.0 : 15.0;
  return 0.3 - 0.2 / (1.0 + std::exp(-s * (x1 - 0.4))) - 0.4 / (1.0 + std::exp(-s * (x2 - 0.75)));
}

Dataset SimulatedDataset::dataset() const {
  Dataset d;
  d.responses = y;
  d.covariates.push_back(Covariate::numeric("x1", x.col(0)));
  d.covariates.push_back(Covariate::numeric("x2", x.col(1)));
  return d;
}

SimulatedDataset generate(const ScenarioSpec& spec) {
  if (spec.n < 1) throw Error(ErrorCode::Scenario, "scenario needs at least one row");
  const bool positive_only = spec.copula.family != Family::Frank;
  Rng rng(spec.seed);
  SimulatedDataset sim;
  sim.x.resize(spec.n, 2);
  sim.tau_true.resize(spec.n);
  sim.theta_true.resize(spec.n);
  sim.u.resize(spec.n, 2);
  sim.y.resize(spec.n, 2);
  for (Index i = 0; i < spec.n; ++i) {
    const double x1 = rng.uniform();
    const double x2 = rng.uniform();
    double tau = tau_surface(spec.surface, x1, x2);
    if (positive_only && (tau < kSimTauFloor || tau > kSimTauCeil)) {
      tau = std::clamp(tau, kSimTauFloor, kSimTauCeil);
      ++sim.clamped;
    }
    const double theta = tau_to_theta(spec.copula, tau);
    const UnitPair p = sample_pair(spec.copula, theta, rng);
    sim.x.row(i) << x1, x2;
    sim.tau_true[i] = tau;
    sim.theta_true[i] = theta;
    sim.u.row(i) << p.u, p.v;
    sim.y(i, 0) = normal_quantile(p.u) + 1.0 + 0.2 * x1 + 0.05 * x2;
    sim.y(i, 1) = normal_quantile(p.v) + 1.0 - 0.1 * x1 + 0.2 * x2;
  }
  return sim;
}

std::string_view source_name(PseudoSource source) {
  switch (source) {
    case PseudoSource::U: return "U";
    case PseudoSource::V: return "V";
    case PseudoSource::W: return "W";
  }
  return "?";
}

std::string_view model_name(ModelKind model) {
  return model == ModelKind::Conditional ? "conditional" : "benchmark";
}

ModelMetrics evaluate(const CopulaSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& theta_hat,
                      const SimulatedDataset& sim, const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                      int n_splits) {
  const Index n = sim.tau_true.size();
  if (theta_hat.size() != n || pseudo.rows() != n) {
    throw Error(ErrorCode::Input, "estimates do not match the simulated dataset");
  }
  ModelMetrics m;
  m.n_splits = n_splits;
  for (Index i = 0; i < n; ++i) {
    const double dt = theta_to_tau(spec, theta_hat[i]) - sim.tau_true[i];
    const UnitPair p{sim.u(i, 0), sim.u(i, 1)};
    const double dc = cdf(spec, theta_hat[i], p) - cdf(spec, sim.theta_true[i], p);
    m.mse_tau += dt * dt;
    m.mse_copula += dc * dc;
    m.loglik += LogDensity(spec, theta_hat[i])(pseudo(i, 0), pseudo(i, 1));
  }
  m.mse_tau /= static_cast<double>(n);
  m.mse_copula /= static_cast<double>(n);
  return m;
}

ModelMetrics evaluate(const CopulaTree& model, const SimulatedDataset& sim,
                      const Eigen::Ref<const Eigen::MatrixX2d>& pseudo) {
  const Index n = sim.x.rows();
  Eigen::VectorXd theta(n);
  for (Index i = 0; i < n; ++i) theta[i] = predict(model, sim.x.row(i).transpose()).theta;
  ModelMetrics m = evaluate(model.spec(), theta, sim, pseudo, model.n_leaves() - 1);
  m.loglik = tree_loglik(model, pseudo, sim.dataset());
  return m;
}

Eigen::MatrixX2d pseudo_for(const SimulatedDataset& sim, PseudoSource source, Family family,
                            std::optional<double> bandwidth) {
  if (source == PseudoSource::U) return sim.u;
  const Dataset data = sim.dataset();
  if (source == PseudoSource::V) {
    const Index design[] = {0, 1};
    return pseudo_parametric_normal(data, design).values;
  }
  const double h = bandwidth.value_or(family == Family::Gumbel ? 0.3 : 0.4);
  return pseudo_kernel(data, h).values;
}

std::vector<ReplicationRecord> run_replication(const ScenarioSpec& spec,
                                               const PipelineConfig& config, int rep) {
  const SimulatedDataset sim = generate(spec);
  const Dataset data = sim.dataset();
  CvConfig cv = config.cv;
  cv.seed = derive_seed(spec.seed, 0x6376ULL);

  std::vector<ReplicationRecord> out;
  for (PseudoSource source : config.sources) {
    const Eigen::MatrixX2d pseudo = pseudo_for(sim, source, spec.copula.family, config.bandwidth);
    const ConditionalFit fit = fit_conditional(spec.copula, pseudo, data, config.stopping, cv);

    ReplicationRecord rec;
    rec.surface = spec.surface;
    rec.family = spec.copula.family;
    rec.source = source;
    rec.rep = rep;
    rec.model = ModelKind::Conditional;
    rec.metrics = evaluate(fit.selected, sim, pseudo);
    out.push_back(rec);

    const TreeNode& root = fit.maximal.root();
    rec.model = ModelKind::Benchmark;
    rec.metrics = evaluate(spec.copula, Eigen::VectorXd::Constant(sim.x.rows(), root.theta), sim,
                           pseudo, 0);
    rec.metrics.loglik = root.loglik;
    out.push_back(rec);
  }
  return out;
}

StudyConfig StudyConfig::desk() { return StudyConfig{}; }

StudyConfig StudyConfig::paper() {
  StudyConfig c;
  c.replications = 500;
  return c;
}

std::uint64_t replication_seed(std::uint64_t base, Family family, TauSurface surface, int rep) {
  const auto cell = static_cast<std::uint64_t>(family) * 16 + static_cast<std::uint64_t>(surface);
  return derive_seed(derive_seed(base, cell), static_cast<std::uint64_t>(rep));
}

StudyResult run_study(const StudyConfig& config) {
  if (config.replications < 1) throw Error(ErrorCode::Config, "need at least one replication");
  StudyResult result;
  for (Family family : config.families) {
    for (TauSurface surface : config.surfaces) {
      for (int rep = 0; rep < config.replications; ++rep) {
        ScenarioSpec spec{CopulaSpec{family}, surface, config.n,
                          replication_seed(config.seed, family, surface, rep)};
        auto records = run_replication(spec, config.pipeline, rep);
        result.records.insert(result.records.end(), records.begin(), records.end());
        if (!records.empty()) result.clamped_rows += generate(spec).clamped;
      }
    }
  }
  return result;
}

}  // namespace cctree
