#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "cctree/error.hpp"
#include "cctree/io.hpp"
#include "cctree/margins.hpp"
#include "cctree/simulation.hpp"
#include "cctree/special.hpp"
#include "cctree/stats.hpp"

using namespace cctree;
using Catch::Matchers::WithinAbs;

TEST_CASE("tau surfaces") {
  CHECK(tau_surface(TauSurface::Step, 0.39, 0.74) == 0.3);
  CHECK(tau_surface(TauSurface::Step, 0.41, 0.74) == 0.5);
  CHECK(tau_surface(TauSurface::Step, 0.39, 0.76) == 0.7);
  CHECK(tau_surface(TauSurface::Step, 0.41, 0.76) == 0.9);
  CHECK_THAT(tau_surface(TauSurface::SteepSigmoid, 0.4, 0.75), WithinAbs(0.0, 1e-15));
  CHECK_THAT(tau_surface(TauSurface::GentleSigmoid, 0.4, 0.75), WithinAbs(0.0, 1e-15));
  CHECK(tau_surface(TauSurface::SteepSigmoid, 1.0, 1.0) < -0.29);
  CHECK(parse_surface("steep-sigmoid") == TauSurface::SteepSigmoid);
  CHECK(surface_name(TauSurface::GentleSigmoid) == "gentle-sigmoid");
}

TEST_CASE("scenario generation") {
  const CopulaSpec clayton{Family::Clayton};
  const SimulatedDataset sim = generate({clayton, TauSurface::Step, 10000, 3});

  SECTION("replay is bit-identical") {
    const SimulatedDataset again = generate({clayton, TauSurface::Step, 10000, 3});
    CHECK(again.u == sim.u);
    CHECK(again.y == sim.y);
    CHECK(again.x == sim.x);
  }
  SECTION("truth follows the surface") {
    for (Index i = 0; i < sim.x.rows(); ++i) {
      REQUIRE(sim.tau_true[i] == tau_surface(TauSurface::Step, sim.x(i, 0), sim.x(i, 1)));
      REQUIRE_THAT(theta_to_tau(clayton, sim.theta_true[i]), WithinAbs(sim.tau_true[i], 1e-12));
    }
    CHECK(sim.clamped == 0);
  }
  SECTION("copula margins are uniform") {
    CHECK(ks_uniform(sim.u.col(0)).p_value > 0.01);
    CHECK(ks_uniform(sim.u.col(1)).p_value > 0.01);
  }
  SECTION("top-right cell has tau 0.9") {
    std::vector<double> a;
    std::vector<double> b;
    for (Index i = 0; i < sim.x.rows(); ++i) {
      if (sim.x(i, 0) >= 0.4 && sim.x(i, 1) >= 0.75) {
        a.push_back(sim.u(i, 0));
        b.push_back(sim.u(i, 1));
      }
    }
    const Eigen::Map<const Eigen::VectorXd> va(a.data(), static_cast<Index>(a.size()));
    const Eigen::Map<const Eigen::VectorXd> vb(b.data(), static_cast<Index>(b.size()));
    CHECK(std::abs(kendall_tau(va, vb) - 0.9) < 0.03);
  }
  SECTION("responses add the linear means to normal scores") {
    for (Index i = 0; i < 5; ++i) {
      const double x1 = sim.x(i, 0);
      const double x2 = sim.x(i, 1);
      CHECK_THAT(sim.y(i, 0), WithinAbs(normal_quantile(sim.u(i, 0)) + 1.0 + 0.2 * x1 + 0.05 * x2, 1e-12));
      CHECK_THAT(sim.y(i, 1), WithinAbs(normal_quantile(sim.u(i, 1)) + 1.0 - 0.1 * x1 + 0.2 * x2, 1e-12));
    }
  }
}

TEST_CASE("sigmoid surfaces are clamped for positive families only") {
  const SimulatedDataset clayton = generate({CopulaSpec{Family::Clayton}, TauSurface::SteepSigmoid, 2000, 4});
  CHECK(clayton.clamped > 0);
  CHECK(clayton.tau_true.minCoeff() >= kSimTauFloor);
  CHECK(clayton.tau_true.maxCoeff() <= kSimTauCeil);
  const SimulatedDataset frank = generate({CopulaSpec{Family::Frank}, TauSurface::SteepSigmoid, 2000, 4});
  CHECK(frank.clamped == 0);
  CHECK(frank.tau_true.minCoeff() < 0.0);
  CHECK_THROWS_AS(generate({CopulaSpec{Family::Frank}, TauSurface::Step, 0, 1}), Error);
}

TEST_CASE("evaluation metrics") {
  const CopulaSpec clayton{Family::Clayton};
  const SimulatedDataset sim = generate({clayton, TauSurface::Step, 10000, 8});

  SECTION("the oracle model has zero error") {
    const ModelMetrics m = evaluate(clayton, sim.theta_true, sim, sim.u, 3);
    CHECK(m.mse_tau == 0.0);
    CHECK(m.mse_copula == 0.0);
    CHECK(m.n_splits == 3);
    CHECK_THAT(m.loglik, WithinAbs([&] {
                 double s = 0.0;
                 for (Index i = 0; i < sim.u.rows(); ++i) {
                   s += log_density(clayton, sim.theta_true[i], {sim.u(i, 0), sim.u(i, 1)});
                 }
                 return s;
               }(), 1e-6));
  }
  SECTION("a constant model scores the mixture variance of the step values") {
    const double tau_bar = sim.tau_true.mean();
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(sim.x.rows(), tau_to_theta(clayton, tau_bar));
    const ModelMetrics m = evaluate(clayton, theta, sim, sim.u, 0);
    // Cell masses 0.4*0.75, 0.6*0.75, 0.4*0.25, 0.6*0.25 carry tau 0.3, 0.5, 0.7, 0.9.
    const double masses[] = {0.3, 0.45, 0.1, 0.15};
    const double taus[] = {0.3, 0.5, 0.7, 0.9};
    double mean = 0.0;
    for (int k = 0; k < 4; ++k) mean += masses[k] * taus[k];
    double variance = 0.0;
    for (int k = 0; k < 4; ++k) variance += masses[k] * (taus[k] - mean) * (taus[k] - mean);
    CHECK_THAT(m.mse_tau, WithinAbs(variance, 0.01));
    CHECK(m.mse_copula > 0.0);
  }
}

TEST_CASE("replication records") {
  const CopulaSpec clayton{Family::Clayton};
  const ScenarioSpec spec{clayton, TauSurface::Step, 1000, 12};
  const PipelineConfig config;
  const auto records = run_replication(spec, config, 0);
  REQUIRE(records.size() == 6);
  const SimulatedDataset sim = generate(spec);

  const auto find = [&](PseudoSource s, ModelKind m) {
    return *std::find_if(records.begin(), records.end(),
                         [&](const ReplicationRecord& r) { return r.source == s && r.model == m; });
  };
  const FitResult root = fit_mle(clayton, sim.u);
  const ReplicationRecord bench = find(PseudoSource::U, ModelKind::Benchmark);
  CHECK_THAT(bench.metrics.loglik, WithinAbs(root.loglik, 1e-9));
  CHECK(bench.metrics.n_splits == 0);
  for (PseudoSource s : {PseudoSource::U, PseudoSource::V, PseudoSource::W}) {
    const ReplicationRecord c = find(s, ModelKind::Conditional);
    const ReplicationRecord b = find(s, ModelKind::Benchmark);
    CHECK(c.metrics.loglik >= b.metrics.loglik);
    CHECK(c.metrics.mse_tau >= 0.0);
    CHECK(c.metrics.mse_copula >= 0.0);
    CHECK(c.metrics.n_splits >= 0);
  }
  CHECK(find(PseudoSource::U, ModelKind::Conditional).metrics.mse_tau < bench.metrics.mse_tau);

  SECTION("pseudo-observation sources") {
    CHECK(pseudo_for(sim, PseudoSource::U, Family::Clayton) == sim.u);
    const Eigen::MatrixX2d w = pseudo_for(sim, PseudoSource::W, Family::Clayton);
    CHECK(w == pseudo_kernel(sim.dataset(), 0.4).values);
    const SimulatedDataset g = generate({CopulaSpec{Family::Gumbel}, TauSurface::Step, 300, 1});
    CHECK(pseudo_for(g, PseudoSource::W, Family::Gumbel) == pseudo_kernel(g.dataset(), 0.3).values);
  }
}

TEST_CASE("estimated margins barely move the likelihood compared with the covariate effect") {
  const CopulaSpec clayton{Family::Clayton};
  std::vector<double> uv_gap;
  std::vector<double> uw_gap;
  std::vector<double> model_gap;
  for (int rep = 0; rep < 10; ++rep) {
    const ScenarioSpec spec{clayton, TauSurface::Step, 1000, replication_seed(5, Family::Clayton, TauSurface::Step, rep)};
    const auto records = run_replication(spec, PipelineConfig{}, rep);
    const auto ll = [&](PseudoSource s, ModelKind m) {
      for (const auto& r : records) {
        if (r.source == s && r.model == m) return r.metrics.loglik;
      }
      return 0.0;
    };
    uv_gap.push_back(ll(PseudoSource::U, ModelKind::Conditional) - ll(PseudoSource::V, ModelKind::Conditional));
    uw_gap.push_back(ll(PseudoSource::U, ModelKind::Conditional) - ll(PseudoSource::W, ModelKind::Conditional));
    model_gap.push_back(ll(PseudoSource::U, ModelKind::Conditional) - ll(PseudoSource::U, ModelKind::Benchmark));
  }
  INFO("median gaps U-V " << median(uv_gap) << " U-W " << median(uw_gap) << " conditional-benchmark "
                          << median(model_gap));
  CHECK(std::abs(median(uv_gap)) < 0.5 * median(model_gap));
  CHECK(std::abs(median(uw_gap)) < 0.5 * median(model_gap));
}

TEST_CASE("study harness") {
  StudyConfig config;
  config.families = {Family::Clayton, Family::Frank};
  config.surfaces = {TauSurface::Step};
  config.replications = 2;
  config.n = 300;
  config.seed = 4;
  config.pipeline.sources = {PseudoSource::U};
  const StudyResult result = run_study(config);
  REQUIRE(result.records.size() == 2 * 2 * 2);
  CHECK(result.records[0].family == Family::Clayton);
  CHECK(result.records.back().family == Family::Frank);
  CHECK(result.records[0].rep == 0);
  CHECK(replication_seed(4, Family::Clayton, TauSurface::Step, 0) !=
        replication_seed(4, Family::Clayton, TauSurface::Step, 1));

  std::ostringstream tsv;
  write_study_tsv(tsv, result);
  CHECK(tsv.str().rfind("# format_version: 1\n", 0) == 0);
  std::ostringstream json;
  write_study_summary_json(json, result, config);
  for (const char* metric : {"mse_tau", "mse_copula", "loglik", "n_splits"}) {
    CHECK(json.str().find(metric) != std::string::npos);
  }

  CHECK(StudyConfig::desk().replications == 50);
  CHECK(StudyConfig::paper().replications == 500);
  CHECK(StudyConfig::paper().n == 1000);
}
