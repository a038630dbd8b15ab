#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "cctree/io.hpp"
#include "cctree/simulation.hpp"
#include "cli.hpp"

using namespace cctree;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "cctree");
  std::ostringstream out;
  std::ostringstream err;
  const int status = cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cctree_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Step-scenario responses with one numeric and one categorical covariate.
fs::path write_fit_input(const fs::path& dir, Index n = 600) {
  const SimulatedDataset sim = generate({CopulaSpec{Family::Clayton}, TauSurface::Step, n, 77});
  const fs::path path = dir / "input.csv";
  std::ofstream out(path);
  out << "id,y_first,y_second,x_x1:num,x_band:cat\n";
  out.precision(17);
  for (Index i = 0; i < n; ++i) {
    out << i << ',' << sim.y(i, 0) << ',' << sim.y(i, 1) << ',' << sim.x(i, 0) << ','
        << (sim.x(i, 1) < 0.75 ? "low" : "high") << '\n';
  }
  return path;
}

bool error_line_ok(const std::string& err, const std::string& code, int status) {
  const std::regex re("error code=" + code + " exit=" + std::to_string(status) + " message=\"[^\"]*\"\n");
  return std::regex_match(err, re);
}

}  // namespace

TEST_CASE("fit writes every artifact deterministically") {
  const fs::path dir = scratch("fit");
  const fs::path input = write_fit_input(dir);
  const std::vector<std::string> base{"fit", "--input", input.string(), "--seed", "5", "--folds", "3",
                                      "--repeats", "2"};
  auto args_a = base;
  args_a.insert(args_a.end(), {"--out-dir", (dir / "a").string()});
  auto args_b = base;
  args_b.insert(args_b.end(), {"--out-dir", (dir / "b").string()});
  REQUIRE(invoke(args_a).status == 0);
  REQUIRE(invoke(args_b).status == 0);
  for (const char* name : {"tree.json", "maximal_tree.json", "prune_path.tsv", "cv_report.tsv",
                           "cv_report.json", "predictions.csv"}) {
    INFO(name);
    REQUIRE(fs::exists(dir / "a" / name));
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
  }

  SECTION("the tree routes its training rows back to its leaves") {
    const Run r = invoke({"predict", "--tree", (dir / "a" / "tree.json").string(), "--input", input.string()});
    REQUIRE(r.status == 0);
    std::ifstream tree_in(dir / "a" / "tree.json");
    const CopulaTree tree = read_tree_json(tree_in);
    std::map<int, Index> counts;
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    std::getline(lines, line);
    while (std::getline(lines, line)) {
      const auto first = line.find(',');
      const auto second = line.find(',', first + 1);
      ++counts[std::stoi(line.substr(first + 1, second - first - 1))];
    }
    for (int leaf : tree.leaf_ids()) CHECK(counts[leaf] == tree.node(leaf).n_obs);
    CHECK(r.out == slurp(dir / "a" / "predictions.csv"));
  }
  SECTION("prune reproduces the path and applies a penalty") {
    const Run r = invoke({"prune", "--tree", (dir / "a" / "maximal_tree.json").string(), "--out-dir",
                       (dir / "p").string(), "--lambda", "1e9"});
    REQUIRE(r.status == 0);
    CHECK(r.out == "selected_k=1\n");
    CHECK(slurp(dir / "p" / "prune_path.tsv") == slurp(dir / "a" / "prune_path.tsv"));
    CHECK(fs::exists(dir / "p" / "pruned_tree.json"));
  }
}

TEST_CASE("fit with other pseudo-observation methods") {
  const fs::path dir = scratch("methods");
  const fs::path input = write_fit_input(dir, 400);
  for (const char* method : {"normal", "margin-tree"}) {
    INFO(method);
    const Run r = invoke({"fit", "--input", input.string(), "--seed", "1", "--pseudo", method,
                       "--repeats", "1", "--out-dir", (dir / method).string()});
    CHECK(r.status == 0);
  }
  const Run kernel = invoke({"fit", "--input", input.string(), "--seed", "1", "--pseudo", "kernel",
                          "--out-dir", (dir / "kernel").string()});
  CHECK(kernel.status == 4);
  CHECK(error_line_ok(kernel.err, "config", 4));
}

TEST_CASE("single-leaf trees predict a constant tau and tolerate unseen levels") {
  const fs::path dir = scratch("single");
  const fs::path input = write_fit_input(dir, 120);
  REQUIRE(invoke({"fit", "--input", input.string(), "--seed", "2", "--min-leaf", "50", "--folds", "2",
               "--repeats", "1", "--out-dir", dir.string()})
              .status == 3);  // 120 rows cannot feed 2 folds of 2 x 50
  REQUIRE(invoke({"fit", "--input", input.string(), "--seed", "2", "--min-leaf", "30", "--max-leaves", "1",
               "--folds", "2", "--repeats", "1", "--out-dir", dir.string()})
              .status == 0);
  {
    std::ofstream x(dir / "new.csv");
    x << "x_band:cat,x_x1:num\nmiddle,0.2\nlow,0.9\nhigh,0.5\n";
  }
  const Run r = invoke({"predict", "--tree", (dir / "tree.json").string(), "--input", (dir / "new.csv").string()});
  REQUIRE(r.status == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  std::set<std::string> taus;
  while (std::getline(lines, line)) taus.insert(line.substr(line.rfind(',') + 1));
  CHECK(taus.size() == 1);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("errors");
  {
    std::ofstream bad(dir / "bad.csv");
    bad << "y_a,x_b:num\n1,2\n";
  }
  const Run schema = invoke({"fit", "--input", (dir / "bad.csv").string(), "--seed", "1"});
  CHECK(schema.status == 2);
  CHECK(error_line_ok(schema.err, "schema", 2));

  const Run family = invoke({"simulate", "--families", "gaussian", "--seed", "1", "--dry-run"});
  CHECK(family.status == 4);
  CHECK(error_line_ok(family.err, "config", 4));

  const Run no_seed = invoke({"simulate", "--dry-run"});
  CHECK(no_seed.status == 4);
  CHECK(error_line_ok(no_seed.err, "config", 4));

  const Run unknown = invoke({"frobnicate"});
  CHECK(unknown.status == 4);

  const Run missing = invoke({"predict", "--tree", (dir / "nope.json").string(), "--input", "x.csv"});
  CHECK(missing.status == 2);

  {
    std::ofstream constant(dir / "collinear.csv");
    constant << "y_a,y_b,x_c:num\n";
    for (int i = 0; i < 400; ++i) constant << i % 7 << ',' << i % 5 << ",1\n";
  }
  const Run fit_fail = invoke({"fit", "--input", (dir / "collinear.csv").string(), "--seed", "1",
                            "--pseudo", "normal", "--design", "c", "--out-dir", dir.string()});
  CHECK(fit_fail.status == 3);
}

TEST_CASE("simulate") {
  const Run paper = invoke({"simulate", "--preset", "paper", "--seed", "3", "--dry-run"});
  REQUIRE(paper.status == 0);
  const auto echo = nlohmann::json::parse(paper.out);
  CHECK(echo.at("replications") == 500);
  CHECK(echo.at("n") == 1000);

  const fs::path dir = scratch("simulate");
  const Run desk = invoke({"simulate", "--preset", "desk", "--families", "clayton", "--surfaces", "step",
                        "--sources", "U", "--replications", "2", "--n", "400", "--seed", "3",
                        "--out-dir", dir.string()});
  REQUIRE(desk.status == 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  std::set<std::string> metrics;
  for (const auto& cell : summary.at("cells")) metrics.insert(cell.at("metric").get<std::string>());
  CHECK(metrics == std::set<std::string>{"loglik", "mse_copula", "mse_tau", "n_splits"});
  CHECK(slurp(dir / "study.tsv").rfind("# format_version: 1\n", 0) == 0);
}

TEST_CASE("config files set options and flags override them") {
  const fs::path dir = scratch("config");
  {
    std::ofstream cfg(dir / "run.toml");
    cfg << "[simulate]\npreset = \"paper\"\nseed = 11\nreplications = 7\n";
  }
  const Run from_file = invoke({"--config", (dir / "run.toml").string(), "simulate", "--dry-run"});
  REQUIRE(from_file.status == 0);
  auto echo = nlohmann::json::parse(from_file.out);
  CHECK(echo.at("replications") == 7);
  CHECK(echo.at("seed") == 11);
  const Run flag = invoke({"--config", (dir / "run.toml").string(), "simulate", "--dry-run", "--replications", "3"});
  REQUIRE(flag.status == 0);
  echo = nlohmann::json::parse(flag.out);
  CHECK(echo.at("replications") == 3);
}

TEST_CASE("flu pipeline on the bundled fixture") {
  const fs::path dir = scratch("flu");
  const Run r = invoke({"flu", "--input", CCTREE_FIXTURE, "--seed", "4", "--out-dir", dir.string()});
  REQUIRE(r.status == 0);
  for (const char* name : {"unit_seasons.csv", "leaf_report.tsv", "flu_summary.json", "tree.json"}) {
    CHECK(fs::exists(dir / name));
  }
  const auto summary = nlohmann::json::parse(slurp(dir / "flu_summary.json"));
  CHECK(summary.at("conditional_loglik").get<double>() >= summary.at("benchmark_loglik").get<double>());

  const fs::path empty = dir / "empty.csv";
  {
    std::ofstream out(empty);
    out << "unit_id,iso_week,count_h1,count_h3,count_b\nA,2015-W20,1,1,1\n";
  }
  const Run none = invoke({"flu", "--input", empty.string(), "--seed", "4", "--out-dir", dir.string()});
  CHECK(none.status == 2);
  CHECK(error_line_ok(none.err, "no_data", 2));
}

TEST_CASE("fixture command") {
  const fs::path dir = scratch("fixture");
  REQUIRE(invoke({"fixture", "--output", (dir / "a.csv").string(), "--seed", "6", "--units", "10"}).status == 0);
  REQUIRE(invoke({"fixture", "--output", (dir / "b.csv").string(), "--seed", "6", "--units", "10"}).status == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv").rfind("unit_id,iso_week,count_h1,count_h3,count_b,itz\n", 0) == 0);
}
