// lamc: command-line front end for partitioned co-clustering.
//
//   lamc run      --input A.mtx --k 4 [--truth labels.json] --out report.json
//   lamc plan     --input A.mtx | --rows M --cols N
//   lamc metrics  pred.csv truth.csv
//   lamc bench    --input A.mtx --sweep workers=1,2,4
//   lamc generate --spec planted.json --out A.mtx --truth-out labels.json
//
// Exit codes: 0 success, 2 configuration or planner error, 3 I/O or parse
// error, 4 numerical failure. LAMC_LOG=error|warn|info|debug sets verbosity.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lamc/error.hpp"
#include "lamc/io.hpp"
#include "lamc/metrics.hpp"
#include "lamc/pipeline.hpp"
#include "lamc/planner.hpp"
#include "lamc/planted.hpp"

namespace {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

Level log_level() {
  const char* env = std::getenv("LAMC_LOG");
  if (!env) return Level::warn;
  const std::string v = lamc::detail::lower(env);
  if (v == "error") return Level::error;
  if (v == "info") return Level::info;
  if (v == "debug") return Level::debug;
  return Level::warn;
}

void log(Level level, const std::string& msg) {
  static const Level threshold = log_level();
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= threshold) std::cerr << "lamc " << names[static_cast<int>(level)] << ": " << msg << '\n';
}

std::pair<lamc::Index, lamc::Index> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  lamc::Index m = 0, n = 0;
  if (x == std::string::npos || !lamc::detail::parse_int(std::string_view(s).substr(0, x), m) ||
      !lamc::detail::parse_int(std::string_view(s).substr(x + 1), n) || m < 1 || n < 1)
    throw lamc::ConfigError("grid must look like MxN with positive M and N, got '" + s + "'");
  return {m, n};
}

struct PriorFlags {
  double min_rows = 0.1, min_cols = 0.1;
  lamc::Index tm = 0, tn = 0;
};

void add_config_flags(CLI::App* app, lamc::PipelineConfig& cfg, PriorFlags& prior,
                      std::string& grid, lamc::Index& rounds) {
  app->add_option("--input", cfg.input, "input matrix")->required();
  app->add_option("--format", cfg.format, "mtx | csv | csv-header")
      ->check(CLI::IsMember({"mtx", "csv", "csv-header"}));
  app->add_option("--k", cfg.k, "clusters per block");
  app->add_option("--min-cocluster-rows", prior.min_rows, "smallest co-cluster, fraction of rows");
  app->add_option("--min-cocluster-cols", prior.min_cols, "smallest co-cluster, fraction of columns");
  app->add_option("--tm", prior.tm, "row detection threshold (0: automatic)");
  app->add_option("--tn", prior.tn, "column detection threshold (0: automatic)");
  app->add_option("--p-thresh", cfg.p_thresh, "required detection probability");
  app->add_option("--workers", cfg.workers, "concurrent block workers");
  app->add_option("--seed", cfg.root_seed, "root seed");
  app->add_option("--tau", cfg.tau, "merge similarity threshold");
  app->add_option("--merge-cap", cfg.merge_cap, "maximum merge iterations (0: candidates)");
  app->add_option("--grid", grid, "force an MxN block grid");
  app->add_option("--rounds", rounds, "force the number of sampling rounds");
}

void finish_config(lamc::PipelineConfig& cfg, const PriorFlags& prior, const std::string& grid,
                   lamc::Index rounds) {
  cfg.min_rows_fraction = prior.min_rows;
  cfg.min_cols_fraction = prior.min_cols;
  cfg.row_threshold = prior.tm;
  cfg.col_threshold = prior.tn;
  if (!grid.empty()) cfg.grid = parse_grid(grid);
  if (rounds > 0) cfg.rounds = rounds;
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-")
    std::cout << content;
  else
    lamc::write_file_atomic(path, content);
}

int cmd_run(const lamc::PipelineConfig& cfg, const std::string& labels_out) {
  log(Level::info, "loading " + cfg.input);
  const auto report = lamc::run(cfg);
  const auto& p = report.plan;
  log(Level::info, "grid " + std::to_string(p.m) + "x" + std::to_string(p.n) + ", " +
                       std::to_string(p.rounds) + " round(s), success bound " +
                       std::to_string(p.success_bound));
  for (const auto& w : report.warnings) log(Level::warn, w);
  for (const auto& b : report.blocks) {
    std::ostringstream os;
    os << "round " << b.round << " block (" << b.block_row << ", " << b.block_col << ") "
       << b.status << " " << b.seconds << " s, singular values";
    for (double v : b.singular_values) os << ' ' << v;
    log(Level::debug, os.str());
  }
  if (!labels_out.empty()) lamc::write_file_atomic(labels_out, lamc::labels_to_csv(report.labels));
  if (cfg.out.empty()) std::cout << lamc::to_json(report).dump(2) << '\n';
  nlohmann::json summary{{"coclusters", report.coclusters.size()},
                         {"wall_seconds", report.wall_seconds}};
  if (report.metrics) summary["metrics"] = lamc::to_json(*report.metrics);
  log(Level::info, summary.dump());
  return 0;
}

int cmd_plan(const lamc::PipelineConfig& cfg, lamc::Index rows, lamc::Index cols,
             const std::string& storage, const std::string& out) {
  lamc::Index r = rows, c = cols;
  auto kind = storage == "dense" ? lamc::StorageKind::dense : lamc::StorageKind::sparse;
  if (!cfg.input.empty()) {
    const auto m = lamc::load_input(cfg);
    r = m.rows();
    c = m.cols();
    kind = m.kind();
  }
  if (r < 1 || c < 1) throw lamc::ConfigError("plan needs --input or positive --rows and --cols");
  const auto plan = lamc::plan_for(cfg, r, c, kind);
  emit(out, lamc::to_json(plan).dump(2) + "\n");
  return 0;
}

int cmd_metrics(const std::string& pred_path, const std::string& truth_path, const std::string& out) {
  const auto pred = lamc::load_labels(pred_path);
  const auto truth = lamc::load_labels(truth_path);
  const auto nmi = lamc::cocluster_nmi(pred.labels, truth.labels);
  const auto ari = lamc::cocluster_ari(pred.labels, truth.labels);
  std::vector<int> p(pred.labels.row_labels), t(truth.labels.row_labels);
  p.insert(p.end(), pred.labels.col_labels.begin(), pred.labels.col_labels.end());
  t.insert(t.end(), truth.labels.col_labels.begin(), truth.labels.col_labels.end());
  const nlohmann::json j{
      {"nmi", {{"row", nmi.row}, {"col", nmi.col}, {"mean", nmi.mean()}, {"combined", lamc::nmi(p, t)}}},
      {"ari", {{"row", ari.row}, {"col", ari.col}, {"mean", ari.mean()}, {"combined", lamc::ari(p, t)}}},
      {"nmi_normalization", "geometric"}};
  emit(out, j.dump(2) + "\n");
  return 0;
}

std::vector<lamc::BenchmarkCase> parse_sweep(const std::string& sweep, lamc::Index workers) {
  const auto eq = sweep.find('=');
  if (eq == std::string::npos) throw lamc::ConfigError("sweep must look like workers=1,2,4 or grid=1x1,2x2");
  const auto key = sweep.substr(0, eq);
  std::vector<lamc::BenchmarkCase> cases;
  std::stringstream values(sweep.substr(eq + 1));
  for (std::string v; std::getline(values, v, ',');) {
    lamc::BenchmarkCase c;
    c.workers = workers;
    if (key == "workers") {
      if (!lamc::detail::parse_int(v, c.workers) || c.workers < 1)
        throw lamc::ConfigError("bad worker count '" + v + "'");
    } else if (key == "grid") {
      c.grid = parse_grid(v);
    } else {
      throw lamc::ConfigError("unknown sweep key '" + key + "'");
    }
    cases.push_back(c);
  }
  if (cases.empty()) throw lamc::ConfigError("empty sweep");
  return cases;
}

int cmd_bench(const lamc::PipelineConfig& cfg, const std::string& sweep, int repetitions,
              const std::string& csv_out) {
  const auto matrix = lamc::load_input(cfg);
  std::optional<lamc::TruthLabels> truth;
  if (!cfg.truth.empty()) truth = lamc::load_labels(cfg.truth);
  const auto rows = lamc::benchmark(matrix, cfg, parse_sweep(sweep, cfg.workers), repetitions,
                                    truth ? &*truth : nullptr);
  const auto csv = lamc::benchmark_csv(rows);
  if (!csv_out.empty()) lamc::write_file_atomic(csv_out, csv);
  std::cout << csv;
  if (!cfg.out.empty()) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) j.push_back(lamc::to_json(r));
    lamc::write_file_atomic(cfg.out, j.dump(2) + "\n");
  }
  return 0;
}

struct GenerateFlags {
  std::string spec, out, truth_out;
  lamc::Index rows = 0, cols = 0;
  std::vector<std::string> sizes;
  double signal = 1.0, noise = 0.0;
  std::uint64_t seed = 0;
  bool dense = false;
};

int cmd_generate(const GenerateFlags& g) {
  lamc::PlantedSpec spec;
  if (!g.spec.empty()) {
    spec = lamc::planted_spec_from_json(lamc::read_json_file(g.spec));
  } else {
    if (g.rows < 1 || g.cols < 1) throw lamc::ConfigError("generate needs --spec or --rows/--cols");
    std::vector<std::pair<lamc::Index, lamc::Index>> sizes;
    for (const auto& s : g.sizes) sizes.push_back(parse_grid(s));
    spec.rows = g.rows;
    spec.cols = g.cols;
    spec.truth = lamc::random_planted(g.rows, g.cols, sizes, g.signal, g.noise, g.seed);
  }
  const auto matrix = lamc::generate_planted(spec.rows, spec.cols, spec.truth,
                                             g.dense ? lamc::StorageKind::dense : lamc::StorageKind::sparse);
  lamc::write_matrix_market(matrix, g.out);
  if (!g.truth_out.empty()) {
    lamc::TruthLabels t{lamc::planted_labels(spec.rows, spec.cols, spec.truth),
                        static_cast<int>(spec.truth.coclusters.size())};
    lamc::write_file_atomic(g.truth_out, lamc::to_json(t).dump() + "\n");
  }
  log(Level::info, "wrote " + g.out + " (" + std::to_string(matrix.nnz()) + " nonzeros)");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partitioned spectral co-clustering"};
  app.require_subcommand(1);

  lamc::PipelineConfig run_cfg;
  PriorFlags run_prior;
  std::string run_grid, labels_out;
  lamc::Index run_rounds = 0;
  auto* run = app.add_subcommand("run", "co-cluster a matrix");
  add_config_flags(run, run_cfg, run_prior, run_grid, run_rounds);
  run->add_option("--out", run_cfg.out, "report path (stdout when omitted)");
  run->add_option("--truth", run_cfg.truth, "ground-truth labels JSON");
  run->add_option("--labels-out", labels_out, "write final labels as CSV");

  lamc::PipelineConfig plan_cfg;
  PriorFlags plan_prior;
  std::string plan_grid, plan_storage = "sparse", plan_out;
  lamc::Index plan_rounds = 0, plan_rows = 0, plan_cols = 0;
  auto* plan = app.add_subcommand("plan", "print the partition plan");
  add_config_flags(plan, plan_cfg, plan_prior, plan_grid, plan_rounds);
  plan->get_option("--input")->required(false);
  plan->add_option("--rows", plan_rows, "row count when no input is given");
  plan->add_option("--cols", plan_cols, "column count when no input is given");
  plan->add_option("--storage", plan_storage, "dense | sparse cost model")
      ->check(CLI::IsMember({"dense", "sparse"}));
  plan->add_option("--out", plan_out, "output path (stdout when omitted)");

  std::string pred_path, truth_path, metrics_out;
  auto* metrics = app.add_subcommand("metrics", "compare two label files");
  metrics->add_option("pred", pred_path, "predicted labels (.csv or .json)")->required();
  metrics->add_option("truth", truth_path, "true labels (.csv or .json)")->required();
  metrics->add_option("--out", metrics_out, "output path (stdout when omitted)");

  lamc::PipelineConfig bench_cfg;
  PriorFlags bench_prior;
  std::string bench_grid, sweep = "workers=1", csv_out;
  lamc::Index bench_rounds = 0;
  int repetitions = 3;
  auto* bench = app.add_subcommand("bench", "time configurations against the monolithic run");
  add_config_flags(bench, bench_cfg, bench_prior, bench_grid, bench_rounds);
  bench->add_option("--sweep", sweep, "workers=1,2,4 or grid=1x1,2x2");
  bench->add_option("--repetitions", repetitions, "runs per configuration");
  bench->add_option("--truth", bench_cfg.truth, "ground-truth labels JSON");
  bench->add_option("--out", bench_cfg.out, "JSON table path");
  bench->add_option("--csv", csv_out, "CSV table path");

  GenerateFlags gen;
  auto* generate = app.add_subcommand("generate", "write a planted co-cluster matrix");
  generate->add_option("--spec", gen.spec, "planted spec JSON");
  generate->add_option("--rows", gen.rows, "matrix rows");
  generate->add_option("--cols", gen.cols, "matrix columns");
  generate->add_option("--cocluster", gen.sizes, "RxC size of a planted co-cluster (repeatable)");
  generate->add_option("--signal", gen.signal, "density inside co-clusters");
  generate->add_option("--noise", gen.noise, "background density");
  generate->add_option("--seed", gen.seed, "generator seed");
  generate->add_flag("--dense", gen.dense, "array format output");
  generate->add_option("--out", gen.out, "matrix path")->required();
  generate->add_option("--truth-out", gen.truth_out, "ground-truth labels JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      finish_config(run_cfg, run_prior, run_grid, run_rounds);
      return cmd_run(run_cfg, labels_out);
    }
    if (*plan) {
      finish_config(plan_cfg, plan_prior, plan_grid, plan_rounds);
      return cmd_plan(plan_cfg, plan_rows, plan_cols, plan_storage, plan_out);
    }
    if (*metrics) return cmd_metrics(pred_path, truth_path, metrics_out);
    if (*bench) {
      finish_config(bench_cfg, bench_prior, bench_grid, bench_rounds);
      return cmd_bench(bench_cfg, sweep, repetitions, csv_out);
    }
    if (*generate) return cmd_generate(gen);
  } catch (const lamc::ConfigError& e) {
    log(Level::error, e.what());
    return 2;
  } catch (const lamc::DomainError& e) {
    log(Level::error, e.what());
    return 2;
  } catch (const lamc::IoError& e) {
    log(Level::error, e.what());
    return 3;
  } catch (const lamc::ParseError& e) {
    log(Level::error, e.what());
    return 3;
  } catch (const lamc::NumericalError& e) {
    log(Level::error, e.what());
    return 4;
  } catch (const std::exception& e) {
    log(Level::error, e.what());
    return 1;
  }
  return 0;
}
