#pragma once

// End-to-end partitioned co-clustering: plan the grid, then for every
// sampling round permute, cut into blocks, co-cluster the blocks on a worker
// pool, lift and stitch the fragments; finally merge across rounds, resolve
// labels and score against ground truth when one is given.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "lamc/error.hpp"
#include "lamc/io.hpp"
#include "lamc/labels.hpp"
#include "lamc/matrix.hpp"
#include "lamc/merge.hpp"
#include "lamc/metrics.hpp"
#include "lamc/planner.hpp"
#include "lamc/random.hpp"
#include "lamc/spectral.hpp"

namespace lamc {

struct PipelineConfig {
  std::string input;
  std::string format = "mtx";  // mtx | csv | csv-header
  int k = 2;
  // Smallest co-cluster to preserve, as fractions of M and N. Ignored when
  // `priors` is non-empty.
  double min_rows_fraction = 0.1;
  double min_cols_fraction = 0.1;
  Index row_threshold = 0;  // 0: default for the block size
  Index col_threshold = 0;
  std::vector<CoClusterPrior> priors;
  double p_thresh = 0.95;
  Index workers = 1;
  std::uint64_t root_seed = 0;
  double tau = 0.5;
  std::size_t merge_cap = 0;  // 0: number of merge candidates
  std::optional<std::pair<Index, Index>> grid;
  std::optional<Index> rounds;
  LiftOptions lift;  // thresholds are taken from the plan
  AtomOptions atom;
  std::string out;
  std::string truth;
};

inline void validate(const PipelineConfig& c) {
  if (c.k < 2) throw ConfigError("k must be >= 2");
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  if (!(c.p_thresh >= 0.0 && c.p_thresh < 1.0)) throw ConfigError("p_thresh must lie in [0, 1)");
  if (!(c.tau > 0.0 && c.tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (c.priors.empty() && !(c.min_rows_fraction > 0.0 && c.min_rows_fraction <= 1.0 &&
                            c.min_cols_fraction > 0.0 && c.min_cols_fraction <= 1.0))
    throw ConfigError("co-cluster size fractions must lie in (0, 1]");
}

inline std::vector<CoClusterPrior> resolve_priors(const PipelineConfig& c, Index rows, Index cols) {
  if (!c.priors.empty()) return c.priors;
  CoClusterPrior p;
  p.min_rows = std::clamp<Index>(static_cast<Index>(std::ceil(c.min_rows_fraction * static_cast<double>(rows))), 1, rows);
  p.min_cols = std::clamp<Index>(static_cast<Index>(std::ceil(c.min_cols_fraction * static_cast<double>(cols))), 1, cols);
  p.row_threshold = c.row_threshold;
  p.col_threshold = c.col_threshold;
  return {p};
}

inline PartitionPlan plan_for(const PipelineConfig& c, Index rows, Index cols, StorageKind storage) {
  validate(c);
  PlanRequest req;
  req.rows = rows;
  req.cols = cols;
  req.priors = resolve_priors(c, rows, cols);
  req.p_thresh = c.p_thresh;
  req.workers = c.workers;
  req.cost.storage = storage;
  req.cost.singular_pairs = embedding_width(c.k);
  req.root_seed = c.root_seed;
  req.grid = c.grid;
  req.rounds = c.rounds;
  return plan_partition(req);
}

// Runs `count` independent tasks on up to `workers` threads; returns the
// busy seconds of each worker.
template <class F>
std::vector<double> parallel_for(std::size_t count, Index workers, F&& task) {
  const auto threads = static_cast<std::size_t>(std::max<Index>(1, std::min<Index>(workers, static_cast<Index>(count))));
  std::vector<double> busy(threads, 0.0);
  std::atomic<std::size_t> next{0};
  auto body = [&](std::size_t w) {
    for (std::size_t i = next++; i < count; i = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      task(i);
      busy[w] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  if (threads == 1) {
    body(0);
    return busy;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(body, w);
  pool.clear();  // joins
  return busy;
}

struct BlockRecord {
  int round = 0;
  Index block_row = 0, block_col = 0;
  Index rows = 0, cols = 0;
  double seconds = 0.0;
  std::string status = "ok";  // ok | empty | failed: <reason>
  std::size_t candidates = 0;
  std::vector<double> singular_values;
};

struct RunMetrics {
  CoClusterScores nmi, ari;
  double combined_nmi = 0.0, combined_ari = 0.0;
  std::size_t truth_coclusters = 0;
  std::size_t detected = 0;
  double detection_rate() const {
    return truth_coclusters ? static_cast<double>(detected) / static_cast<double>(truth_coclusters) : 1.0;
  }
};

struct RunReport {
  PartitionPlan plan;
  std::vector<BlockRecord> blocks;
  std::size_t candidate_count = 0;   // lifted block-level co-clusters
  std::size_t round_level_count = 0;  // after stitching
  std::size_t peak_candidates = 0;    // largest per-round candidate pool
  MergeTrace merge_trace;
  std::vector<CoCluster> merged;      // merge output before label resolution
  std::vector<CoCluster> coclusters;  // final, from the label assignment
  LabelAssignment labels;
  std::optional<RunMetrics> metrics;
  std::vector<std::string> warnings;
  double wall_seconds = 0.0;
  std::vector<double> worker_busy_seconds;
};

// Ground-truth labels, optionally naming the background label.
struct TruthLabels {
  LabelAssignment labels;
  std::optional<int> background;
};

inline TruthLabels truth_from_json(const nlohmann::json& j) {
  try {
    TruthLabels t;
    t.labels.row_labels = j.at("row_labels").get<std::vector<int>>();
    t.labels.col_labels = j.at("col_labels").get<std::vector<int>>();
    if (j.contains("background") && !j.at("background").is_null())
      t.background = j.at("background").get<int>();
    int k = 0, d = 0;
    for (int l : t.labels.row_labels) k = std::max(k, l + 1);
    for (int l : t.labels.col_labels) d = std::max(d, l + 1);
    t.labels.k = k;
    t.labels.d = d;
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("truth labels: ") + e.what());
  }
}

inline nlohmann::json to_json(const TruthLabels& t) {
  nlohmann::json j{{"row_labels", t.labels.row_labels}, {"col_labels", t.labels.col_labels}};
  j["background"] = t.background ? nlohmann::json(*t.background) : nlohmann::json(nullptr);
  return j;
}

// Co-clusters encoded by truth labels: every label present on both axes,
// except the background label.
inline std::vector<CoCluster> truth_coclusters(const TruthLabels& t) {
  std::map<int, CoCluster> by_label;
  for (std::size_t i = 0; i < t.labels.row_labels.size(); ++i)
    by_label[t.labels.row_labels[i]].rows.push_back(static_cast<Index>(i));
  for (std::size_t j = 0; j < t.labels.col_labels.size(); ++j)
    by_label[t.labels.col_labels[j]].cols.push_back(static_cast<Index>(j));
  std::vector<CoCluster> out;
  for (auto& [label, c] : by_label)
    if (!c.rows.empty() && !c.cols.empty() && label != t.background.value_or(-1))
      out.push_back(std::move(c));
  return out;
}

// A truth co-cluster counts as detected when some found co-cluster reaches
// a Jaccard product of at least `threshold` against it.
inline std::size_t count_detected(const std::vector<CoCluster>& truth,
                                  const std::vector<CoCluster>& found, double threshold = 0.8) {
  std::size_t n = 0;
  for (const auto& t : truth)
    for (const auto& f : found)
      if (similarity(t, f) >= threshold) {
        ++n;
        break;
      }
  return n;
}

inline RunMetrics evaluate(const LabelAssignment& pred, const std::vector<CoCluster>& found,
                           const TruthLabels& truth) {
  RunMetrics m;
  m.nmi = cocluster_nmi(pred, truth.labels);
  m.ari = cocluster_ari(pred, truth.labels);
  // rows and columns as one item set sharing the co-cluster label space
  std::vector<int> p(pred.row_labels), t(truth.labels.row_labels);
  p.insert(p.end(), pred.col_labels.begin(), pred.col_labels.end());
  t.insert(t.end(), truth.labels.col_labels.begin(), truth.labels.col_labels.end());
  m.combined_nmi = nmi(p, t);
  m.combined_ari = ari(p, t);
  const auto tc = truth_coclusters(truth);
  m.truth_coclusters = tc.size();
  m.detected = count_detected(tc, found);
  return m;
}

inline RunReport run(const DataMatrix& matrix, const PipelineConfig& config,
                     const AtomCoClusterer& atom, const TruthLabels* truth = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.plan = plan_for(config, matrix.rows(), matrix.cols(), matrix.kind());
  const auto& plan = report.plan;
  const Grid grid = plan.grid();

  LiftOptions lift = config.lift;
  lift.row_threshold = plan.row_threshold;
  lift.col_threshold = plan.col_threshold;

  std::vector<CoCluster> round_level;
  report.worker_busy_seconds.assign(static_cast<std::size_t>(config.workers), 0.0);
  for (Index r = 0; r < plan.rounds; ++r) {
    const auto round = static_cast<int>(r);
    // A single block sees every row and column whatever the order.
    std::optional<DataMatrix> permuted;
    if (plan.m * plan.n > 1) {
      const auto& [row_seed, col_seed] = plan.perm_seeds[static_cast<std::size_t>(r)];
      permuted = permute(matrix, random_permutation<Index>(matrix.rows(), row_seed),
                         random_permutation<Index>(matrix.cols(), col_seed));
    }
    const auto blocks = extract_blocks(permuted ? *permuted : matrix, grid);

    std::vector<BlockRecord> records(blocks.size());
    std::vector<std::vector<CoCluster>> lifted(blocks.size());
    const auto busy = parallel_for(blocks.size(), config.workers, [&](std::size_t b) {
      const auto& block = blocks[b];
      auto& rec = records[b];
      rec.round = round;
      rec.block_row = block.block_row();
      rec.block_col = block.block_col();
      rec.rows = block.rows();
      rec.cols = block.cols();
      const auto t0 = std::chrono::steady_clock::now();
      const auto seed = derive_seed({config.root_seed, static_cast<std::uint64_t>(r),
                                     static_cast<std::uint64_t>(block.block_row()),
                                     static_cast<std::uint64_t>(block.block_col())});
      try {
        const auto result = atom(block, config.k, seed);
        rec.singular_values.assign(result.singular_values.begin(), result.singular_values.end());
        lifted[b] = lift_to_global(result, block, lift, round);
      } catch (const EmptyBlockError&) {
        rec.status = "empty";
      } catch (const NumericalError& e) {
        rec.status = std::string("failed: ") + e.what();
      }
      rec.candidates = lifted[b].size();
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
    for (std::size_t w = 0; w < busy.size(); ++w) report.worker_busy_seconds[w] += busy[w];

    std::vector<CoCluster> candidates;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (records[b].status.rfind("failed", 0) == 0)
        report.warnings.push_back("round " + std::to_string(r) + " block (" +
                                  std::to_string(records[b].block_row) + ", " +
                                  std::to_string(records[b].block_col) + ") skipped: " +
                                  records[b].status);
      for (auto& c : lifted[b]) candidates.push_back(std::move(c));
    }
    report.candidate_count += candidates.size();
    report.peak_candidates = std::max(report.peak_candidates, candidates.size());
    for (auto& c : stitch_round(candidates, config.tau)) round_level.push_back(std::move(c));
    report.blocks.insert(report.blocks.end(), records.begin(), records.end());
  }

  report.round_level_count = round_level.size();
  const std::size_t cap = config.merge_cap ? config.merge_cap : std::max<std::size_t>(1, round_level.size());
  auto merged = hierarchical_merge(std::move(round_level), config.tau, cap);
  report.merge_trace = std::move(merged.trace);
  report.merged = std::move(merged.coclusters);
  report.labels = consensus_labels(report.merged, matrix.rows(), matrix.cols());
  report.coclusters = coclusters_from_labels(report.labels, matrix);
  if (truth) report.metrics = evaluate(report.labels, report.coclusters, *truth);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline RunReport run(const DataMatrix& matrix, const PipelineConfig& config,
                     const TruthLabels* truth = nullptr) {
  return run(matrix, config, spectral_atom(config.atom), truth);
}

inline nlohmann::json to_json(const RunMetrics& m) {
  return {{"nmi", {{"row", m.nmi.row}, {"col", m.nmi.col}, {"mean", m.nmi.mean()},
                   {"combined", m.combined_nmi}}},
          {"ari", {{"row", m.ari.row}, {"col", m.ari.col}, {"mean", m.ari.mean()},
                   {"combined", m.combined_ari}}},
          {"nmi_normalization", "geometric"},
          {"truth_coclusters", m.truth_coclusters},
          {"detected", m.detected},
          {"detection_rate", m.detection_rate()}};
}

// Timings are left out when `with_timings` is false, which makes the
// document a deterministic function of the input and configuration.
inline nlohmann::json to_json(const RunReport& r, bool with_timings = true) {
  nlohmann::json coclusters = nlohmann::json::array();
  for (const auto& c : r.coclusters) coclusters.push_back(to_json(c));
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : r.blocks) {
    nlohmann::json jb{{"round", b.round},
                      {"block", {b.block_row, b.block_col}},
                      {"shape", {b.rows, b.cols}},
                      {"status", b.status},
                      {"candidates", b.candidates},
                      {"singular_values", b.singular_values}};
    if (with_timings) jb["seconds"] = b.seconds;
    blocks.push_back(std::move(jb));
  }
  nlohmann::json j{{"plan", to_json(r.plan)},
                   {"blocks", blocks},
                   {"candidate_count", r.candidate_count},
                   {"round_level_count", r.round_level_count},
                   {"peak_candidates", r.peak_candidates},
                   {"merge_trace", to_json(r.merge_trace)},
                   {"coclusters", coclusters},
                   {"row_labels", r.labels.row_labels},
                   {"col_labels", r.labels.col_labels},
                   {"k", r.labels.k},
                   {"d", r.labels.d},
                   {"warnings", r.warnings}};
  if (r.metrics) j["metrics"] = to_json(*r.metrics);
  if (with_timings) {
    j["wall_seconds"] = r.wall_seconds;
    j["worker_busy_seconds"] = r.worker_busy_seconds;
  }
  return j;
}

inline DataMatrix load_input(const PipelineConfig& c) {
  if (c.format == "mtx") return load_matrix_market(c.input);
  if (c.format == "csv") return load_dense_csv(c.input, false);
  if (c.format == "csv-header") return load_dense_csv(c.input, true);
  throw ConfigError("unknown input format '" + c.format + "'");
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// Loads the input (and truth, if configured), runs, and writes the report
// atomically when an output path is set.
inline RunReport run(const PipelineConfig& config) {
  validate(config);
  const DataMatrix matrix = load_input(config);
  std::optional<TruthLabels> truth;
  if (!config.truth.empty()) {
    truth = truth_from_json(read_json_file(config.truth));
    if (truth->labels.row_labels.size() != static_cast<std::size_t>(matrix.rows()) ||
        truth->labels.col_labels.size() != static_cast<std::size_t>(matrix.cols()))
      throw ConfigError("truth labels do not match the matrix dimensions");
  }
  auto report = run(matrix, config, truth ? &*truth : nullptr);
  if (!config.out.empty()) write_file_atomic(config.out, to_json(report).dump(2) + "\n");
  return report;
}

// ---------------------------------------------------------------------------
// Benchmarking

struct BenchmarkCase {
  Index workers = 1;
  std::optional<std::pair<Index, Index>> grid;
};

struct BenchmarkRow {
  std::string label;
  Index workers = 1;
  Index m = 1, n = 1, rounds = 1;
  std::vector<double> seconds;
  double median_seconds = 0.0;
  double speedup = 1.0;  // baseline median / this median
  std::optional<RunMetrics> metrics;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Times each case `repetitions` times against the monolithic baseline (one
// block, one round, one worker). Cases whose resolved plan coincides with
// the baseline reuse its measurements.
inline std::vector<BenchmarkRow> benchmark(const DataMatrix& matrix, const PipelineConfig& base,
                                           const std::vector<BenchmarkCase>& cases,
                                           int repetitions = 3, const TruthLabels* truth = nullptr) {
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  std::map<std::tuple<Index, Index, Index, Index>, BenchmarkRow> cache;
  auto measure = [&](PipelineConfig cfg, const std::string& label) {
    const auto plan = plan_for(cfg, matrix.rows(), matrix.cols(), matrix.kind());
    const auto key = std::make_tuple(std::min(cfg.workers, plan.m * plan.n), plan.m, plan.n, plan.rounds);
    if (auto it = cache.find(key); it != cache.end()) {
      auto row = it->second;
      row.label = label;
      row.workers = cfg.workers;
      return row;
    }
    BenchmarkRow row;
    row.label = label;
    row.workers = cfg.workers;
    row.m = plan.m;
    row.n = plan.n;
    row.rounds = plan.rounds;
    for (int i = 0; i < repetitions; ++i) {
      const auto rep = run(matrix, cfg, truth);
      row.seconds.push_back(rep.wall_seconds);
      row.metrics = rep.metrics;
    }
    row.median_seconds = median(row.seconds);
    cache.emplace(key, row);
    return row;
  };

  PipelineConfig mono = base;
  mono.workers = 1;
  mono.grid = std::make_pair(Index{1}, Index{1});
  mono.rounds = 1;
  auto baseline = measure(mono, "monolithic");
  std::vector<BenchmarkRow> rows{baseline};
  for (const auto& c : cases) {
    PipelineConfig cfg = base;
    cfg.workers = c.workers;
    cfg.grid = c.grid;
    std::string label = "workers=" + std::to_string(c.workers);
    if (c.grid) label += " grid=" + std::to_string(c.grid->first) + "x" + std::to_string(c.grid->second);
    auto row = measure(cfg, label);
    row.speedup = row.median_seconds > 0.0 ? baseline.median_seconds / row.median_seconds : 1.0;
    rows.push_back(std::move(row));
  }
  rows.front().speedup = 1.0;
  return rows;
}

inline nlohmann::json to_json(const BenchmarkRow& r) {
  nlohmann::json j{{"label", r.label},   {"workers", r.workers},
                   {"m", r.m},           {"n", r.n},
                   {"rounds", r.rounds}, {"seconds", r.seconds},
                   {"median_seconds", r.median_seconds}, {"speedup", r.speedup}};
  if (r.metrics) j["metrics"] = to_json(*r.metrics);
  return j;
}

inline std::string benchmark_csv(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream os;
  os << "label,workers,m,n,rounds,median_seconds,speedup\n";
  for (const auto& r : rows)
    os << '"' << r.label << "\"," << r.workers << ',' << r.m << ',' << r.n << ',' << r.rounds << ','
       << r.median_seconds << ',' << r.speedup << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Label files: CSV with header `axis,index,label`, one line per row and
// column, or the truth JSON document.

inline std::string labels_to_csv(const LabelAssignment& labels) {
  std::ostringstream os;
  os << "axis,index,label\n";
  for (std::size_t i = 0; i < labels.row_labels.size(); ++i)
    os << "row," << i << ',' << labels.row_labels[i] << '\n';
  for (std::size_t j = 0; j < labels.col_labels.size(); ++j)
    os << "col," << j << ',' << labels.col_labels[j] << '\n';
  return os.str();
}

inline LabelAssignment load_labels_csv(const std::string& path) {
  auto in = detail::open_input(path);
  std::map<Index, int> rows, cols;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || (lineno == 1 && detail::lower(t).rfind("axis", 0) == 0)) continue;
    const auto c1 = t.find(','), c2 = t.find(',', c1 == std::string_view::npos ? c1 : c1 + 1);
    if (c1 == std::string_view::npos || c2 == std::string_view::npos)
      detail::parse_fail(path, lineno, "expected axis,index,label");
    const auto axis = detail::lower(detail::trim(t.substr(0, c1)));
    Index index = 0;
    int label = 0;
    if (!detail::parse_int(detail::trim(t.substr(c1 + 1, c2 - c1 - 1)), index) || index < 0 ||
        !detail::parse_int(detail::trim(t.substr(c2 + 1)), label) || label < 0)
      detail::parse_fail(path, lineno, "bad index or label");
    if (axis != "row" && axis != "col") detail::parse_fail(path, lineno, "axis must be row or col");
    auto& target = axis == "row" ? rows : cols;
    if (!target.emplace(index, label).second) detail::parse_fail(path, lineno, "duplicate entry");
  }
  LabelAssignment out;
  auto fill = [&](const std::map<Index, int>& m, std::vector<int>& v, int& count, const char* axis) {
    for (const auto& [i, l] : m) {
      if (i != static_cast<Index>(v.size()))
        throw ParseError(path + ": " + axis + " indices must cover 0.." + std::to_string(m.size() - 1));
      v.push_back(l);
      count = std::max(count, l + 1);
    }
  };
  fill(rows, out.row_labels, out.k, "row");
  fill(cols, out.col_labels, out.d, "col");
  return out;
}

// Reads a label file by extension: .json (truth document) or CSV.
inline TruthLabels load_labels(const std::string& path) {
  if (path.size() >= 5 && detail::lower(path.substr(path.size() - 5)) == ".json")
    return truth_from_json(read_json_file(path));
  return TruthLabels{load_labels_csv(path), std::nullopt};
}

}  // namespace lamc
