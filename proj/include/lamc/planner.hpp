#pragma once

// Probabilistic partition planning: hypergeometric presence model, the
// exponential tail and failure bounds, the minimal sampling-round solver and
// a grid search that trades running time against the detection guarantee.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lamc/error.hpp"
#include "lamc/matrix.hpp"
#include "lamc/random.hpp"

namespace lamc {

// Smallest co-cluster the partition must preserve, and how much of it a
// block has to contain for the atom to see it. A threshold of 0 means "pick
// the default for the block size".
struct CoClusterPrior {
  Index min_rows = 1;
  Index min_cols = 1;
  Index row_threshold = 0;
  Index col_threshold = 0;
};

struct Margins {
  double s = 0.0;
  double t = 0.0;
  bool admissible() const { return s > 0.0 && t > 0.0; }
};

inline double log_binomial(Index n, Index k) {
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

// P(X = observed) for X ~ Hypergeometric(population, successes, draws).
inline double hypergeom_pmf(Index population, Index successes, Index draws,
                            Index observed) {
  if (population < 0 || successes < 0 || successes > population || draws < 0 ||
      draws > population) {
    throw DomainError("invalid hypergeometric parameters (population=" +
                      std::to_string(population) + ", successes=" +
                      std::to_string(successes) + ", draws=" + std::to_string(draws) +
                      ")");
  }
  const Index lo = std::max<Index>(0, draws - (population - successes));
  const Index hi = std::min(successes, draws);
  if (observed < lo || observed > hi) return 0.0;
  if (lo == hi) return 1.0;
  const double lp = log_binomial(successes, observed) +
                    log_binomial(population - successes, draws - observed) -
                    log_binomial(population, draws);
  return std::min(1.0, std::exp(lp));
}

// P(X < threshold), compensated summation over the support.
inline double hypergeom_cdf_below(Index population, Index successes, Index draws,
                                  Index threshold) {
  double sum = 0.0, carry = 0.0;
  for (Index a = 0; a < threshold; ++a) {
    const double y = hypergeom_pmf(population, successes, draws, a) - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return std::min(1.0, sum);
}

inline double margin(double share, Index threshold, Index block) {
  return share - static_cast<double>(threshold - 1) / static_cast<double>(block);
}

// Upper bound on P(X < threshold) when a block of `block` items samples a
// population whose co-cluster share is `share`; 1 when the margin is <= 0.
inline double tail_bound(double share, Index threshold, Index block) {
  if (block < 1 || threshold < 1)
    throw DomainError("tail_bound needs block >= 1 and threshold >= 1");
  const double s = margin(share, threshold, block);
  if (s <= 0.0) return 1.0;
  return std::exp(-2.0 * s * s * static_cast<double>(block));
}

inline void validate_prior(const CoClusterPrior& prior, Index rows, Index cols) {
  auto fail = [](const std::string& what) { throw ConfigError("co-cluster prior: " + what); };
  if (prior.min_rows < 1 || prior.min_rows > rows)
    fail("min_rows must lie in [1, " + std::to_string(rows) + "]");
  if (prior.min_cols < 1 || prior.min_cols > cols)
    fail("min_cols must lie in [1, " + std::to_string(cols) + "]");
  // Thresholds above the co-cluster size are left to the planner, which
  // reports them as inadmissible (no grid gives a positive margin).
  if (prior.row_threshold < 0) fail("row threshold must be >= 1 (0 for automatic)");
  if (prior.col_threshold < 0) fail("column threshold must be >= 1 (0 for automatic)");
}

// Fills in default thresholds for the given block sizes:
// max(3, ceil(0.1 * expected presence)), capped at the co-cluster size.
inline CoClusterPrior resolve_prior(CoClusterPrior prior, Index phi, Index psi,
                                    Index rows, Index cols) {
  auto fill = [](Index given, Index block, Index size, Index total) {
    if (given > 0) return given;
    const double presence = static_cast<double>(block) * static_cast<double>(size) /
                            static_cast<double>(total);
    const auto t = std::max<Index>(3, static_cast<Index>(std::ceil(0.1 * presence)));
    return std::min(t, size);
  };
  prior.row_threshold = fill(prior.row_threshold, phi, prior.min_rows, rows);
  prior.col_threshold = fill(prior.col_threshold, psi, prior.min_cols, cols);
  return prior;
}

inline Margins margins(const CoClusterPrior& prior, Index phi, Index psi, Index rows,
                       Index cols) {
  const auto p = resolve_prior(prior, phi, psi, rows, cols);
  return {margin(static_cast<double>(p.min_rows) / static_cast<double>(rows),
                 p.row_threshold, phi),
          margin(static_cast<double>(p.min_cols) / static_cast<double>(cols),
                 p.col_threshold, psi)};
}

// Bound on a single block missing the co-cluster on both axes; 1 unless
// both margins are positive.
inline double block_failure_bound(const CoClusterPrior& prior, Index phi, Index psi,
                                  Index rows, Index cols) {
  const auto p = resolve_prior(prior, phi, psi, rows, cols);
  if (!margins(p, phi, psi, rows, cols).admissible()) return 1.0;
  return tail_bound(static_cast<double>(p.min_rows) / static_cast<double>(rows),
                    p.row_threshold, phi) *
         tail_bound(static_cast<double>(p.min_cols) / static_cast<double>(cols),
                    p.col_threshold, psi);
}

// phi*m*s^2 + psi*n*t^2; the per-round exponent of the failure bound.
inline double exponent_budget(const CoClusterPrior& prior, Index m, Index n, Index phi,
                              Index psi, Index rows, Index cols) {
  const auto mg = margins(prior, phi, psi, rows, cols);
  if (!mg.admissible()) return 0.0;
  return static_cast<double>(phi) * static_cast<double>(m) * mg.s * mg.s +
         static_cast<double>(psi) * static_cast<double>(n) * mg.t * mg.t;
}

// Bound on the co-cluster being missed by every block of one round:
// exp(-2 [phi m s^2 + psi n t^2]) for uniform phi x psi blocks.
inline double failure_probability_bound(const CoClusterPrior& prior, Index m, Index n,
                                        Index phi, Index psi, Index rows, Index cols) {
  if (m < 1 || n < 1 || phi < 1 || psi < 1)
    throw DomainError("grid counts and block sizes must be >= 1");
  const double budget = exponent_budget(prior, m, n, phi, psi, rows, cols);
  if (budget <= 0.0) return 1.0;
  return std::exp(-2.0 * budget);
}

inline double detection_bound(double budget, Index rounds) {
  return 1.0 - std::exp(-2.0 * static_cast<double>(rounds) * budget);
}

// Smallest T >= 1 with 1 - exp(-2 T budget) >= p_thresh.
inline Index min_sampling_rounds(double budget, double p_thresh) {
  if (!(budget > 0.0)) throw PlannerError("inadmissible margins: exponent budget <= 0");
  if (!(p_thresh < 1.0)) throw PlannerError("unreachable threshold: p_thresh >= 1");
  if (p_thresh < 0.0) throw PlannerError("p_thresh must be >= 0");
  const double raw = std::ceil(std::log1p(-p_thresh) / (-2.0 * budget));
  auto rounds = static_cast<Index>(std::max(1.0, std::min(raw, 1e15)));
  // The closed form can be off by one near the boundary; settle it on the
  // inequality itself.
  while (detection_bound(budget, rounds) < p_thresh) ++rounds;
  while (rounds > 1 && detection_bound(budget, rounds - 1) >= p_thresh) --rounds;
  return rounds;
}

// Estimated cost of one atom call on a phi x psi block.
struct AtomCostModel {
  StorageKind storage = StorageKind::sparse;
  Index singular_pairs = 1;  // l
  std::function<double(Index, Index)> custom;

  double operator()(Index phi, Index psi) const {
    if (custom) return custom(phi, psi);
    const double area = static_cast<double>(phi) * static_cast<double>(psi);
    if (storage == StorageKind::sparse)
      return area * static_cast<double>(singular_pairs + 1);
    return area * static_cast<double>(std::min(phi, psi));
  }
};

struct PartitionPlan {
  Index rows = 0, cols = 0;
  Index m = 1, n = 1;
  Index phi = 0, psi = 0;          // largest block size per axis
  Index phi_min = 0, psi_min = 0;  // smallest block size, used for the bounds
  Index rounds = 1;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> perm_seeds;
  double failure_bound = 1.0;  // single-round, worst prior
  double success_bound = 0.0;  // after all rounds, worst prior
  double p_thresh = 0.0;
  Index row_threshold = 1;  // smallest resolved threshold over priors
  Index col_threshold = 1;
  double estimated_cost = 0.0;
  bool forced = false;  // grid or rounds came from an override

  Grid grid() const { return Grid::uniform(rows, cols, m, n); }
};

inline nlohmann::json to_json(const PartitionPlan& p) {
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& [a, b] : p.perm_seeds) seeds.push_back({a, b});
  return {{"M", p.rows},
          {"N", p.cols},
          {"m", p.m},
          {"n", p.n},
          {"phi", p.phi},
          {"psi", p.psi},
          {"phi_min", p.phi_min},
          {"psi_min", p.psi_min},
          {"rounds", p.rounds},
          {"perm_seeds", seeds},
          {"failure_bound", p.failure_bound},
          {"success_bound", p.success_bound},
          {"p_thresh", p.p_thresh},
          {"row_threshold", p.row_threshold},
          {"col_threshold", p.col_threshold},
          {"estimated_cost", p.estimated_cost},
          {"forced", p.forced}};
}

inline PartitionPlan plan_from_json(const nlohmann::json& j) {
  try {
    PartitionPlan p;
    p.rows = j.at("M").get<Index>();
    p.cols = j.at("N").get<Index>();
    p.m = j.at("m").get<Index>();
    p.n = j.at("n").get<Index>();
    p.phi = j.at("phi").get<Index>();
    p.psi = j.at("psi").get<Index>();
    p.phi_min = j.value("phi_min", p.phi);
    p.psi_min = j.value("psi_min", p.psi);
    p.rounds = j.at("rounds").get<Index>();
    for (const auto& s : j.at("perm_seeds"))
      p.perm_seeds.emplace_back(s.at(0).get<std::uint64_t>(), s.at(1).get<std::uint64_t>());
    p.failure_bound = j.at("failure_bound").get<double>();
    p.success_bound = j.at("success_bound").get<double>();
    p.p_thresh = j.at("p_thresh").get<double>();
    p.row_threshold = j.value("row_threshold", Index{1});
    p.col_threshold = j.value("col_threshold", Index{1});
    p.estimated_cost = j.value("estimated_cost", 0.0);
    p.forced = j.value("forced", false);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("partition plan: ") + e.what());
  }
}

struct PlanRequest {
  Index rows = 0, cols = 0;
  std::vector<CoClusterPrior> priors;
  double p_thresh = 0.95;
  Index workers = 1;
  AtomCostModel cost;
  std::uint64_t root_seed = 0;
  std::optional<std::pair<Index, Index>> grid;  // forced (m, n)
  std::optional<Index> rounds;                  // forced T_p
  Index max_blocks_per_axis = 64;
};

namespace detail {

struct GridEvaluation {
  bool admissible = false;
  Index m = 1, n = 1, phi = 0, psi = 0, phi_min = 0, psi_min = 0;
  Index rounds = 1;
  double failure = 1.0, success = 0.0, cost = 0.0;
  Index row_threshold = 0, col_threshold = 0;
  Margins worst{};  // tightest margins seen, for error reporting
};

inline GridEvaluation evaluate_grid(const PlanRequest& req, Index m, Index n) {
  GridEvaluation ev;
  ev.m = m;
  ev.n = n;
  ev.phi = (req.rows + m - 1) / m;
  ev.psi = (req.cols + n - 1) / n;
  ev.phi_min = req.rows / m;
  ev.psi_min = req.cols / n;
  ev.worst = {std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity()};
  ev.row_threshold = std::numeric_limits<Index>::max();
  ev.col_threshold = std::numeric_limits<Index>::max();
  std::vector<double> budgets;
  bool ok = true;
  for (const auto& prior : req.priors) {
    const auto resolved = resolve_prior(prior, ev.phi_min, ev.psi_min, req.rows, req.cols);
    ev.row_threshold = std::min(ev.row_threshold, resolved.row_threshold);
    ev.col_threshold = std::min(ev.col_threshold, resolved.col_threshold);
    const auto mg = margins(resolved, ev.phi_min, ev.psi_min, req.rows, req.cols);
    ev.worst.s = std::min(ev.worst.s, mg.s);
    ev.worst.t = std::min(ev.worst.t, mg.t);
    if (!mg.admissible()) {
      ok = false;
      continue;
    }
    budgets.push_back(
        exponent_budget(resolved, m, n, ev.phi_min, ev.psi_min, req.rows, req.cols));
  }
  if (!ok) return ev;
  ev.admissible = true;
  ev.rounds = 1;
  for (double b : budgets)
    ev.rounds = std::max(ev.rounds, min_sampling_rounds(b, req.p_thresh));
  if (req.rounds) ev.rounds = *req.rounds;
  ev.failure = 0.0;
  ev.success = 1.0;
  for (double b : budgets) {
    ev.failure = std::max(ev.failure, std::exp(-2.0 * b));
    ev.success = std::min(ev.success, detection_bound(b, ev.rounds));
  }
  const Index workers = std::max<Index>(1, req.workers);
  const Index waves = (m * n + workers - 1) / workers;
  ev.cost = static_cast<double>(ev.rounds) * static_cast<double>(waves) * req.cost(ev.phi, ev.psi);
  return ev;
}

inline std::vector<Index> candidate_counts(Index total, Index workers, Index cap) {
  std::vector<Index> out;
  for (Index c = 1; c <= std::min(total, cap); c *= 2) out.push_back(c);
  for (Index c = 1; c <= std::min(workers, std::min(total, cap)); ++c)
    if (workers % c == 0) out.push_back(c);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

// Picks the uniform grid with the smallest estimated wall time whose
// detection guarantee reaches p_thresh for every prior. Ties resolve towards
// smaller (m, n).
inline PartitionPlan plan_partition(const PlanRequest& req) {
  if (req.rows < 1 || req.cols < 1) throw ConfigError("matrix dimensions must be >= 1");
  if (req.priors.empty()) throw ConfigError("at least one co-cluster prior is required");
  if (!(req.p_thresh >= 0.0 && req.p_thresh < 1.0))
    throw ConfigError("p_thresh must lie in [0, 1)");
  if (req.workers < 1) throw ConfigError("workers must be >= 1");
  if (req.rounds && *req.rounds < 1) throw ConfigError("rounds must be >= 1");
  for (const auto& p : req.priors) validate_prior(p, req.rows, req.cols);

  std::vector<std::pair<Index, Index>> grids;
  if (req.grid) {
    const auto [m, n] = *req.grid;
    if (m < 1 || n < 1 || m > req.rows || n > req.cols)
      throw ConfigError("forced grid " + std::to_string(m) + "x" + std::to_string(n) +
                        " does not fit a " + std::to_string(req.rows) + "x" +
                        std::to_string(req.cols) + " matrix");
    grids.emplace_back(m, n);
  } else {
    for (Index m : detail::candidate_counts(req.rows, req.workers, req.max_blocks_per_axis))
      for (Index n : detail::candidate_counts(req.cols, req.workers, req.max_blocks_per_axis))
        grids.emplace_back(m, n);
  }

  std::optional<detail::GridEvaluation> best;
  Margins tightest{-std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity()};
  std::pair<Index, Index> tightest_grid{0, 0};
  for (const auto& [m, n] : grids) {
    const auto ev = detail::evaluate_grid(req, m, n);
    if (!ev.admissible) {
      if (std::min(ev.worst.s, ev.worst.t) > std::min(tightest.s, tightest.t)) {
        tightest = ev.worst;
        tightest_grid = {m, n};
      }
      continue;
    }
    if (!best || std::tie(ev.cost, ev.m, ev.n) < std::tie(best->cost, best->m, best->n))
      best = ev;
  }
  if (!best) {
    std::ostringstream os;
    os << "no admissible grid: tightest margins s=" << tightest.s << ", t=" << tightest.t
       << " at grid " << tightest_grid.first << "x" << tightest_grid.second
       << " (both must be > 0; lower the thresholds or enlarge the prior)";
    throw PlannerError(os.str());
  }

  PartitionPlan plan;
  plan.rows = req.rows;
  plan.cols = req.cols;
  plan.m = best->m;
  plan.n = best->n;
  plan.phi = best->phi;
  plan.psi = best->psi;
  plan.phi_min = best->phi_min;
  plan.psi_min = best->psi_min;
  plan.rounds = best->rounds;
  plan.failure_bound = best->failure;
  plan.success_bound = best->success;
  plan.p_thresh = req.p_thresh;
  plan.row_threshold = best->row_threshold;
  plan.col_threshold = best->col_threshold;
  plan.estimated_cost = best->cost;
  plan.forced = req.grid.has_value() || req.rounds.has_value();
  for (Index r = 0; r < plan.rounds; ++r) {
    const auto round = static_cast<std::uint64_t>(r);
    plan.perm_seeds.emplace_back(derive_seed({req.root_seed, round, 0}),
                                 derive_seed({req.root_seed, round, 1}));
  }
  return plan;
}

}  // namespace lamc
