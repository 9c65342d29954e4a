#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "calseq/backbone.hpp"
#include "calseq/calibration.hpp"
#include "calseq/corpus.hpp"

namespace calseq {

// Position-dependent calibration weight w_k.
//   Prioritized: lambda^(1/k)  (relevance dominates the top ranks)
//   Uniform:     lambda
//   Reverse:     lambda^k
//   None:        0             (plain top-K)
enum class Schedule { Prioritized, Uniform, Reverse, None };

double schedule_weight(double lambda, std::size_t k, Schedule schedule);

struct RerankConfig {
  double lambda = 0.5;
  std::size_t k_max = 10;
  Schedule schedule = Schedule::Prioritized;
  CalibrationMetric metric = CalibrationMetric::Sequential;  // target distribution
  std::optional<std::size_t> top_n;  // nullopt: the whole catalog is the pool
  bool exclude_train_items = true;
};

enum class Baseline { CaliRec, CaliRecPlus, TopK };

// CaliRec: uniform weight, static target. CaliRec+: uniform weight,
// sequential target. TopK: no calibration.
RerankConfig baseline_config(Baseline baseline, double lambda = 0.5);

struct TraceEntry {
  double weight = 0.0;          // w_k
  double delta = 0.0;           // S_KL change caused by this pick
  double relevance_term = 0.0;  // (1 - w_k) * score
  double delta_term = 0.0;      // w_k * delta; objective = relevance_term - delta_term

  bool operator==(const TraceEntry&) const = default;
};

struct RecommendationList {
  UserId user = 0;
  std::vector<ItemId> items;
  std::vector<double> scores;
  std::vector<TraceEntry> trace;

  bool operator==(const RecommendationList&) const = default;
};

// Greedy list construction from precomputed relevance scores (one per
// catalog item). Each step picks the remaining candidate maximizing
// (1 - w_k) r_i - w_k dS_KL(i | list); ties go to the higher score, then the
// lower item id. Throws DomainError when the pool is empty.
RecommendationList rerank_scores(std::span<const double> scores, std::span<const ItemId> prefix,
                                 const Catalog& catalog, const RerankConfig& rcfg,
                                 const CalibrationConfig& ccfg);

RecommendationList rerank(const ModelParams& params, std::span<const ItemId> prefix,
                          const Catalog& catalog, const RerankConfig& rcfg,
                          const CalibrationConfig& ccfg, UserId user = 0);

// One list per evaluation-eligible user, built from the full pre-test prefix.
// The parallel and serial paths produce identical results.
std::map<UserId, RecommendationList> rerank_all(const ModelParams& params, const SplitDataset& split,
                                                const RerankConfig& rcfg,
                                                const CalibrationConfig& ccfg,
                                                Execution execution = Execution::Parallel);

// user_id<TAB>rank<TAB>item_id<TAB>score<TAB>relevance_term<TAB>delta_term
void write_recommendations(std::ostream& out, const std::map<UserId, RecommendationList>& lists,
                           const Dataset& names);

}  // namespace calseq
