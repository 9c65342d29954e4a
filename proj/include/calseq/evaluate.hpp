#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "calseq/backbone.hpp"
#include "calseq/calibration.hpp"
#include "calseq/corpus.hpp"
#include "calseq/rerank.hpp"

namespace calseq {

using RecommendationMap = std::map<UserId, RecommendationList>;

// Fraction of users whose list contains their held-out item. Throws
// DomainError on an empty user set or a user with no ground truth.
double hit_rate(const RecommendationMap& lists, const std::map<UserId, ItemId>& truth);

// Mean of 1/log2(rank + 1) for a hit at 1-based rank <= k, else 0.
double ndcg(const RecommendationMap& lists, const std::map<UserId, ItemId>& truth, std::size_t k);

// Per-user sequential miscalibration of each list against the history
// distribution of the user's prefix. The metric is always the sequential one.
std::map<UserId, double> per_user_miscalibration(const RecommendationMap& lists,
                                                 const std::map<UserId, std::vector<ItemId>>& histories,
                                                 const Catalog& catalog,
                                                 const CalibrationConfig& ccfg);

double mean_sequential_miscalibration(const RecommendationMap& lists,
                                      const std::map<UserId, std::vector<ItemId>>& histories,
                                      const Catalog& catalog, const CalibrationConfig& ccfg);

// Full pre-test prefixes (train + validation item) of every evaluated user.
std::map<UserId, std::vector<ItemId>> evaluation_histories(const SplitDataset& split);

struct EvalReport {
  std::size_t k = 10;
  double hr = 0.0;
  double ndcg = 0.0;
  double mean_skl = 0.0;
  std::size_t users_evaluated = 0;
  double lambda = 0.0;
  Schedule schedule = Schedule::Prioritized;
  CalibrationMetric metric = CalibrationMetric::Sequential;

  bool operator==(const EvalReport&) const = default;
};

EvalReport evaluate_lists(const RecommendationMap& lists, const SplitDataset& split,
                          const RerankConfig& rcfg, const CalibrationConfig& ccfg);

// One report per (schedule, lambda) cell: schedule-major, both in the order
// given.
std::vector<EvalReport> lambda_sweep(const ModelParams& params, const SplitDataset& split,
                                     std::span<const double> lambdas,
                                     std::span<const Schedule> schedules, const RerankConfig& base,
                                     const CalibrationConfig& ccfg,
                                     Execution execution = Execution::Parallel);

std::string schedule_name(Schedule schedule);
std::string metric_name(CalibrationMetric metric);

// schedule,metric,lambda,k,hr,ndcg,mean_skl,users
void write_sweep_csv(std::ostream& out, std::span<const EvalReport> reports);

}  // namespace calseq
