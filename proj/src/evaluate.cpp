#include "calseq/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "calseq/error.hpp"
#include "calseq/io.hpp"

namespace calseq {

namespace {

// 1-based rank of the truth item within the first k positions, 0 if absent.
std::size_t hit_rank(const RecommendationList& list, ItemId truth, std::size_t k) {
  const std::size_t n = std::min(k, list.items.size());
  for (std::size_t r = 0; r < n; ++r) {
    if (list.items[r] == truth) return r + 1;
  }
  return 0;
}

ItemId truth_of(const std::map<UserId, ItemId>& truth, UserId user) {
  auto it = truth.find(user);
  if (it == truth.end()) throw DomainError("no ground truth for user " + std::to_string(user));
  return it->second;
}

}  // namespace

double hit_rate(const RecommendationMap& lists, const std::map<UserId, ItemId>& truth) {
  if (lists.empty()) throw DomainError("hit rate over an empty user set");
  std::size_t hits = 0;
  for (const auto& [user, list] : lists) {
    if (hit_rank(list, truth_of(truth, user), list.items.size()) > 0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(lists.size());
}

double ndcg(const RecommendationMap& lists, const std::map<UserId, ItemId>& truth, std::size_t k) {
  if (lists.empty()) throw DomainError("nDCG over an empty user set");
  double total = 0.0;
  for (const auto& [user, list] : lists) {
    auto rank = hit_rank(list, truth_of(truth, user), k);
    if (rank > 0) total += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
  }
  return total / static_cast<double>(lists.size());
}

std::map<UserId, double> per_user_miscalibration(const RecommendationMap& lists,
                                                 const std::map<UserId, std::vector<ItemId>>& histories,
                                                 const Catalog& catalog,
                                                 const CalibrationConfig& ccfg) {
  CalibrationConfig sequential = ccfg;
  sequential.metric = CalibrationMetric::Sequential;
  std::map<UserId, double> out;
  for (const auto& [user, list] : lists) {
    auto it = histories.find(user);
    if (it == histories.end()) throw DomainError("no history for user " + std::to_string(user));
    auto target = history_distribution(it->second, catalog, sequential);
    out.emplace(user, sequential_miscalibration(target, list.items, catalog, sequential));
  }
  return out;
}

double mean_sequential_miscalibration(const RecommendationMap& lists,
                                      const std::map<UserId, std::vector<ItemId>>& histories,
                                      const Catalog& catalog, const CalibrationConfig& ccfg) {
  if (lists.empty()) throw DomainError("miscalibration over an empty user set");
  double total = 0.0;
  for (const auto& [user, value] : per_user_miscalibration(lists, histories, catalog, ccfg))
    total += value;
  return total / static_cast<double>(lists.size());
}

std::map<UserId, std::vector<ItemId>> evaluation_histories(const SplitDataset& split) {
  std::map<UserId, std::vector<ItemId>> out;
  for (const auto& [user, item] : split.test_target) {
    auto prefix = evaluation_prefix(split, user);
    if (!prefix.empty()) out.emplace(user, std::move(prefix));
  }
  return out;
}

EvalReport evaluate_lists(const RecommendationMap& lists, const SplitDataset& split,
                          const RerankConfig& rcfg, const CalibrationConfig& ccfg) {
  EvalReport report;
  report.k = rcfg.k_max;
  report.lambda = rcfg.lambda;
  report.schedule = rcfg.schedule;
  report.metric = rcfg.metric;
  report.users_evaluated = lists.size();
  report.hr = hit_rate(lists, split.test_target);
  report.ndcg = ndcg(lists, split.test_target, rcfg.k_max);
  report.mean_skl =
      mean_sequential_miscalibration(lists, evaluation_histories(split), split.train.catalog, ccfg);
  return report;
}

std::vector<EvalReport> lambda_sweep(const ModelParams& params, const SplitDataset& split,
                                     std::span<const double> lambdas,
                                     std::span<const Schedule> schedules, const RerankConfig& base,
                                     const CalibrationConfig& ccfg, Execution execution) {
  std::vector<EvalReport> reports;
  reports.reserve(lambdas.size() * schedules.size());
  for (Schedule schedule : schedules) {
    for (double lambda : lambdas) {
      RerankConfig cfg = base;
      cfg.schedule = schedule;
      cfg.lambda = lambda;
      auto lists = rerank_all(params, split, cfg, ccfg, execution);
      reports.push_back(evaluate_lists(lists, split, cfg, ccfg));
    }
  }
  return reports;
}

std::string schedule_name(Schedule schedule) {
  switch (schedule) {
    case Schedule::Prioritized:
      return "prioritized";
    case Schedule::Uniform:
      return "uniform";
    case Schedule::Reverse:
      return "reverse";
    case Schedule::None:
      return "none";
  }
  return "unknown";
}

std::string metric_name(CalibrationMetric metric) {
  return metric == CalibrationMetric::Static ? "static" : "sequential";
}

void write_sweep_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "schedule,metric,lambda,k,hr,ndcg,mean_skl,users\n";
  for (const auto& r : reports) {
    out << schedule_name(r.schedule) << ',' << metric_name(r.metric) << ',' << format_shortest(r.lambda)
        << ',' << r.k << ',' << format_shortest(r.hr) << ',' << format_shortest(r.ndcg) << ','
        << format_shortest(r.mean_skl) << ',' << r.users_evaluated << '\n';
  }
}

}  // namespace calseq
