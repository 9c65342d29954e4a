#include "calseq/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>

#include "calseq/error.hpp"
#include "calseq/io.hpp"

namespace calseq {

double schedule_weight(double lambda, std::size_t k, Schedule schedule) {
  if (k == 0) throw DomainError("list positions are 1-based");
  if (lambda <= 0.0 || schedule == Schedule::None) return 0.0;
  if (lambda >= 1.0) return 1.0;
  switch (schedule) {
    case Schedule::Prioritized:
      return std::pow(lambda, 1.0 / static_cast<double>(k));
    case Schedule::Uniform:
      return lambda;
    case Schedule::Reverse:
      return std::pow(lambda, static_cast<double>(k));
    case Schedule::None:
      break;
  }
  return 0.0;
}

RerankConfig baseline_config(Baseline baseline, double lambda) {
  RerankConfig cfg;
  cfg.lambda = lambda;
  switch (baseline) {
    case Baseline::CaliRec:
      cfg.schedule = Schedule::Uniform;
      cfg.metric = CalibrationMetric::Static;
      break;
    case Baseline::CaliRecPlus:
      cfg.schedule = Schedule::Uniform;
      cfg.metric = CalibrationMetric::Sequential;
      break;
    case Baseline::TopK:
      cfg.schedule = Schedule::None;
      break;
  }
  return cfg;
}

namespace {

// Higher score first, then lower id.
bool ranks_before(double score_a, ItemId a, double score_b, ItemId b) {
  if (score_a != score_b) return score_a > score_b;
  return a < b;
}

std::vector<ItemId> candidate_pool(std::span<const double> scores, std::span<const ItemId> prefix,
                                   const RerankConfig& rcfg) {
  std::vector<char> excluded(scores.size(), 0);
  if (rcfg.exclude_train_items) {
    for (ItemId item : prefix) {
      if (item < excluded.size()) excluded[item] = 1;
    }
  }
  std::vector<ItemId> pool;
  pool.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!excluded[i]) pool.push_back(static_cast<ItemId>(i));
  }
  if (rcfg.top_n && *rcfg.top_n < pool.size()) {
    auto cmp = [&](ItemId a, ItemId b) { return ranks_before(scores[a], a, scores[b], b); };
    std::nth_element(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(*rcfg.top_n), pool.end(), cmp);
    pool.resize(*rcfg.top_n);
    std::sort(pool.begin(), pool.end());
  }
  return pool;
}

}  // namespace

RecommendationList rerank_scores(std::span<const double> scores, std::span<const ItemId> prefix,
                                 const Catalog& catalog, const RerankConfig& rcfg,
                                 const CalibrationConfig& ccfg) {
  if (prefix.empty()) throw DomainError("rerank needs a non-empty history");
  if (scores.size() != catalog.num_items()) throw DomainError("one score per catalog item required");
  if (rcfg.lambda < 0.0 || rcfg.lambda > 1.0) throw DomainError("lambda must lie in [0,1]");

  auto pool = candidate_pool(scores, prefix, rcfg);
  if (pool.empty()) throw DomainError("candidate pool is empty");

  CalibrationConfig target_cfg = ccfg;
  target_cfg.metric = rcfg.metric;
  GreedyCalibrationState state(history_distribution(prefix, catalog, target_cfg), target_cfg);

  const std::size_t length = std::min(rcfg.k_max, pool.size());
  RecommendationList list;
  list.items.reserve(length);
  list.scores.reserve(length);
  list.trace.reserve(length);

  for (std::size_t k = 1; k <= length; ++k) {
    const double w = schedule_weight(rcfg.lambda, k, rcfg.schedule);
    std::size_t best = 0;
    double best_objective = 0.0;
    for (std::size_t n = 0; n < pool.size(); ++n) {
      const ItemId item = pool[n];
      const double s = scores[item];
      const double objective = w == 0.0 ? s : (1.0 - w) * s - w * state.delta(item, catalog);
      if (n == 0 || objective > best_objective ||
          (objective == best_objective && ranks_before(s, item, scores[pool[best]], pool[best]))) {
        best = n;
        best_objective = objective;
      }
    }
    const ItemId chosen = pool[best];
    TraceEntry entry;
    entry.weight = w;
    entry.delta = state.delta(chosen, catalog);
    entry.relevance_term = (1.0 - w) * scores[chosen];
    entry.delta_term = w * entry.delta;
    list.items.push_back(chosen);
    list.scores.push_back(scores[chosen]);
    list.trace.push_back(entry);
    state.push(chosen, catalog);
    pool[best] = pool.back();
    pool.pop_back();
  }
  return list;
}

RecommendationList rerank(const ModelParams& params, std::span<const ItemId> prefix,
                          const Catalog& catalog, const RerankConfig& rcfg,
                          const CalibrationConfig& ccfg, UserId user) {
  if (prefix.empty()) throw DomainError("rerank needs a non-empty history");
  auto state = user_state(params, prefix);
  auto scores = score_all(params, state);
  auto list = rerank_scores(scores, prefix, catalog, rcfg, ccfg);
  list.user = user;
  return list;
}

std::map<UserId, RecommendationList> rerank_all(const ModelParams& params, const SplitDataset& split,
                                                const RerankConfig& rcfg,
                                                const CalibrationConfig& ccfg,
                                                Execution execution) {
  std::vector<UserId> users;
  users.reserve(split.test_target.size());
  for (const auto& [user, item] : split.test_target) {
    if (split.validation_target.contains(user)) users.push_back(user);
  }
  const Catalog& catalog = split.train.catalog;
  std::vector<RecommendationList> lists(users.size());
  const auto n = static_cast<std::ptrdiff_t>(users.size());
  auto one = [&](std::ptrdiff_t idx) {
    auto prefix = evaluation_prefix(split, users[idx]);
    lists[idx] = rerank(params, prefix, catalog, rcfg, ccfg, users[idx]);
  };

  if (execution == Execution::Parallel) {
    // Exceptions may not cross the OpenMP region; keep the first and rethrow.
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t idx = 0; idx < n; ++idx) {
      try {
        one(idx);
      } catch (...) {
#pragma omp critical(calseq_rerank_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (std::ptrdiff_t idx = 0; idx < n; ++idx) one(idx);
  }

  std::map<UserId, RecommendationList> out;
  for (std::size_t idx = 0; idx < users.size(); ++idx) out.emplace(users[idx], std::move(lists[idx]));
  return out;
}

void write_recommendations(std::ostream& out, const std::map<UserId, RecommendationList>& lists,
                           const Dataset& names) {
  out << "user_id\trank\titem_id\tscore\trelevance_term\tdelta_term\n";
  for (const auto& [user, list] : lists) {
    for (std::size_t r = 0; r < list.items.size(); ++r) {
      out << names.user_names.at(user) << '\t' << (r + 1) << '\t'
          << names.catalog.item_name(list.items[r]) << '\t' << format_shortest(list.scores[r]) << '\t'
          << format_shortest(list.trace[r].relevance_term) << '\t'
          << format_shortest(list.trace[r].delta_term) << '\n';
    }
  }
}

}  // namespace calseq
