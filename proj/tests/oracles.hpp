#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. None of these call the incremental code paths they check.

#include <cmath>
#include <span>
#include <vector>

#include "calseq/calibration.hpp"
#include "calseq/rerank.hpp"

namespace calseq::test {

// Textbook miscalibration of a list against a target: count category shares,
// smooth with (1-b)q + b p, sum p ln(p/q~).
inline double brute_miscalibration(const std::vector<double>& target, const std::vector<ItemId>& list,
                                   const Catalog& catalog, double beta) {
  if (list.empty()) return 0.0;
  std::vector<double> q(target.size(), 0.0);
  for (ItemId i : list) {
    auto cats = catalog.categories(i);
    for (CategoryId c : cats) q[c] += 1.0 / cats.size() / list.size();
  }
  double kl = 0.0;
  for (std::size_t c = 0; c < target.size(); ++c) {
    if (target[c] > 0) kl += target[c] * std::log(target[c] / ((1 - beta) * q[c] + beta * target[c]));
  }
  return kl;
}

inline std::vector<double> brute_history(const std::vector<ItemId>& prefix, const Catalog& catalog,
                                         double alpha) {
  std::vector<double> p(catalog.num_categories(), 0.0);
  double total = 0.0;
  const auto T = prefix.size();
  for (std::size_t t = 1; t <= T; ++t) {
    const double w = std::pow(alpha, static_cast<double>(T - t));
    auto cats = catalog.categories(prefix[t - 1]);
    for (CategoryId c : cats) p[c] += w / cats.size();
    total += w;
  }
  for (auto& x : p) x /= total;
  return p;
}

// Full recomputation with the empty-list convention S_KL = 0.
inline double full_miscalibration(const CategoryDistribution& target, std::span<const ItemId> list,
                                  const Catalog& catalog, const CalibrationConfig& ccfg) {
  return list.empty() ? 0.0 : sequential_miscalibration(target, list, catalog, ccfg);
}

struct GreedyMismatch {
  std::size_t position = 0;  // 1-based; 0 means no mismatch
  ItemId expected = 0;
  ItemId actual = 0;
};

// Replays a reranked list step by step. At every position the whole remaining
// pool is rescanned with S_KL recomputed from scratch for list + candidate.
inline GreedyMismatch exhaustive_greedy_check(const RecommendationList& list,
                                              std::span<const double> scores,
                                              std::vector<ItemId> pool,
                                              const CategoryDistribution& target,
                                              const Catalog& catalog, const RerankConfig& rcfg,
                                              const CalibrationConfig& ccfg) {
  std::vector<ItemId> chosen;
  for (std::size_t k = 1; k <= list.items.size(); ++k) {
    const double w = schedule_weight(rcfg.lambda, k, rcfg.schedule);
    const double before = full_miscalibration(target, chosen, catalog, ccfg);
    std::size_t best = 0;
    double best_obj = 0.0;
    for (std::size_t n = 0; n < pool.size(); ++n) {
      auto extended = chosen;
      extended.push_back(pool[n]);
      const double delta = sequential_miscalibration(target, extended, catalog, ccfg) - before;
      const double s = scores[pool[n]];
      const double obj = w == 0.0 ? s : (1 - w) * s - w * delta;
      const double bs = scores[pool[best]];
      if (n == 0 || obj > best_obj ||
          (obj == best_obj && (s > bs || (s == bs && pool[n] < pool[best])))) {
        best = n;
        best_obj = obj;
      }
    }
    if (pool[best] != list.items[k - 1]) return {k, pool[best], list.items[k - 1]};
    chosen.push_back(pool[best]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return {};
}

}  // namespace calseq::test
