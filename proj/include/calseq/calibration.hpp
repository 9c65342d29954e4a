#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "calseq/corpus.hpp"

namespace calseq {

// Dense probability vector over the category set.
class CategoryDistribution {
 public:
  CategoryDistribution() = default;
  // Throws DomainError unless entries are non-negative and sum to 1 (1e-9).
  explicit CategoryDistribution(std::vector<double> probs);

  static CategoryDistribution uniform(std::size_t num_categories);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t c) const { return probs_[c]; }
  std::span<const double> probs() const { return probs_; }

  bool operator==(const CategoryDistribution&) const = default;

 private:
  struct Unchecked {};
  CategoryDistribution(std::vector<double> probs, Unchecked) : probs_(std::move(probs)) {}
  friend CategoryDistribution make_unchecked(std::vector<double> probs);

  std::vector<double> probs_;
};

enum class CalibrationMetric { Sequential, Static };

struct CalibrationConfig {
  double alpha = 0.9;  // recency decay of the history distribution
  double beta = 0.01;  // smoothing weight toward the target
  CalibrationMetric metric = CalibrationMetric::Sequential;

  // The static metric weighs every history step equally.
  double effective_alpha() const { return metric == CalibrationMetric::Static ? 1.0 : alpha; }
};

CategoryDistribution item_distribution(const Catalog& catalog, ItemId item);

// Recency-weighted category distribution of a non-empty prefix: step t of T
// gets weight alpha^(T-t).
CategoryDistribution history_distribution(std::span<const ItemId> prefix, const Catalog& catalog,
                                          const CalibrationConfig& config);

CategoryDistribution list_distribution(std::span<const ItemId> list, const Catalog& catalog);

// (1 - beta) q + beta p, evaluated as q + beta (p - q) so that q == p is an
// exact fixed point.
CategoryDistribution smooth(const CategoryDistribution& q, const CategoryDistribution& p,
                            double beta);

// Natural-log KL(p || q) with 0 log(0/x) = 0. Throws DivergenceError if q has
// no mass where p does.
double kl_divergence(const CategoryDistribution& p, const CategoryDistribution& q);

double sequential_miscalibration(const CategoryDistribution& target, std::span<const ItemId> list,
                                 const Catalog& catalog, const CalibrationConfig& config);

// Running category mass of a partial recommendation list. Lets the greedy
// reranker price a candidate in O(|categories|) without rescanning the list.
class GreedyCalibrationState {
 public:
  GreedyCalibrationState(CategoryDistribution target, const CalibrationConfig& config);

  // S_KL(list + candidate) - S_KL(list), with S_KL of the empty list = 0.
  double delta(ItemId candidate, const Catalog& catalog) const;
  void push(ItemId item, const Catalog& catalog);

  std::size_t list_size() const { return list_size_; }
  std::span<const double> category_mass() const { return mass_; }
  double miscalibration() const { return current_; }
  const CategoryDistribution& target() const { return target_; }
  const CalibrationConfig& config() const { return config_; }
  CategoryDistribution list_distribution() const;

 private:
  double miscalibration_with(ItemId extra, const Catalog& catalog) const;

  CategoryDistribution target_;
  CalibrationConfig config_;
  std::vector<double> mass_;
  std::size_t list_size_ = 0;
  double current_ = 0.0;
};

inline double delta_miscalibration(const GreedyCalibrationState& state, ItemId candidate,
                                   const Catalog& catalog) {
  return state.delta(candidate, catalog);
}

inline GreedyCalibrationState push(GreedyCalibrationState state, ItemId item,
                                   const Catalog& catalog) {
  state.push(item, catalog);
  return state;
}

struct DriftPoint {
  std::size_t interval = 0;
  double mean_kl = 0.0;
  std::size_t count = 0;  // (user, anchor) pairs averaged
};

// Per-user partial sums behind one interval of the drift profile.
struct DriftSamples {
  std::size_t interval = 0;
  std::vector<double> kl_sum;
  std::vector<std::size_t> anchors;

  double mean() const;
  std::size_t count() const;
};

DriftSamples drift_samples(const Dataset& dataset, std::size_t window, std::size_t interval,
                           const CalibrationConfig& config);

// KL between the unweighted category distribution of a window and that of
// the window `interval` steps later (smoothed toward the earlier one), averaged
// over users and anchors. Intervals nobody qualifies for are omitted.
std::vector<DriftPoint> drift_profile(const Dataset& dataset, std::size_t window,
                                      std::span<const std::size_t> intervals,
                                      const CalibrationConfig& config);

// Standard error of DriftSamples::mean under resampling of users.
double drift_bootstrap_stderr(const DriftSamples& samples, std::size_t resamples,
                              std::uint64_t seed);

}  // namespace calseq
