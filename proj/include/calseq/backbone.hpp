#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "calseq/calibration.hpp"
#include "calseq/corpus.hpp"

namespace calseq {

enum class Execution { Serial, Parallel };

// Reference sequential scorer: the user state is a recency-weighted mean of
// the embeddings of the last max_seq_len items; the relevance of item i is
// <state, e_i> + b_i.
struct ModelParams {
  std::size_t dim = 0;
  std::size_t num_items = 0;
  double rho = 0.8;
  std::size_t max_seq_len = 50;
  std::vector<double> item_embeddings;  // row-major, num_items x dim
  std::vector<double> item_bias;

  static ModelParams zeros(std::size_t num_items, std::size_t dim, double rho,
                           std::size_t max_seq_len);

  std::span<const double> embedding(ItemId item) const {
    return {item_embeddings.data() + static_cast<std::size_t>(item) * dim, dim};
  }
  std::span<double> embedding(ItemId item) {
    return {item_embeddings.data() + static_cast<std::size_t>(item) * dim, dim};
  }

  bool operator==(const ModelParams&) const = default;
};

enum class LossMode { Combined, BprOnly, CdbprOnly };

struct TrainingConfig {
  double learning_rate = 0.001;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double gamma = 0.1;
  std::size_t dim = 50;
  double rho = 0.8;
  std::size_t max_seq_len = 50;
  double init_scale = 0.1;
  std::uint64_t seed = 42;
  LossMode loss_mode = LossMode::Combined;
  Execution execution = Execution::Parallel;  // margin cache construction only
};

struct TrainingPair {
  UserId user = 0;
  std::size_t step = 1;  // 1-based position of the positive in the sequence
  ItemId positive = 0;
  ItemId negative = 0;
  double margin_gap = 0.0;
};

// Prefix is truncated to the last params.max_seq_len items. Throws DomainError
// on an empty prefix.
std::vector<double> user_state(const ModelParams& params, std::span<const ItemId> prefix);

double score(const ModelParams& params, std::span<const double> state, ItemId item);

// Scores of every catalog item for one state.
std::vector<double> score_all(const ModelParams& params, std::span<const double> state);

// KL(h || p~_pos) - KL(h || p~_neg) where p~_i smooths the item distribution
// toward the history h. No history (step 1) gives 0.
double pair_margin_gap(const std::optional<CategoryDistribution>& history, ItemId pos, ItemId neg,
                       const Catalog& catalog, double beta);

// -ln sigmoid(z), stable for large |z|.
double neg_log_sigmoid(double z);
// sigmoid(z), stable for large |z|.
double sigmoid(double z);

struct PairLosses {
  double bpr = 0.0;
  double cdbpr = 0.0;
};

// prefix holds the user's items before pair.step (may be empty at step 1,
// in which case the state is zero).
PairLosses pair_losses(const ModelParams& params, const TrainingPair& pair,
                       std::span<const ItemId> prefix);

// Accumulated gradient over the rows a batch touched. Rows are kept in
// first-touch order so applying them is deterministic.
class SparseGradient {
 public:
  explicit SparseGradient(std::size_t dim = 0) : dim_(dim) {}

  std::span<double> embedding_row(ItemId item);
  double& bias(ItemId item);

  const std::vector<ItemId>& items() const { return items_; }
  std::span<const double> embedding_grad(std::size_t slot) const {
    return {embedding_.data() + slot * dim_, dim_};
  }
  double bias_grad(std::size_t slot) const { return bias_[slot]; }
  // Zero for rows the batch never touched.
  double embedding_partial(ItemId item, std::size_t k) const;
  double bias_partial(ItemId item) const;

 private:
  std::size_t slot(ItemId item);

  std::size_t dim_;
  std::vector<ItemId> items_;
  std::unordered_map<ItemId, std::size_t> slots_;
  std::vector<double> embedding_;
  std::vector<double> bias_;
};

struct LossBreakdown {
  double total = 0.0;  // the optimized objective under the loss mode
  double bpr = 0.0;
  double cdbpr = 0.0;
};

struct BatchResult {
  LossBreakdown loss;
  SparseGradient grads;
};

// Sum over the batch of the per-mode objective and its exact gradient.
// Throws NumericError naming the pair if a loss is not finite.
BatchResult loss_and_gradients(const ModelParams& params, std::span<const TrainingPair> batch,
                               std::span<const std::span<const ItemId>> prefixes,
                               const TrainingConfig& config);

// Uniform over items absent from sorted_excluded, by rejection.
ItemId sample_negative(std::mt19937_64& rng, std::span<const ItemId> sorted_excluded,
                       std::size_t num_items);

// Per (user, step) history distributions at step t-1 and the positive's KL
// term. These do not depend on the parameters, so they are built once.
class MarginCache {
 public:
  MarginCache(const Dataset& train, const CalibrationConfig& calib, Execution execution);

  // Step is 1-based; step 1 has no history and always yields 0.
  double margin_gap(UserId user, std::size_t step, ItemId negative, const Catalog& catalog) const;

 private:
  struct Entry {
    std::vector<double> history;  // empty at step 1
    double positive_kl = 0.0;
  };
  std::vector<std::vector<Entry>> entries_;  // [user][step - 1]
  double beta_;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  std::size_t pairs = 0;
  double mean_total = 0.0;
  double mean_bpr = 0.0;
  double mean_cdbpr = 0.0;
};

ModelParams initial_params(std::size_t num_items, const TrainingConfig& config);

// Mini-batch SGD over every (user, step) positive of the training sequences.
// Deterministic for a given config and seed.
ModelParams train(const SplitDataset& split, const TrainingConfig& config,
                  const CalibrationConfig& calib,
                  const std::function<void(const EpochStats&)>& on_epoch = {});

}  // namespace calseq
