#include "calseq/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "calseq/error.hpp"

namespace calseq {

ModelParams ModelParams::zeros(std::size_t num_items, std::size_t dim, double rho,
                               std::size_t max_seq_len) {
  ModelParams params;
  params.dim = dim;
  params.num_items = num_items;
  params.rho = rho;
  params.max_seq_len = max_seq_len;
  params.item_embeddings.assign(num_items * dim, 0.0);
  params.item_bias.assign(num_items, 0.0);
  return params;
}

namespace {

std::span<const ItemId> truncate(std::span<const ItemId> prefix, std::size_t max_len) {
  if (max_len > 0 && prefix.size() > max_len) return prefix.last(max_len);
  return prefix;
}

// Normalized recency weights rho^(T-tau) over a truncated prefix.
std::vector<double> recency_weights(std::size_t length, double rho) {
  std::vector<double> w(length);
  double weight = 1.0;
  double total = 0.0;
  for (std::size_t k = length; k-- > 0;) {
    w[k] = weight;
    total += weight;
    weight *= rho;
  }
  for (auto& x : w) x /= total;
  return w;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double item_kl(std::span<const double> history, ItemId item, const Catalog& catalog, double beta) {
  // KL(h || p_i + beta (h - p_i)) with p_i uniform over the item's categories.
  auto cats = catalog.categories(item);
  const double share = 1.0 / static_cast<double>(cats.size());
  double kl = 0.0;
  for (std::size_t c = 0; c < history.size(); ++c) {
    const double h = history[c];
    if (h == 0.0) continue;
    double p = 0.0;
    for (CategoryId ic : cats) {
      if (ic == c) p = share;
    }
    kl += h * std::log(h / (p + beta * (h - p)));
  }
  return kl;
}

}  // namespace

std::vector<double> user_state(const ModelParams& params, std::span<const ItemId> prefix) {
  if (prefix.empty()) throw DomainError("user state of an empty prefix");
  auto window = truncate(prefix, params.max_seq_len);
  auto w = recency_weights(window.size(), params.rho);
  std::vector<double> h(params.dim, 0.0);
  for (std::size_t t = 0; t < window.size(); ++t) {
    auto e = params.embedding(window[t]);
    for (std::size_t k = 0; k < params.dim; ++k) h[k] += w[t] * e[k];
  }
  return h;
}

double score(const ModelParams& params, std::span<const double> state, ItemId item) {
  return dot(state, params.embedding(item)) + params.item_bias[item];
}

std::vector<double> score_all(const ModelParams& params, std::span<const double> state) {
  std::vector<double> scores(params.num_items);
  for (std::size_t i = 0; i < params.num_items; ++i) scores[i] = score(params, state, static_cast<ItemId>(i));
  return scores;
}

double pair_margin_gap(const std::optional<CategoryDistribution>& history, ItemId pos, ItemId neg,
                       const Catalog& catalog, double beta) {
  if (!history) return 0.0;
  auto h = history->probs();
  return item_kl(h, pos, catalog, beta) - item_kl(h, neg, catalog, beta);
}

double neg_log_sigmoid(double z) {
  if (z >= 0.0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

struct PairEval {
  double x = 0.0;
  std::vector<double> state;  // zero vector when the prefix is empty
  std::vector<double> weights;
  std::span<const ItemId> window;
};

PairEval evaluate_pair(const ModelParams& params, const TrainingPair& pair,
                       std::span<const ItemId> prefix) {
  PairEval ev;
  if (prefix.empty()) {
    ev.state.assign(params.dim, 0.0);
  } else {
    ev.window = truncate(prefix, params.max_seq_len);
    ev.weights = recency_weights(ev.window.size(), params.rho);
    ev.state = user_state(params, prefix);
  }
  ev.x = score(params, ev.state, pair.positive) - score(params, ev.state, pair.negative);
  return ev;
}

struct ModeWeights {
  double bpr;
  double cdbpr;
};

ModeWeights mode_weights(const TrainingConfig& config) {
  switch (config.loss_mode) {
    case LossMode::BprOnly:
      return {1.0, 0.0};
    case LossMode::CdbprOnly:
      return {0.0, 1.0};
    case LossMode::Combined:
    default:
      return {1.0, config.gamma};
  }
}

}  // namespace

PairLosses pair_losses(const ModelParams& params, const TrainingPair& pair,
                       std::span<const ItemId> prefix) {
  auto ev = evaluate_pair(params, pair, prefix);
  return {neg_log_sigmoid(ev.x), neg_log_sigmoid(ev.x - pair.margin_gap)};
}

std::size_t SparseGradient::slot(ItemId item) {
  auto [it, inserted] = slots_.emplace(item, items_.size());
  if (inserted) {
    items_.push_back(item);
    embedding_.resize(embedding_.size() + dim_, 0.0);
    bias_.push_back(0.0);
  }
  return it->second;
}

std::span<double> SparseGradient::embedding_row(ItemId item) {
  auto s = slot(item);
  return {embedding_.data() + s * dim_, dim_};
}

double& SparseGradient::bias(ItemId item) { return bias_[slot(item)]; }

double SparseGradient::embedding_partial(ItemId item, std::size_t k) const {
  auto it = slots_.find(item);
  return it == slots_.end() ? 0.0 : embedding_[it->second * dim_ + k];
}

double SparseGradient::bias_partial(ItemId item) const {
  auto it = slots_.find(item);
  return it == slots_.end() ? 0.0 : bias_[it->second];
}

BatchResult loss_and_gradients(const ModelParams& params, std::span<const TrainingPair> batch,
                               std::span<const std::span<const ItemId>> prefixes,
                               const TrainingConfig& config) {
  if (batch.empty()) throw DomainError("empty training batch");
  if (prefixes.size() != batch.size()) throw DomainError("one prefix per training pair required");
  const auto mode = mode_weights(config);
  const std::size_t dim = params.dim;

  BatchResult result{LossBreakdown{}, SparseGradient(dim)};
  std::vector<double> diff(dim);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& pair = batch[n];
    auto ev = evaluate_pair(params, pair, prefixes[n]);
    const double z_cd = ev.x - pair.margin_gap;
    const double bpr = neg_log_sigmoid(ev.x);
    const double cdbpr = neg_log_sigmoid(z_cd);
    const double total = mode.bpr * bpr + mode.cdbpr * cdbpr;
    if (!std::isfinite(total) || !std::isfinite(bpr) || !std::isfinite(cdbpr))
      throw NumericError("non-finite loss for user " + std::to_string(pair.user) + " step " +
                         std::to_string(pair.step));
    result.loss.total += total;
    result.loss.bpr += bpr;
    result.loss.cdbpr += cdbpr;

    // d(-ln sigmoid(z))/dz = -sigmoid(-z); the margin gap is constant.
    const double g = -mode.bpr * sigmoid(-ev.x) - mode.cdbpr * sigmoid(-z_cd);

    auto e_pos = params.embedding(pair.positive);
    auto e_neg = params.embedding(pair.negative);
    for (std::size_t k = 0; k < dim; ++k) diff[k] = e_pos[k] - e_neg[k];

    {
      auto row = result.grads.embedding_row(pair.positive);
      for (std::size_t k = 0; k < dim; ++k) row[k] += g * ev.state[k];
    }
    {
      auto row = result.grads.embedding_row(pair.negative);
      for (std::size_t k = 0; k < dim; ++k) row[k] -= g * ev.state[k];
    }
    result.grads.bias(pair.positive) += g;
    result.grads.bias(pair.negative) -= g;
    for (std::size_t t = 0; t < ev.window.size(); ++t) {
      auto row = result.grads.embedding_row(ev.window[t]);
      const double scale = g * ev.weights[t];
      for (std::size_t k = 0; k < dim; ++k) row[k] += scale * diff[k];
    }
  }
  return result;
}

ItemId sample_negative(std::mt19937_64& rng, std::span<const ItemId> sorted_excluded,
                       std::size_t num_items) {
  if (num_items == 0 || sorted_excluded.size() >= num_items)
    throw DomainError("no eligible negative item");
  std::uniform_int_distribution<ItemId> pick(0, static_cast<ItemId>(num_items - 1));
  while (true) {
    ItemId candidate = pick(rng);
    if (!std::binary_search(sorted_excluded.begin(), sorted_excluded.end(), candidate))
      return candidate;
  }
}

MarginCache::MarginCache(const Dataset& train, const CalibrationConfig& calib, Execution execution)
    : entries_(train.sequences.size()), beta_(calib.beta) {
  CalibrationConfig sequential = calib;
  sequential.metric = CalibrationMetric::Sequential;
  const auto users = static_cast<std::ptrdiff_t>(train.sequences.size());
  auto build = [&](std::ptrdiff_t u) {
    const auto& items = train.sequences[u].items;
    auto& rows = entries_[u];
    rows.resize(items.size());
    const std::size_t num_categories = train.catalog.num_categories();
    const double alpha = sequential.effective_alpha();
    // Decayed category mass of the prefix: mass <- alpha * mass + p(s_t).
    std::vector<double> mass(num_categories, 0.0);
    double total = 0.0;
    for (std::size_t step = 2; step <= items.size(); ++step) {
      for (auto& m : mass) m *= alpha;
      auto cats = train.catalog.categories(items[step - 2]);
      for (CategoryId c : cats) mass[c] += 1.0 / static_cast<double>(cats.size());
      total = alpha * total + 1.0;
      auto& entry = rows[step - 1];
      entry.history.resize(num_categories);
      for (std::size_t c = 0; c < num_categories; ++c) entry.history[c] = mass[c] / total;
      entry.positive_kl = item_kl(entry.history, items[step - 1], train.catalog, beta_);
    }
  };
  if (execution == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t u = 0; u < users; ++u) build(u);
  } else {
    for (std::ptrdiff_t u = 0; u < users; ++u) build(u);
  }
}

double MarginCache::margin_gap(UserId user, std::size_t step, ItemId negative,
                               const Catalog& catalog) const {
  const auto& entry = entries_.at(user).at(step - 1);
  if (entry.history.empty()) return 0.0;
  return entry.positive_kl - item_kl(entry.history, negative, catalog, beta_);
}

ModelParams initial_params(std::size_t num_items, const TrainingConfig& config) {
  auto params = ModelParams::zeros(num_items, config.dim, config.rho, config.max_seq_len);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> init(-config.init_scale, config.init_scale);
  for (auto& x : params.item_embeddings) x = init(rng);
  return params;
}

ModelParams train(const SplitDataset& split, const TrainingConfig& config,
                  const CalibrationConfig& calib,
                  const std::function<void(const EpochStats&)>& on_epoch) {
  if (config.dim == 0) throw ConfigError("dim must be >= 1");
  if (config.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(config.rho > 0.0 && config.rho <= 1.0)) throw ConfigError("rho must lie in (0,1]");
  if (!(config.gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (!(config.init_scale > 0.0)) throw ConfigError("init_scale must be positive");

  const Dataset& data = split.train;
  const Catalog& catalog = data.catalog;
  const std::size_t num_items = catalog.num_items();
  ModelParams params = initial_params(num_items, config);

  MarginCache margins(data, calib, config.execution);

  struct Positive {
    UserId user;
    std::size_t step;
  };
  std::vector<Positive> positives;
  std::vector<std::vector<ItemId>> excluded(data.sequences.size());
  for (const auto& seq : data.sequences) {
    auto& ex = excluded[seq.user];
    ex = seq.items;
    std::sort(ex.begin(), ex.end());
    ex.erase(std::unique(ex.begin(), ex.end()), ex.end());
    if (ex.size() >= num_items) continue;  // nothing left to sample as a negative
    for (std::size_t step = 1; step <= seq.items.size(); ++step) positives.push_back({seq.user, step});
  }

  // The initializer consumed its own stream; shuffling and negatives use a
  // second one derived from the same seed.
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<TrainingPair> batch;
  std::vector<std::span<const ItemId>> prefixes;
  batch.reserve(config.batch_size);
  prefixes.reserve(config.batch_size);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(positives.begin(), positives.end(), rng);
    LossBreakdown sums;
    for (std::size_t start = 0; start < positives.size(); start += config.batch_size) {
      const std::size_t end = std::min(positives.size(), start + config.batch_size);
      batch.clear();
      prefixes.clear();
      for (std::size_t n = start; n < end; ++n) {
        const auto& pos = positives[n];
        const auto& items = data.sequences[pos.user].items;
        TrainingPair pair;
        pair.user = pos.user;
        pair.step = pos.step;
        pair.positive = items[pos.step - 1];
        pair.negative = sample_negative(rng, excluded[pos.user], num_items);
        pair.margin_gap = margins.margin_gap(pos.user, pos.step, pair.negative, catalog);
        batch.push_back(pair);
        prefixes.push_back(std::span<const ItemId>(items).first(pos.step - 1));
      }

      BatchResult result = [&] {
        try {
          return loss_and_gradients(params, batch, prefixes, config);
        } catch (const NumericError& e) {
          throw NumericError("epoch " + std::to_string(epoch) + ", batch starting at " +
                             std::to_string(start) + ": " + e.what());
        }
      }();
      sums.total += result.loss.total;
      sums.bpr += result.loss.bpr;
      sums.cdbpr += result.loss.cdbpr;

      const auto& touched = result.grads.items();
      for (std::size_t s = 0; s < touched.size(); ++s) {
        const ItemId item = touched[s];
        auto row = params.embedding(item);
        auto grad = result.grads.embedding_grad(s);
        bool finite = true;
        for (std::size_t k = 0; k < params.dim; ++k) {
          row[k] -= config.learning_rate * grad[k];
          finite = finite && std::isfinite(row[k]);
        }
        params.item_bias[item] -= config.learning_rate * result.grads.bias_grad(s);
        if (!finite || !std::isfinite(params.item_bias[item]))
          throw NumericError("epoch " + std::to_string(epoch) + ", batch starting at " +
                             std::to_string(start) + ": parameters of item " +
                             std::to_string(item) + " became non-finite");
      }
    }
    if (on_epoch) {
      EpochStats stats;
      stats.epoch = epoch;
      stats.pairs = positives.size();
      const double n = positives.empty() ? 1.0 : static_cast<double>(positives.size());
      stats.mean_total = sums.total / n;
      stats.mean_bpr = sums.bpr / n;
      stats.mean_cdbpr = sums.cdbpr / n;
      on_epoch(stats);
    }
  }
  return params;
}

}  // namespace calseq
