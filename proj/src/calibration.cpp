#include "calseq/calibration.hpp"

#include <cmath>
#include <random>
#include <string>

#include "calseq/error.hpp"

namespace calseq {

CategoryDistribution make_unchecked(std::vector<double> probs) {
  return CategoryDistribution(std::move(probs), CategoryDistribution::Unchecked{});
}

CategoryDistribution::CategoryDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) throw DomainError("category distribution has a negative or NaN entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw DomainError("category distribution sums to " + std::to_string(total));
}

CategoryDistribution CategoryDistribution::uniform(std::size_t num_categories) {
  return make_unchecked(std::vector<double>(num_categories, 1.0 / static_cast<double>(num_categories)));
}

namespace {

void add_item_mass(std::vector<double>& mass, const Catalog& catalog, ItemId item, double weight) {
  auto cats = catalog.categories(item);
  const double share = weight / static_cast<double>(cats.size());
  for (CategoryId c : cats) mass[c] += share;
}

// KL(target || q + beta (target - q)) with q = mass / size.
double smoothed_kl(std::span<const double> target, std::span<const double> mass, double size,
                   double beta) {
  double kl = 0.0;
  for (std::size_t c = 0; c < target.size(); ++c) {
    const double p = target[c];
    if (p == 0.0) continue;
    const double q = mass[c] / size;
    const double smoothed = q + beta * (p - q);
    if (!(smoothed > 0.0)) throw DivergenceError("smoothed list distribution has no mass on a target category");
    kl += p * std::log(p / smoothed);
  }
  return kl;
}

}  // namespace

CategoryDistribution item_distribution(const Catalog& catalog, ItemId item) {
  std::vector<double> probs(catalog.num_categories(), 0.0);
  add_item_mass(probs, catalog, item, 1.0);
  return make_unchecked(std::move(probs));
}

CategoryDistribution history_distribution(std::span<const ItemId> prefix, const Catalog& catalog,
                                          const CalibrationConfig& config) {
  if (prefix.empty()) throw DomainError("history distribution of an empty prefix");
  const double alpha = config.effective_alpha();
  std::vector<double> mass(catalog.num_categories(), 0.0);
  // Walk backwards so the weight is alpha^(T-t) without calling pow.
  double weight = 1.0;
  double total = 0.0;
  for (std::size_t k = prefix.size(); k-- > 0;) {
    add_item_mass(mass, catalog, prefix[k], weight);
    total += weight;
    weight *= alpha;
  }
  for (auto& m : mass) m /= total;
  return make_unchecked(std::move(mass));
}

CategoryDistribution list_distribution(std::span<const ItemId> list, const Catalog& catalog) {
  if (list.empty()) throw DomainError("list distribution of an empty list");
  std::vector<double> mass(catalog.num_categories(), 0.0);
  for (ItemId item : list) add_item_mass(mass, catalog, item, 1.0);
  for (auto& m : mass) m /= static_cast<double>(list.size());
  return make_unchecked(std::move(mass));
}

CategoryDistribution smooth(const CategoryDistribution& q, const CategoryDistribution& p,
                            double beta) {
  if (q.size() != p.size()) throw DomainError("smooth: distributions over different category sets");
  std::vector<double> out(q.size());
  for (std::size_t c = 0; c < q.size(); ++c) out[c] = q[c] + beta * (p[c] - q[c]);
  return make_unchecked(std::move(out));
}

double kl_divergence(const CategoryDistribution& p, const CategoryDistribution& q) {
  if (q.size() != p.size()) throw DomainError("kl: distributions over different category sets");
  double kl = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (p[c] == 0.0) continue;
    if (!(q[c] > 0.0))
      throw DivergenceError("kl: q has no mass on category " + std::to_string(c));
    kl += p[c] * std::log(p[c] / q[c]);
  }
  return kl;
}

double sequential_miscalibration(const CategoryDistribution& target, std::span<const ItemId> list,
                                 const Catalog& catalog, const CalibrationConfig& config) {
  return kl_divergence(target, smooth(list_distribution(list, catalog), target, config.beta));
}

GreedyCalibrationState::GreedyCalibrationState(CategoryDistribution target,
                                               const CalibrationConfig& config)
    : target_(std::move(target)), config_(config), mass_(target_.size(), 0.0) {}

double GreedyCalibrationState::miscalibration_with(ItemId extra, const Catalog& catalog) const {
  auto cats = catalog.categories(extra);
  const double share = 1.0 / static_cast<double>(cats.size());
  const double size = static_cast<double>(list_size_ + 1);
  auto target = target_.probs();
  double kl = 0.0;
  for (std::size_t c = 0; c < target.size(); ++c) {
    const double p = target[c];
    if (p == 0.0) continue;
    double m = mass_[c];
    for (CategoryId ic : cats) {
      if (ic == c) m += share;
    }
    const double q = m / size;
    const double smoothed = q + config_.beta * (p - q);
    if (!(smoothed > 0.0)) throw DivergenceError("smoothed list distribution has no mass on a target category");
    kl += p * std::log(p / smoothed);
  }
  return kl;
}

double GreedyCalibrationState::delta(ItemId candidate, const Catalog& catalog) const {
  return miscalibration_with(candidate, catalog) - current_;
}

void GreedyCalibrationState::push(ItemId item, const Catalog& catalog) {
  add_item_mass(mass_, catalog, item, 1.0);
  ++list_size_;
  current_ = smoothed_kl(target_.probs(), mass_, static_cast<double>(list_size_), config_.beta);
}

CategoryDistribution GreedyCalibrationState::list_distribution() const {
  if (list_size_ == 0) throw DomainError("list distribution of an empty list");
  std::vector<double> probs(mass_);
  for (auto& m : probs) m /= static_cast<double>(list_size_);
  return make_unchecked(std::move(probs));
}

double DriftSamples::mean() const {
  double total = 0.0;
  for (double s : kl_sum) total += s;
  const auto n = count();
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

std::size_t DriftSamples::count() const {
  std::size_t n = 0;
  for (auto a : anchors) n += a;
  return n;
}

DriftSamples drift_samples(const Dataset& dataset, std::size_t window, std::size_t interval,
                           const CalibrationConfig& config) {
  if (window == 0) throw DomainError("drift window must be >= 1");
  const std::size_t num_categories = dataset.catalog.num_categories();
  DriftSamples samples;
  samples.interval = interval;

  std::vector<double> cumulative;
  for (const auto& seq : dataset.sequences) {
    const std::size_t length = seq.items.size();
    if (length < window + interval) continue;
    // cumulative[t * C + c]: category mass of the first t items.
    cumulative.assign((length + 1) * num_categories, 0.0);
    for (std::size_t t = 0; t < length; ++t) {
      std::copy_n(cumulative.begin() + t * num_categories, num_categories,
                  cumulative.begin() + (t + 1) * num_categories);
      std::span<double> row(cumulative.data() + (t + 1) * num_categories, num_categories);
      auto cats = dataset.catalog.categories(seq.items[t]);
      for (CategoryId c : cats) row[c] += 1.0 / static_cast<double>(cats.size());
    }

    double sum = 0.0;
    std::size_t anchors = 0;
    std::vector<double> earlier(num_categories), later(num_categories);
    for (std::size_t end = window; end + interval <= length; ++end) {
      for (std::size_t c = 0; c < num_categories; ++c) {
        earlier[c] = (cumulative[end * num_categories + c] -
                      cumulative[(end - window) * num_categories + c]) /
                     static_cast<double>(window);
        later[c] = (cumulative[(end + interval) * num_categories + c] -
                    cumulative[(end + interval - window) * num_categories + c]) /
                   static_cast<double>(window);
      }
      sum += kl_divergence(make_unchecked(earlier), smooth(make_unchecked(later),
                                                             make_unchecked(earlier), config.beta));
      ++anchors;
    }
    samples.kl_sum.push_back(sum);
    samples.anchors.push_back(anchors);
  }
  return samples;
}

std::vector<DriftPoint> drift_profile(const Dataset& dataset, std::size_t window,
                                      std::span<const std::size_t> intervals,
                                      const CalibrationConfig& config) {
  std::vector<DriftPoint> profile;
  for (std::size_t interval : intervals) {
    auto samples = drift_samples(dataset, window, interval, config);
    if (samples.count() == 0) continue;
    profile.push_back(DriftPoint{interval, samples.mean(), samples.count()});
  }
  return profile;
}

double drift_bootstrap_stderr(const DriftSamples& samples, std::size_t resamples,
                              std::uint64_t seed) {
  const std::size_t users = samples.kl_sum.size();
  if (users < 2 || resamples < 2) return 0.0;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, users - 1);
  std::vector<double> means;
  means.reserve(resamples);
  for (std::size_t r = 0; r < resamples; ++r) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < users; ++k) {
      auto u = pick(rng);
      sum += samples.kl_sum[u];
      n += samples.anchors[u];
    }
    means.push_back(n == 0 ? 0.0 : sum / static_cast<double>(n));
  }
  double mu = 0.0;
  for (double m : means) mu += m;
  mu /= static_cast<double>(means.size());
  double var = 0.0;
  for (double m : means) var += (m - mu) * (m - mu);
  return std::sqrt(var / static_cast<double>(means.size() - 1));
}

}  // namespace calseq
