#include "calseq/config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "calseq/error.hpp"
#include "calseq/evaluate.hpp"
#include "calseq/io.hpp"

namespace calseq {

namespace {

double to_real(const std::string& key, const std::string& text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("config key " + key + ": expected a number, got '" + text + "'");
  return value;
}

std::uint64_t to_count(const std::string& key, const std::string& text) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("config key " + key + ": expected a non-negative integer, got '" + text + "'");
  return value;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config key " + key + ": expected true/false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& values, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += fmt(values[i]);
  }
  return out;
}

}  // namespace

Schedule parse_schedule(const std::string& text) {
  if (text == "prioritized") return Schedule::Prioritized;
  if (text == "uniform") return Schedule::Uniform;
  if (text == "reverse") return Schedule::Reverse;
  if (text == "none") return Schedule::None;
  throw ConfigError("unknown schedule '" + text + "' (prioritized|uniform|reverse|none)");
}

CalibrationMetric parse_metric(const std::string& text) {
  if (text == "sequential") return CalibrationMetric::Sequential;
  if (text == "static") return CalibrationMetric::Static;
  throw ConfigError("unknown metric '" + text + "' (sequential|static)");
}

LossMode parse_loss_mode(const std::string& text) {
  if (text == "combined") return LossMode::Combined;
  if (text == "bpr_only") return LossMode::BprOnly;
  if (text == "cdbpr_only") return LossMode::CdbprOnly;
  throw ConfigError("unknown loss mode '" + text + "' (combined|bpr_only|cdbpr_only)");
}

std::string loss_mode_name(LossMode mode) {
  switch (mode) {
    case LossMode::BprOnly:
      return "bpr_only";
    case LossMode::CdbprOnly:
      return "cdbpr_only";
    case LossMode::Combined:
      break;
  }
  return "combined";
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k{
      "alpha",      "beta",         "gamma",       "lambda",        "k",
      "schedule",   "metric",       "candidate_pool", "exclude_train_items",
      "learning_rate", "epochs",    "batch_size",  "dim",           "rho",
      "max_seq_len", "init_scale",  "seed",        "loss_mode",     "threads",
      "window",     "intervals",    "lambdas",     "schedules",     "users",
      "items",      "categories",   "mean_length", "drift_rate",    "concentration",
      "drift_period"};
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "alpha") {
    calibration.alpha = to_real(key, value);
    if (!(calibration.alpha > 0.0 && calibration.alpha <= 1.0)) throw ConfigError("alpha must lie in (0,1]");
  } else if (key == "beta") {
    calibration.beta = to_real(key, value);
    if (!(calibration.beta > 0.0 && calibration.beta < 1.0)) throw ConfigError("beta must lie in (0,1)");
  } else if (key == "gamma") {
    training.gamma = to_real(key, value);
    if (!(training.gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  } else if (key == "lambda") {
    rerank.lambda = to_real(key, value);
    if (!(rerank.lambda >= 0.0 && rerank.lambda <= 1.0)) throw ConfigError("lambda must lie in [0,1]");
  } else if (key == "k") {
    rerank.k_max = to_count(key, value);
    if (rerank.k_max == 0) throw ConfigError("k must be >= 1");
  } else if (key == "schedule") {
    rerank.schedule = parse_schedule(value);
  } else if (key == "metric") {
    rerank.metric = parse_metric(value);
  } else if (key == "candidate_pool") {
    if (value == "full" || value == "full_catalog") {
      rerank.top_n.reset();
    } else if (auto colon = value.find(':'); colon != std::string::npos &&
                                             (value.substr(0, colon) == "top" ||
                                              value.substr(0, colon) == "top_n")) {
      auto n = to_count(key, value.substr(colon + 1));
      if (n == 0) throw ConfigError("candidate_pool top_n must be >= 1");
      rerank.top_n = n;
    } else {
      throw ConfigError("candidate_pool must be 'full' or 'top_n:<n>', got '" + value + "'");
    }
  } else if (key == "exclude_train_items") {
    rerank.exclude_train_items = to_bool(key, value);
  } else if (key == "learning_rate") {
    training.learning_rate = to_real(key, value);
  } else if (key == "epochs") {
    training.epochs = to_count(key, value);
  } else if (key == "batch_size") {
    training.batch_size = to_count(key, value);
  } else if (key == "dim") {
    training.dim = to_count(key, value);
  } else if (key == "rho") {
    training.rho = to_real(key, value);
  } else if (key == "max_seq_len") {
    training.max_seq_len = to_count(key, value);
  } else if (key == "init_scale") {
    training.init_scale = to_real(key, value);
  } else if (key == "seed") {
    training.seed = to_count(key, value);
    synthetic.seed = training.seed;
  } else if (key == "loss_mode") {
    training.loss_mode = parse_loss_mode(value);
  } else if (key == "threads") {
    threads = to_count(key, value);
  } else if (key == "window") {
    window = to_count(key, value);
    if (window == 0) throw ConfigError("window must be >= 1");
  } else if (key == "intervals") {
    intervals.clear();
    for (const auto& part : split_list(value)) intervals.push_back(to_count(key, part));
  } else if (key == "lambdas") {
    lambdas.clear();
    for (const auto& part : split_list(value)) {
      double l = to_real(key, part);
      if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("lambdas must lie in [0,1]");
      lambdas.push_back(l);
    }
  } else if (key == "schedules") {
    schedules.clear();
    for (const auto& part : split_list(value)) schedules.push_back(parse_schedule(part));
  } else if (key == "users") {
    synthetic.users = to_count(key, value);
  } else if (key == "items") {
    synthetic.items = to_count(key, value);
  } else if (key == "categories") {
    synthetic.categories = to_count(key, value);
  } else if (key == "mean_length") {
    synthetic.mean_length = to_real(key, value);
  } else if (key == "drift_rate") {
    synthetic.drift_rate = to_real(key, value);
  } else if (key == "concentration") {
    synthetic.concentration = to_real(key, value);
  } else if (key == "drift_period") {
    synthetic.drift_period = to_count(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

std::string RunConfig::get(const std::string& key) const {
  auto num = [](double v) { return format_shortest(v); };
  if (key == "alpha") return num(calibration.alpha);
  if (key == "beta") return num(calibration.beta);
  if (key == "gamma") return num(training.gamma);
  if (key == "lambda") return num(rerank.lambda);
  if (key == "k") return std::to_string(rerank.k_max);
  if (key == "schedule") return schedule_name(rerank.schedule);
  if (key == "metric") return metric_name(rerank.metric);
  if (key == "candidate_pool") return rerank.top_n ? "top_n:" + std::to_string(*rerank.top_n) : "full";
  if (key == "exclude_train_items") return rerank.exclude_train_items ? "true" : "false";
  if (key == "learning_rate") return num(training.learning_rate);
  if (key == "epochs") return std::to_string(training.epochs);
  if (key == "batch_size") return std::to_string(training.batch_size);
  if (key == "dim") return std::to_string(training.dim);
  if (key == "rho") return num(training.rho);
  if (key == "max_seq_len") return std::to_string(training.max_seq_len);
  if (key == "init_scale") return num(training.init_scale);
  if (key == "seed") return std::to_string(training.seed);
  if (key == "loss_mode") return loss_mode_name(training.loss_mode);
  if (key == "threads") return std::to_string(threads);
  if (key == "window") return std::to_string(window);
  if (key == "intervals") return join(intervals, [](std::size_t v) { return std::to_string(v); });
  if (key == "lambdas") return join(lambdas, num);
  if (key == "schedules") return join(schedules, schedule_name);
  if (key == "users") return std::to_string(synthetic.users);
  if (key == "items") return std::to_string(synthetic.items);
  if (key == "categories") return std::to_string(synthetic.categories);
  if (key == "mean_length") return num(synthetic.mean_length);
  if (key == "drift_rate") return num(synthetic.drift_rate);
  if (key == "concentration") return num(synthetic.concentration);
  if (key == "drift_period") return std::to_string(synthetic.drift_period);
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::apply_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (std::find(keys().begin(), keys().end(), key) == keys().end())
      throw ConfigError("unknown config key '" + key + "'");
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_boolean()) {
      text = value.get<bool>() ? "true" : "false";
    } else if (value.is_number()) {
      text = value.dump();
    } else if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (i) text += ',';
        text += value[i].is_string() ? value[i].get<std::string>() : value[i].dump();
      }
    } else {
      throw ConfigError("config key " + key + " has an unsupported value type");
    }
    set(key, text);
  }
}

RunConfig RunConfig::resolve(const nlohmann::json* file,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (file) cfg.apply_json(*file);
  for (const auto& [key, value] : overrides) cfg.set(key, value);
  return cfg;
}

}  // namespace calseq
