#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "calseq/backbone.hpp"
#include "calseq/calibration.hpp"
#include "calseq/corpus.hpp"
#include "calseq/rerank.hpp"

namespace calseq {

// Every tunable of the pipeline behind one flat key space. Config files and
// command-line flags use the same keys (flags spell '_' as '-').
struct RunConfig {
  CalibrationConfig calibration;
  TrainingConfig training;
  RerankConfig rerank;
  SyntheticConfig synthetic;
  std::size_t threads = 0;  // 0 leaves the OpenMP default
  std::size_t window = 20;
  std::vector<std::size_t> intervals{20, 40, 60, 80, 100};
  std::vector<double> lambdas{0.0, 0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<Schedule> schedules{Schedule::Prioritized, Schedule::Uniform};

  static const std::vector<std::string>& keys();

  // Throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void apply_json(const nlohmann::json& doc);

  // defaults <- config file <- flag overrides
  static RunConfig resolve(const nlohmann::json* file,
                           const std::vector<std::pair<std::string, std::string>>& overrides);
};

Schedule parse_schedule(const std::string& text);
CalibrationMetric parse_metric(const std::string& text);
LossMode parse_loss_mode(const std::string& text);
std::string loss_mode_name(LossMode mode);

}  // namespace calseq
