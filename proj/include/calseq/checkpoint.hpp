#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "calseq/backbone.hpp"

namespace calseq {

inline constexpr int kCheckpointFormatVersion = 1;

// Training configuration echoed into the checkpoint.
struct CheckpointMeta {
  double gamma = 0.1;
  double alpha = 0.9;
  double beta = 0.01;
  std::uint64_t seed = 0;

  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  ModelParams params;
  CheckpointMeta meta;
};

std::string serialize_checkpoint(const ModelParams& params, const CheckpointMeta& meta);
// Throws FormatError (UnsupportedVersionError for newer formats). Never
// returns a partially filled checkpoint.
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const ModelParams& params, const CheckpointMeta& meta,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace calseq
