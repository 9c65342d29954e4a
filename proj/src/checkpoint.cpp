#include "calseq/checkpoint.hpp"

#include <json.hpp>

#include "calseq/error.hpp"
#include "calseq/io.hpp"

namespace calseq {

std::string serialize_checkpoint(const ModelParams& params, const CheckpointMeta& meta) {
  std::string out;
  out += "{\n";
  out += "  \"format_version\": " + std::to_string(kCheckpointFormatVersion) + ",\n";
  out += "  \"dim\": " + std::to_string(params.dim) + ",\n";
  out += "  \"num_items\": " + std::to_string(params.num_items) + ",\n";
  out += "  \"rho\": " + format_double(params.rho) + ",\n";
  out += "  \"max_seq_len\": " + std::to_string(params.max_seq_len) + ",\n";
  out += "  \"gamma\": " + format_double(meta.gamma) + ",\n";
  out += "  \"alpha\": " + format_double(meta.alpha) + ",\n";
  out += "  \"beta\": " + format_double(meta.beta) + ",\n";
  out += "  \"seed\": " + std::to_string(meta.seed) + ",\n";
  out += "  \"item_bias\": [";
  for (std::size_t i = 0; i < params.item_bias.size(); ++i) {
    if (i) out += ", ";
    out += format_double(params.item_bias[i]);
  }
  out += "],\n  \"item_embeddings\": [";
  for (std::size_t i = 0; i < params.num_items; ++i) {
    out += i ? ",\n    [" : "\n    [";
    auto row = params.embedding(static_cast<ItemId>(i));
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ", ";
      out += format_double(row[k]);
    }
    out += "]";
  }
  out += params.num_items ? "\n  ]\n}\n" : "]\n}\n";
  return out;
}

Checkpoint parse_checkpoint(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("checkpoint is not valid JSON (truncated?): ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("checkpoint must be a JSON object");

  try {
    const auto& version = doc.at("format_version");
    if (!version.is_number_integer()) throw FormatError("checkpoint format_version must be an integer");
    const auto v = version.get<long long>();
    if (v > kCheckpointFormatVersion)
      throw UnsupportedVersionError("checkpoint format_version " + std::to_string(v) +
                                    " is newer than supported version " +
                                    std::to_string(kCheckpointFormatVersion));
    if (v < 1) throw FormatError("checkpoint format_version " + std::to_string(v) + " is invalid");

    Checkpoint ckpt;
    auto& p = ckpt.params;
    p.dim = doc.at("dim").get<std::size_t>();
    p.num_items = doc.at("num_items").get<std::size_t>();
    p.rho = doc.at("rho").get<double>();
    p.max_seq_len = doc.at("max_seq_len").get<std::size_t>();
    ckpt.meta.gamma = doc.at("gamma").get<double>();
    ckpt.meta.alpha = doc.at("alpha").get<double>();
    ckpt.meta.beta = doc.at("beta").get<double>();
    ckpt.meta.seed = doc.at("seed").get<std::uint64_t>();

    const auto& bias = doc.at("item_bias");
    const auto& emb = doc.at("item_embeddings");
    if (!bias.is_array() || bias.size() != p.num_items)
      throw FormatError("checkpoint item_bias length does not match num_items");
    if (!emb.is_array() || emb.size() != p.num_items)
      throw FormatError("checkpoint item_embeddings row count does not match num_items");
    p.item_bias = bias.get<std::vector<double>>();
    p.item_embeddings.reserve(p.num_items * p.dim);
    for (const auto& row : emb) {
      if (!row.is_array() || row.size() != p.dim)
        throw FormatError("checkpoint embedding row length does not match dim");
      for (const auto& x : row) p.item_embeddings.push_back(x.get<double>());
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const ModelParams& params, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(params, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("checkpoint " + path.string() + " does not exist");
  return parse_checkpoint(read_file(path));
}

}  // namespace calseq
