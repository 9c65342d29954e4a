#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace calseq {

using ItemId = std::uint32_t;
using UserId = std::uint32_t;
using CategoryId = std::uint32_t;

// Item -> ordered, duplicate-free, non-empty set of categories. Raw string ids
// are kept in side tables; everything downstream works on dense indices.
class Catalog {
 public:
  Catalog() = default;

  // Names default to the decimal dense index when omitted.
  Catalog(std::size_t num_categories,
          std::vector<std::vector<CategoryId>> categories_of,
          std::vector<std::string> item_names = {},
          std::vector<std::string> category_names = {});

  std::size_t num_items() const { return categories_of_.size(); }
  std::size_t num_categories() const { return num_categories_; }

  std::span<const CategoryId> categories(ItemId item) const;
  bool contains(ItemId item) const { return item < categories_of_.size(); }

  const std::string& item_name(ItemId item) const { return item_names_.at(item); }
  const std::string& category_name(CategoryId c) const { return category_names_.at(c); }
  const std::vector<std::string>& item_names() const { return item_names_; }
  const std::vector<std::string>& category_names() const { return category_names_; }
  std::optional<ItemId> find_item(const std::string& name) const;

  bool operator==(const Catalog& other) const {
    return num_categories_ == other.num_categories_ &&
           categories_of_ == other.categories_of_ &&
           item_names_ == other.item_names_ &&
           category_names_ == other.category_names_;
  }

 private:
  std::size_t num_categories_ = 0;
  std::vector<std::vector<CategoryId>> categories_of_;
  std::vector<std::string> item_names_;
  std::vector<std::string> category_names_;
  std::unordered_map<std::string, ItemId> item_index_;
};

struct InteractionSequence {
  UserId user = 0;
  std::vector<ItemId> items;

  bool operator==(const InteractionSequence&) const = default;
};

// sequences[u].user == u for every u; user_names[u] is the raw id.
struct Dataset {
  Catalog catalog;
  std::vector<InteractionSequence> sequences;
  std::vector<std::string> user_names;

  std::size_t users() const { return sequences.size(); }

  bool operator==(const Dataset&) const = default;
};

// Throws ValidationError when the dense-id or catalog invariants do not hold.
void validate(const Dataset& dataset);

struct SplitDataset {
  Dataset train;
  std::map<UserId, ItemId> validation_target;
  std::map<UserId, ItemId> test_target;
};

struct SyntheticConfig {
  std::size_t users = 500;
  std::size_t items = 200;
  std::size_t categories = 8;
  double mean_length = 40.0;
  double drift_rate = 0.2;
  double concentration = 0.5;
  // The latent preference is mixed with a fresh draw after every
  // drift_period-th interaction.
  std::size_t drift_period = 10;
  std::uint64_t seed = 42;
};

Catalog parse_catalog(std::istream& in, const std::string& source = "<catalog>");
Catalog load_catalog(const std::filesystem::path& path);

Dataset parse_interactions(std::istream& in, const Catalog& catalog,
                           const std::string& source = "<interactions>");
Dataset load_interactions(const std::filesystem::path& path, const Catalog& catalog);

// Canonical writers. Re-loading their output reproduces the same dense ids.
void write_catalog(std::ostream& out, const Catalog& catalog);
void write_interactions(std::ostream& out, const Dataset& dataset);
nlohmann::json remap_tables(const Dataset& dataset);

SplitDataset leave_one_out_split(const Dataset& dataset);

// Items the model sees before the test step: training prefix plus the
// validation item. Empty for users without a test target.
std::vector<ItemId> evaluation_prefix(const SplitDataset& split, UserId user);

Dataset generate_synthetic(const SyntheticConfig& config);

}  // namespace calseq
