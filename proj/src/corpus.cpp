#include "calseq/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <string_view>

#include "calseq/error.hpp"

namespace calseq {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(line.substr(start));
      return parts;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

}  // namespace

Catalog::Catalog(std::size_t num_categories,
                 std::vector<std::vector<CategoryId>> categories_of,
                 std::vector<std::string> item_names,
                 std::vector<std::string> category_names)
    : num_categories_(num_categories),
      categories_of_(std::move(categories_of)),
      item_names_(std::move(item_names)),
      category_names_(std::move(category_names)) {
  if (item_names_.empty()) {
    for (std::size_t i = 0; i < categories_of_.size(); ++i) item_names_.push_back(std::to_string(i));
  }
  if (category_names_.empty()) {
    for (std::size_t c = 0; c < num_categories_; ++c) category_names_.push_back(std::to_string(c));
  }
  if (item_names_.size() != categories_of_.size())
    throw ValidationError("catalog: item name table size mismatch");
  if (category_names_.size() != num_categories_)
    throw ValidationError("catalog: category name table size mismatch");

  for (std::size_t i = 0; i < categories_of_.size(); ++i) {
    const auto& cats = categories_of_[i];
    if (cats.empty()) throw ValidationError("catalog: item " + item_names_[i] + " has no categories");
    for (std::size_t a = 0; a < cats.size(); ++a) {
      if (cats[a] >= num_categories_)
        throw ValidationError("catalog: item " + item_names_[i] + " has out-of-range category");
      for (std::size_t b = 0; b < a; ++b) {
        if (cats[a] == cats[b])
          throw ValidationError("catalog: item " + item_names_[i] + " lists a category twice");
      }
    }
    if (!item_index_.emplace(item_names_[i], static_cast<ItemId>(i)).second)
      throw ValidationError("catalog: duplicate item " + item_names_[i]);
  }
}

std::span<const CategoryId> Catalog::categories(ItemId item) const {
  if (!contains(item)) throw DomainError("unknown item id " + std::to_string(item));
  return categories_of_[item];
}

std::optional<ItemId> Catalog::find_item(const std::string& name) const {
  auto it = item_index_.find(name);
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

void validate(const Dataset& dataset) {
  if (dataset.user_names.size() != dataset.sequences.size())
    throw ValidationError("dataset: user name table size mismatch");
  for (std::size_t u = 0; u < dataset.sequences.size(); ++u) {
    const auto& seq = dataset.sequences[u];
    if (seq.user != u) throw ValidationError("dataset: user ids are not dense");
    for (ItemId item : seq.items) {
      if (!dataset.catalog.contains(item))
        throw ReferentialError("dataset: user " + dataset.user_names[u] + " references unknown item");
    }
  }
}

Catalog parse_catalog(std::istream& in, const std::string& source) {
  std::vector<std::vector<CategoryId>> categories_of;
  std::vector<std::string> item_names;
  std::vector<std::string> category_names;
  std::unordered_map<std::string, CategoryId> category_index;
  std::unordered_map<std::string, std::size_t> seen_items;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2) throw ParseError(source, line_no, "expected item_id<TAB>categories");
    std::string item(fields[0]);
    if (item.empty()) throw ParseError(source, line_no, "empty item id");
    if (!seen_items.emplace(item, line_no).second)
      throw ValidationError(source + ":" + std::to_string(line_no) + ": duplicate item row " + item);

    std::vector<CategoryId> cats;
    if (!fields[1].empty()) {
      for (auto token : split(fields[1], ',')) {
        if (token.empty()) continue;
        std::string name(token);
        auto [it, inserted] =
            category_index.emplace(name, static_cast<CategoryId>(category_names.size()));
        if (inserted) category_names.push_back(name);
        if (std::find(cats.begin(), cats.end(), it->second) == cats.end()) cats.push_back(it->second);
      }
    }
    if (cats.empty())
      throw ValidationError(source + ":" + std::to_string(line_no) + ": item " + item +
                            " has an empty category list");
    categories_of.push_back(std::move(cats));
    item_names.push_back(std::move(item));
  }
  std::size_t num_categories = category_names.size();
  return Catalog(num_categories, std::move(categories_of), std::move(item_names),
                 std::move(category_names));
}

Catalog load_catalog(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_catalog(in, path.string());
}

Dataset parse_interactions(std::istream& in, const Catalog& catalog, const std::string& source) {
  struct Row {
    std::int64_t timestamp;
    std::size_t order;
    ItemId item;
  };
  std::vector<std::vector<Row>> rows_by_user;
  std::vector<std::string> user_names;
  std::unordered_map<std::string, UserId> user_index;

  std::string line;
  std::size_t line_no = 0;
  std::size_t order = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3)
      throw ParseError(source, line_no, "expected user_id<TAB>item_id<TAB>timestamp");
    if (fields[0].empty() || fields[1].empty()) throw ParseError(source, line_no, "empty id field");

    std::int64_t ts = 0;
    auto ts_field = fields[2];
    auto [ptr, ec] = std::from_chars(ts_field.data(), ts_field.data() + ts_field.size(), ts);
    if (ec != std::errc() || ptr != ts_field.data() + ts_field.size())
      throw ParseError(source, line_no, "timestamp is not an integer: '" + std::string(ts_field) + "'");

    auto item = catalog.find_item(std::string(fields[1]));
    if (!item)
      throw ReferentialError(source + ":" + std::to_string(line_no) + ": item " +
                             std::string(fields[1]) + " is not in the catalog");

    std::string user(fields[0]);
    auto [it, inserted] = user_index.emplace(user, static_cast<UserId>(user_names.size()));
    if (inserted) {
      user_names.push_back(user);
      rows_by_user.emplace_back();
    }
    rows_by_user[it->second].push_back(Row{ts, order++, *item});
  }

  Dataset dataset;
  dataset.catalog = catalog;
  dataset.user_names = std::move(user_names);
  dataset.sequences.resize(rows_by_user.size());
  for (std::size_t u = 0; u < rows_by_user.size(); ++u) {
    auto& rows = rows_by_user[u];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.timestamp < b.timestamp; });
    auto& seq = dataset.sequences[u];
    seq.user = static_cast<UserId>(u);
    seq.items.reserve(rows.size());
    for (const auto& row : rows) seq.items.push_back(row.item);
  }
  return dataset;
}

Dataset load_interactions(const std::filesystem::path& path, const Catalog& catalog) {
  auto in = open_input(path);
  return parse_interactions(in, catalog, path.string());
}

void write_catalog(std::ostream& out, const Catalog& catalog) {
  for (ItemId i = 0; i < catalog.num_items(); ++i) {
    out << catalog.item_name(i) << '\t';
    bool first = true;
    for (CategoryId c : catalog.categories(i)) {
      if (!first) out << ',';
      out << catalog.category_name(c);
      first = false;
    }
    out << '\n';
  }
}

void write_interactions(std::ostream& out, const Dataset& dataset) {
  for (const auto& seq : dataset.sequences) {
    for (std::size_t t = 0; t < seq.items.size(); ++t) {
      out << dataset.user_names[seq.user] << '\t' << dataset.catalog.item_name(seq.items[t]) << '\t'
          << t << '\n';
    }
  }
}

nlohmann::json remap_tables(const Dataset& dataset) {
  return nlohmann::json{{"users", dataset.user_names},
                        {"items", dataset.catalog.item_names()},
                        {"categories", dataset.catalog.category_names()}};
}

SplitDataset leave_one_out_split(const Dataset& dataset) {
  SplitDataset split;
  split.train.catalog = dataset.catalog;
  split.train.user_names = dataset.user_names;
  split.train.sequences.reserve(dataset.sequences.size());
  for (const auto& seq : dataset.sequences) {
    InteractionSequence train{seq.user, seq.items};
    const std::size_t n = seq.items.size();
    if (n >= 3) {
      split.validation_target.emplace(seq.user, seq.items[n - 2]);
      split.test_target.emplace(seq.user, seq.items[n - 1]);
      train.items.resize(n - 2);
    }
    split.train.sequences.push_back(std::move(train));
  }
  return split;
}

std::vector<ItemId> evaluation_prefix(const SplitDataset& split, UserId user) {
  auto val = split.validation_target.find(user);
  if (val == split.validation_target.end() || !split.test_target.contains(user)) return {};
  std::vector<ItemId> prefix = split.train.sequences.at(user).items;
  prefix.push_back(val->second);
  return prefix;
}

Dataset generate_synthetic(const SyntheticConfig& config) {
  if (config.users == 0 || config.items == 0 || config.categories == 0)
    throw ConfigError("synthetic: users, items and categories must be >= 1");
  if (config.categories > config.items)
    throw ConfigError("synthetic: more categories than items leaves some category empty");
  if (!(config.mean_length > 0.0)) throw ConfigError("synthetic: mean_length must be positive");
  if (!(config.concentration > 0.0)) throw ConfigError("synthetic: concentration must be positive");
  if (config.drift_rate < 0.0 || config.drift_rate > 1.0)
    throw ConfigError("synthetic: drift_rate must lie in [0,1]");
  if (config.drift_period == 0) throw ConfigError("synthetic: drift_period must be >= 1");

  const std::size_t num_categories = config.categories;
  std::vector<std::vector<CategoryId>> categories_of(config.items);
  std::vector<std::vector<ItemId>> items_of(num_categories);
  std::vector<std::string> item_names(config.items);
  std::vector<std::string> category_names(num_categories);
  for (std::size_t i = 0; i < config.items; ++i) {
    auto c = static_cast<CategoryId>(i % num_categories);
    categories_of[i] = {c};
    items_of[c].push_back(static_cast<ItemId>(i));
    item_names[i] = "i" + std::to_string(i);
  }
  for (std::size_t c = 0; c < num_categories; ++c) category_names[c] = "c" + std::to_string(c);

  Dataset dataset;
  dataset.catalog = Catalog(num_categories, std::move(categories_of), std::move(item_names),
                            std::move(category_names));

  std::mt19937_64 rng(config.seed);
  std::gamma_distribution<double> gamma(config.concentration, 1.0);
  std::poisson_distribution<long> length(config.mean_length);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto dirichlet = [&] {
    std::vector<double> v(num_categories);
    double total = 0.0;
    while (total <= 0.0) {
      for (auto& x : v) {
        x = gamma(rng);
        total += x;
      }
    }
    for (auto& x : v) x /= total;
    return v;
  };
  auto sample_category = [&](const std::vector<double>& pref) {
    double u = unit(rng);
    double acc = 0.0;
    for (std::size_t c = 0; c + 1 < pref.size(); ++c) {
      acc += pref[c];
      if (u < acc) return c;
    }
    return pref.size() - 1;
  };

  dataset.sequences.resize(config.users);
  dataset.user_names.resize(config.users);
  for (std::size_t u = 0; u < config.users; ++u) {
    auto pref = dirichlet();
    auto len = static_cast<std::size_t>(std::max<long>(3, length(rng)));
    auto& seq = dataset.sequences[u];
    seq.user = static_cast<UserId>(u);
    seq.items.reserve(len);
    for (std::size_t t = 0; t < len; ++t) {
      const auto& pool = items_of[sample_category(pref)];
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      seq.items.push_back(pool[pick(rng)]);
      if (config.drift_rate > 0.0 && (t + 1) % config.drift_period == 0) {
        auto fresh = dirichlet();
        for (std::size_t c = 0; c < num_categories; ++c)
          pref[c] = (1.0 - config.drift_rate) * pref[c] + config.drift_rate * fresh[c];
      }
    }
    dataset.user_names[u] = "u" + std::to_string(u);
  }
  return dataset;
}

}  // namespace calseq
