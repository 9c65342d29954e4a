#include "calseq/corpus.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "calseq/error.hpp"
#include "test_util.hpp"

using namespace calseq;

namespace {

Catalog catalog_from(const std::string& text) {
  std::istringstream in(text);
  return parse_catalog(in);
}

Dataset interactions_from(const std::string& text, const Catalog& catalog) {
  std::istringstream in(text);
  return parse_interactions(in, catalog);
}

const char* kCatalog = "i1\tA\ni2\tB\ni3\tA,B\n";

}  // namespace

TEST(LoadCatalog, TwoCategories) {
  auto cat = catalog_from("i1\tA,B\n");
  ASSERT_EQ(cat.num_items(), 1u);
  EXPECT_EQ(cat.num_categories(), 2u);
  EXPECT_EQ(cat.categories(0).size(), 2u);
}

TEST(LoadCatalog, DuplicateCategoryIsDeduplicated) {
  auto cat = catalog_from("i1\tA,A\n");
  EXPECT_EQ(cat.categories(0).size(), 1u);
  EXPECT_EQ(cat.num_categories(), 1u);
}

TEST(LoadCatalog, EmptyCategoryListIsRejected) {
  EXPECT_THROW(catalog_from("i1\t\n"), ValidationError);
}

TEST(LoadCatalog, DuplicateItemRowIsRejected) {
  EXPECT_THROW(catalog_from("i1\tA\ni1\tB\n"), ValidationError);
}

TEST(LoadCatalog, CategoriesIndexedInFirstAppearanceOrder) {
  auto cat = catalog_from("x\tdrama,comedy\ny\thorror,drama\n");
  EXPECT_EQ(cat.category_names(), (std::vector<std::string>{"drama", "comedy", "horror"}));
  auto y = cat.categories(1);
  EXPECT_EQ(std::vector<CategoryId>(y.begin(), y.end()), (std::vector<CategoryId>{2, 0}));
}

TEST(LoadCatalog, WrongArityIsParseError) {
  try {
    catalog_from("i1\tA\ni2\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadInteractions, AscendingTimestampsKeepOrder) {
  auto cat = catalog_from(kCatalog);
  auto d = interactions_from("u\ti1\t1\nu\ti2\t2\nu\ti3\t3\n", cat);
  ASSERT_EQ(d.users(), 1u);
  EXPECT_EQ(d.sequences[0].items, (std::vector<ItemId>{0, 1, 2}));
}

TEST(LoadInteractions, SortsByTimestamp) {
  auto cat = catalog_from(kCatalog);
  auto d = interactions_from("u\ti1\t30\nu\ti2\t10\nu\ti3\t20\n", cat);
  EXPECT_EQ(d.sequences[0].items, (std::vector<ItemId>{1, 2, 0}));
}

TEST(LoadInteractions, EqualTimestampsKeepFileOrder) {
  auto cat = catalog_from(kCatalog);
  auto d = interactions_from("u\ti3\t5\nu\ti1\t5\n", cat);
  EXPECT_EQ(d.sequences[0].items, (std::vector<ItemId>{2, 0}));
}

TEST(LoadInteractions, UsersAreDenseInFirstAppearanceOrder) {
  auto cat = catalog_from(kCatalog);
  auto d = interactions_from("bob\ti1\t1\nann\ti2\t1\nbob\ti3\t2\n", cat);
  EXPECT_EQ(d.user_names, (std::vector<std::string>{"bob", "ann"}));
  EXPECT_EQ(d.sequences[0].items.size(), 2u);
  EXPECT_EQ(d.sequences[1].user, 1u);
  EXPECT_NO_THROW(validate(d));
}

TEST(LoadInteractions, NonIntegerTimestampIsParseErrorWithLine) {
  auto cat = catalog_from(kCatalog);
  try {
    interactions_from("u1\ti1\t1\nu1\ti2\tabc\n", cat);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
}

TEST(LoadInteractions, WrongArityIsParseError) {
  auto cat = catalog_from(kCatalog);
  EXPECT_THROW(interactions_from("u1\ti1\n", cat), ParseError);
  EXPECT_THROW(interactions_from("u1\ti1\t3\textra\n", cat), ParseError);
}

TEST(LoadInteractions, UnknownItemIsReferentialError) {
  auto cat = catalog_from(kCatalog);
  try {
    interactions_from("u1\tabc\t5\n", cat);
    FAIL();
  } catch (const ReferentialError& e) {
    EXPECT_NE(std::string(e.what()).find("abc"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(":1:"), std::string::npos);
  }
}

TEST(LeaveOneOut, HoldsOutLastTwo) {
  auto d = test::make_dataset(test::make_catalog(1, {{0}, {0}, {0}, {0}}), {{0, 1, 2, 3}});
  auto s = leave_one_out_split(d);
  EXPECT_EQ(s.train.sequences[0].items, (std::vector<ItemId>{0, 1}));
  EXPECT_EQ(s.validation_target.at(0), 2u);
  EXPECT_EQ(s.test_target.at(0), 3u);
  EXPECT_EQ(evaluation_prefix(s, 0), (std::vector<ItemId>{0, 1, 2}));
}

TEST(LeaveOneOut, ShortUsersStayInTrainOnly) {
  auto d = test::make_dataset(test::make_catalog(1, {{0}, {0}}), {{0, 1}, {1}});
  auto s = leave_one_out_split(d);
  EXPECT_EQ(s.train.sequences[0].items, (std::vector<ItemId>{0, 1}));
  EXPECT_EQ(s.train.sequences[1].items, (std::vector<ItemId>{1}));
  EXPECT_TRUE(s.validation_target.empty());
  EXPECT_TRUE(s.test_target.empty());
  EXPECT_TRUE(evaluation_prefix(s, 0).empty());
}

TEST(LeaveOneOut, EmptyDataset) {
  Dataset d;
  auto s = leave_one_out_split(d);
  EXPECT_EQ(s.train.users(), 0u);
  EXPECT_TRUE(s.test_target.empty());
}

TEST(LeaveOneOut, ReassemblyReproducesSequences) {
  SyntheticConfig cfg;
  cfg.users = 60;
  cfg.items = 30;
  cfg.categories = 5;
  cfg.mean_length = 6;
  cfg.seed = 9;
  auto d = generate_synthetic(cfg);
  auto s = leave_one_out_split(d);
  for (const auto& seq : d.sequences) {
    auto rebuilt = s.train.sequences[seq.user].items;
    if (seq.items.size() >= 3) {
      rebuilt.push_back(s.validation_target.at(seq.user));
      rebuilt.push_back(s.test_target.at(seq.user));
    }
    EXPECT_EQ(rebuilt, seq.items);
  }
}

TEST(Corpus, WriteThenLoadRoundTrips) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    SyntheticConfig cfg;
    cfg.users = 20 + trial;
    cfg.items = 15;
    cfg.categories = 4;
    cfg.mean_length = 8;
    cfg.seed = rng();
    auto original = generate_synthetic(cfg);
    std::ostringstream cat_out, inter_out;
    write_catalog(cat_out, original.catalog);
    write_interactions(inter_out, original);
    std::istringstream cat_in(cat_out.str()), inter_in(inter_out.str());
    auto catalog = parse_catalog(cat_in);
    auto reloaded = parse_interactions(inter_in, catalog);
    EXPECT_EQ(reloaded, original);
  }
  // Multi-category items with a non-sorted category order.
  auto multi = catalog_from("a\tz,y\nb\ty,x\nc\tx\n");
  auto d = interactions_from("p\tb\t1\np\ta\t2\nq\tc\t1\n", multi);
  std::ostringstream cat_out, inter_out;
  write_catalog(cat_out, d.catalog);
  write_interactions(inter_out, d);
  std::istringstream cat_in(cat_out.str()), inter_in(inter_out.str());
  auto catalog = parse_catalog(cat_in);
  EXPECT_EQ(parse_interactions(inter_in, catalog), d);
}

TEST(Corpus, RemapTablesListRawIds) {
  auto cat = catalog_from(kCatalog);
  auto d = interactions_from("bob\ti2\t1\n", cat);
  auto j = remap_tables(d);
  EXPECT_EQ(j["users"][0], "bob");
  EXPECT_EQ(j["items"].size(), 3u);
  EXPECT_EQ(j["categories"][1], "B");
}

TEST(Synthetic, SingleCategoryWithoutDrift) {
  SyntheticConfig cfg;
  cfg.users = 10;
  cfg.items = 5;
  cfg.categories = 1;
  cfg.drift_rate = 0.0;
  auto d = generate_synthetic(cfg);
  for (const auto& seq : d.sequences) {
    for (ItemId i : seq.items) EXPECT_EQ(d.catalog.categories(i)[0], 0u);
  }
}

TEST(Synthetic, SameSeedSameDataset) {
  SyntheticConfig cfg;
  cfg.users = 50;
  cfg.seed = 77;
  EXPECT_EQ(generate_synthetic(cfg), generate_synthetic(cfg));
  auto other = cfg;
  other.seed = 78;
  EXPECT_NE(generate_synthetic(cfg), generate_synthetic(other));
}

TEST(Synthetic, MinimumLengthAndDenseUsers) {
  SyntheticConfig cfg;
  cfg.users = 200;
  cfg.mean_length = 1.0;
  auto d = generate_synthetic(cfg);
  ASSERT_EQ(d.users(), 200u);
  for (const auto& seq : d.sequences) EXPECT_GE(seq.items.size(), 3u);
  EXPECT_NO_THROW(validate(d));
}

TEST(Synthetic, MoreCategoriesThanItemsIsConfigError) {
  SyntheticConfig cfg;
  cfg.items = 3;
  cfg.categories = 4;
  EXPECT_THROW(generate_synthetic(cfg), ConfigError);
}

TEST(Synthetic, EveryCategoryHasItems) {
  SyntheticConfig cfg;
  cfg.items = 9;
  cfg.categories = 9;
  auto d = generate_synthetic(cfg);
  std::vector<int> seen(9, 0);
  for (ItemId i = 0; i < d.catalog.num_items(); ++i) seen[d.catalog.categories(i)[0]]++;
  for (int s : seen) EXPECT_EQ(s, 1);
}
