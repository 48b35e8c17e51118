#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "eofair/data.hpp"
#include "eofair/error.hpp"

using namespace eofair;

namespace {

std::filesystem::path write_file(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / ("eofair_data_" + name);
  std::ofstream(path) << body;
  return path;
}

LabeledDataset toy(std::size_t n, bool same_label = false) {
  std::vector<double> x;
  std::vector<int> s;
  std::vector<int> y;
  for (std::size_t i = 0; i < n; ++i) {
    x.push_back(static_cast<double>(i));
    s.push_back(static_cast<int>(i % 2));
    y.push_back(same_label ? 1 : static_cast<int>((i / 2) % 2));
  }
  return LabeledDataset(FeatureMatrix::column(x), s, y);
}

}  // namespace

TEST(LoadCsv, LabeledFourRows) {
  const auto p = write_file("four.csv", "x1,x2,S,Y\n0.5,1,1,0\n-2,3e-2,0,1\n1,1,1,1\n0,0,0,0\n");
  const Dataset ds = load_csv(p, "S", std::string("Y"));
  const auto& l = std::get<LabeledDataset>(ds);
  EXPECT_EQ(l.size(), 4u);
  EXPECT_EQ(l.dimension(), 2u);
  EXPECT_DOUBLE_EQ(l.features()(1, 1), 0.03);
  EXPECT_EQ(l.feature_names(), (std::vector<std::string>{"x1", "x2"}));
}

TEST(LoadCsv, NonBinarySensitiveNamesRow) {
  const auto p = write_file("bad_s.csv", "x1,S,Y\n0.5,1,0\n0.1,2,1\n");
  try {
    load_csv(p, "S", std::string("Y"));
    FAIL();
  } catch (const ValueError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, MissingLabelGivesUnlabeled) {
  const auto p = write_file("unl.csv", "x1,S\n0.5,1\n0.1,0\n0.2,1\n0.3,0\n");
  const Dataset ds = load_csv(p, "S", std::nullopt);
  EXPECT_TRUE(std::holds_alternative<UnlabeledDataset>(ds));
}

TEST(LoadCsv, Errors) {
  EXPECT_THROW(load_labeled_csv(write_file("nos.csv", "x1,Y\n1,0\n"), "S", "Y"), SchemaError);
  EXPECT_THROW(load_labeled_csv(write_file("nan.csv", "x1,S,Y\nnan,1,0\n1,0,1\n"), "S", "Y"),
               ParseError);
  EXPECT_THROW(load_labeled_csv(write_file("empty.csv", "x1,S,Y\n,1,0\n1,0,1\n"), "S", "Y"),
               ParseError);
  EXPECT_THROW(load_labeled_csv(write_file("onegroup.csv", "x1,S,Y\n1,1,0\n1,1,1\n"), "S", "Y"),
               GroupCoverageError);
  EXPECT_THROW(load_labeled_csv("/nonexistent/file.csv", "S", "Y"), SchemaError);
}

TEST(LoadCsv, UnlabeledNeedsTwoRowsPerGroup) {
  EXPECT_THROW(load_unlabeled_csv(write_file("u1.csv", "x1,S\n1,1\n2,0\n3,0\n"), "S", std::nullopt),
               GroupCoverageError);
  const auto blind = load_unlabeled_csv(write_file("u2.csv", "x1\n1\n2\n"), "S", std::nullopt, false);
  EXPECT_FALSE(blind.has_sensitive());
  EXPECT_THROW(blind.sensitive(), SchemaError);
}

TEST(WriteCsv, RoundTrip) {
  const auto p = write_file("rt_in.csv", "a,S,Y\n0.123456789012345,1,0\n-1e-7,0,1\n3.5,1,1\n");
  const LabeledDataset ds = load_labeled_csv(p, "S", "Y");
  const auto q = std::filesystem::temp_directory_path() / "eofair_data_rt_out.csv";
  write_csv(ds, q);
  const LabeledDataset back = load_labeled_csv(q, "S", "Y");
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double a = ds.features()(i, 0);
    const double b = back.features()(i, 0);
    EXPECT_LE(std::fabs(a - b), 1e-12 * std::max(1.0, std::fabs(a)));
  }
  EXPECT_EQ(back.sensitive(), ds.sensitive());
  EXPECT_EQ(back.labels(), ds.labels());
}

TEST(Split, SizesAndPartition) {
  const LabeledDataset ds = toy(100);
  const SplitResult r = split(ds, SplitPlan{0.7, 30, 1});
  ASSERT_EQ(r.splits.size(), 30u);
  EXPECT_FALSE(r.fallback_warning);
  for (const auto& sp : r.splits) {
    EXPECT_EQ(sp.train.size(), 70u);
    EXPECT_EQ(sp.test.size(), 30u);
    std::set<std::size_t> all(sp.train.begin(), sp.train.end());
    all.insert(sp.test.begin(), sp.test.end());
    EXPECT_EQ(all.size(), 100u);
    EXPECT_TRUE(std::is_sorted(sp.train.begin(), sp.train.end()));
    std::size_t ones = 0;
    for (std::size_t i : sp.train) ones += ds.sensitive()[i];
    EXPECT_GE(ones, 1u);
    EXPECT_GE(sp.train.size() - ones, 1u);
  }
}

TEST(Split, DegenerateCellFallsBack) {
  const SplitResult r = split(toy(10, true), SplitPlan{0.7, 3, 2});
  EXPECT_TRUE(r.fallback_warning);
  EXPECT_EQ(r.stratification, Stratification::kSensitiveOnly);
}

TEST(Split, Deterministic) {
  const LabeledDataset ds = toy(57);
  const SplitResult a = split(ds, SplitPlan{0.6, 5, 99});
  const SplitResult b = split(ds, SplitPlan{0.6, 5, 99});
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_EQ(a.splits[r].train, b.splits[r].train);
    EXPECT_EQ(a.splits[r].test, b.splits[r].test);
  }
  const SplitResult c = split(ds, SplitPlan{0.6, 5, 100});
  EXPECT_NE(a.splits[0].train, c.splits[0].train);
}

TEST(Split, InvalidPlan) {
  EXPECT_THROW(split(toy(10), SplitPlan{1.0, 3, 0}), ConfigError);
  EXPECT_THROW(split(toy(10), SplitPlan{0.5, 0, 0}), ConfigError);
}

TEST(Folds, StratifiedPartition) {
  const LabeledDataset ds = toy(103);
  const auto folds = stratified_folds(ds, 10, 4);
  ASSERT_EQ(folds.size(), 10u);
  std::set<std::size_t> all;
  for (const auto& f : folds) {
    EXPECT_GE(f.size(), 10u);
    EXPECT_LE(f.size(), 11u);
    all.insert(f.begin(), f.end());
  }
  EXPECT_EQ(all.size(), 103u);
}

TEST(Order, PrefixesAreStratified) {
  const LabeledDataset ds = toy(400);
  const auto order = stratified_order(ds, 3);
  ASSERT_EQ(order.size(), 400u);
  std::size_t ones = 0;
  for (std::size_t i = 0; i < 40; ++i) ones += ds.sensitive()[order[i]];
  EXPECT_NEAR(static_cast<double>(ones), 20.0, 1.0);
}
