#include <gtest/gtest.h>

#include "eofair/error.hpp"
#include "eofair/metrics.hpp"

using namespace eofair;

TEST(Accuracy, Examples) {
  const std::vector<int> y{1, 0, 0, 1};
  EXPECT_EQ(accuracy(y, y), 1.0);
  EXPECT_EQ(accuracy(std::vector<int>{0, 1, 1, 0}, y), 0.0);
  EXPECT_EQ(accuracy(std::vector<int>{1, 0, 1, 1}, y), 0.75);
  EXPECT_THROW(accuracy(std::vector<int>{1}, y), SchemaError);
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), SchemaError);
}

TEST(Deo, CountExample) {
  // Group 1 positives predicted {1, 0}; group 0 positives predicted {1, 1}.
  const std::vector<int> pred{1, 0, 1, 1, 0};
  const std::vector<int> y{1, 1, 1, 1, 0};
  const std::vector<int> s{1, 1, 0, 0, 1};
  const EvaluationReport r = deo(pred, y, s);
  EXPECT_EQ(*r.tpr[1], 0.5);
  EXPECT_EQ(*r.tpr[0], 1.0);
  EXPECT_EQ(*r.deo, 0.5);
  EXPECT_EQ(r.n_positives[0], 2u);
  EXPECT_EQ(r.n_positives[1], 2u);
}

TEST(Deo, ConstantClassifiersAreFair) {
  const std::vector<int> y{1, 0, 1, 1, 0, 1};
  const std::vector<int> s{1, 1, 0, 0, 0, 1};
  EXPECT_EQ(*deo(std::vector<int>(6, 0), y, s).deo, 0.0);
  EXPECT_EQ(*deo(std::vector<int>(6, 1), y, s).deo, 0.0);
}

TEST(Deo, MissingPositivesFlagged) {
  const std::vector<int> y{1, 0, 0};
  const std::vector<int> s{1, 0, 0};
  const EvaluationReport r = evaluate(std::vector<int>{1, 1, 0}, y, s);
  EXPECT_TRUE(r.deo_undefined());
  EXPECT_FALSE(r.tpr[0].has_value());
  EXPECT_EQ(r.deo_or_zero(), 0.0);
}

TEST(Deo, SymmetricInGroupRelabeling) {
  const std::vector<int> pred{1, 0, 1, 0, 1, 1};
  const std::vector<int> y{1, 1, 1, 1, 0, 1};
  const std::vector<int> s{1, 0, 0, 1, 0, 1};
  std::vector<int> flipped;
  for (int v : s) flipped.push_back(1 - v);
  EXPECT_EQ(*deo(pred, y, s).deo, *deo(pred, y, flipped).deo);
}

TEST(Evaluate, AccuracyPlusRiskIsOne) {
  const std::vector<int> pred{1, 0, 1, 0, 1, 1, 0};
  const std::vector<int> y{1, 1, 0, 0, 0, 1, 1};
  const std::vector<int> s{1, 0, 0, 1, 0, 1, 0};
  const EvaluationReport r = evaluate(pred, y, s);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < y.size(); ++i) wrong += pred[i] != y[i];
  EXPECT_DOUBLE_EQ(r.accuracy + static_cast<double>(wrong) / 7.0, 1.0);
}
