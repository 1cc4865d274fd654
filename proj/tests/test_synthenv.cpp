#include "softpref/synthenv.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"
#include "testutil.hpp"

using namespace softpref;
using namespace softpref::synthenv;

namespace {
const std::vector<double> kUnitW = {0.7071067811865476, 0.7071067811865476};
}

TEST(GenItems, SingleItemQualityIsDotProduct) {
  const auto items = gen_items(1, 2, kUnitW, rng::Seed{1});
  ASSERT_EQ(items.size(), 1u);
  const double q = kUnitW[0] * items[0].features[0] + kUnitW[1] * items[0].features[1];
  EXPECT_DOUBLE_EQ(items[0].quality, q);
  EXPECT_EQ(items[0].item_id, 0);
}

TEST(GenItems, SameSeedSameCorpus) {
  const auto a = gen_items(50, 2, kUnitW, rng::Seed{2});
  const auto b = gen_items(50, 2, kUnitW, rng::Seed{2});
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].features, b[i].features);
    EXPECT_EQ(a[i].quality, b[i].quality);
  }
}

TEST(GenItems, QualityMeanNearZero) {
  const int n = 100000;
  const auto items = gen_items(n, 2, kUnitW, rng::Seed{3});
  double sum = 0.0;
  for (const auto& item : items) sum += item.quality;
  // q ~ N(0, 1) for a unit weight vector
  EXPECT_NEAR(sum / n, 0.0, 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST(GenItems, RejectsBadArguments) {
  EXPECT_THROW(gen_items(0, 2, kUnitW, rng::Seed{1}), ConfigError);
  const std::vector<double> short_w = {1.0};
  EXPECT_THROW(gen_items(3, 2, short_w, rng::Seed{1}), ConfigError);
}

TEST(AnnotatePair, EqualQualityIsFiftyFifty) {
  rng::Stream stream(rng::Seed{4});
  const int n = 100000;
  int ones = 0;
  for (int i = 0; i < n; ++i) ones += annotate_pair(0.3, 0.3, 1.0, stream);
  EXPECT_NEAR(static_cast<double>(ones) / n, 0.5, 3.0 * std::sqrt(0.25 / n));
}

TEST(AnnotatePair, DeterministicAtZeroTemperature) {
  rng::Stream stream(rng::Seed{5});
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(annotate_pair(0.1, 0.7, 0.0, stream), 1);
    EXPECT_EQ(annotate_pair(0.7, 0.1, 0.0, stream), 0);
    EXPECT_EQ(annotate_pair(0.4, 0.4, 0.0, stream), 0);  // ties toward 0
  }
}

TEST(AnnotatePair, SigmoidArithmetic) {
  // q_b - q_a = tau * ln 3  ->  P(label 1) = 0.75
  const double tau = 0.7;
  rng::Stream stream(rng::Seed{6});
  const int n = 100000;
  int ones = 0;
  for (int i = 0; i < n; ++i) ones += annotate_pair(0.0, tau * std::log(3.0), tau, stream);
  EXPECT_NEAR(static_cast<double>(ones) / n, 0.75, 3.0 * std::sqrt(0.75 * 0.25 / n));
}

TEST(GenPairwiseDataset, ZeroPairsGivesEmptyValidShape) {
  const auto items = gen_items(5, 2, kUnitW, rng::Seed{7});
  const auto ds = gen_pairwise_dataset(items, 3, 0, 0.0, rng::Seed{8});
  EXPECT_EQ(ds.kind, DatasetKind::Pairwise);
  EXPECT_EQ(ds.size(), 0u);
}

TEST(GenPairwiseDataset, ZeroTemperatureLabelsFollowQualityOrder) {
  const auto items = gen_items(20, 2, kUnitW, rng::Seed{9});
  const auto ds = gen_pairwise_dataset(items, 10, 10, 0.0, rng::Seed{10});
  for (const auto& rec : ds.pairwise) {
    double qa = 0.0, qb = 0.0;
    for (size_t d = 0; d < kUnitW.size(); ++d) {
      qa += kUnitW[d] * rec.features_a[d];
      qb += kUnitW[d] * rec.features_b[d];
    }
    EXPECT_EQ(rec.label, qb > qa ? 1 : 0);
  }
}

TEST(GenPairwiseDataset, PairsAreDistinctItems) {
  const auto items = gen_items(2, 2, kUnitW, rng::Seed{11});
  const auto ds = gen_pairwise_dataset(items, 4, 25, 0.5, rng::Seed{12});
  for (const auto& rec : ds.pairwise) EXPECT_NE(rec.features_a, rec.features_b);
}

TEST(GenPairwiseDataset, LabelFractionMatchesModelProbability) {
  const auto items = gen_items(50, 2, kUnitW, rng::Seed{13});
  const double tau = 1.0;
  const auto ds = gen_pairwise_dataset(items, 100, 100, tau, rng::Seed{14});
  // Monte Carlo estimate of the mean Bradley-Terry probability over the same
  // pair distribution
  rng::Stream pairs(rng::Seed{15});
  double expect = 0.0;
  const int m = 200000;
  for (int i = 0; i < m; ++i) {
    const auto a = pairs.below(items.size());
    auto b = pairs.below(items.size() - 1);
    if (b >= a) ++b;
    expect += 1.0 / (1.0 + std::exp(-(items[b].quality - items[a].quality) / tau));
  }
  expect /= m;
  double ones = 0.0;
  for (const auto& rec : ds.pairwise) ones += rec.label;
  const double frac = ones / static_cast<double>(ds.size());
  const double se = std::sqrt(0.25 / static_cast<double>(ds.size()));
  EXPECT_NEAR(frac, expect, 3.0 * se + 0.005);
}

TEST(GenRatingDataset, TopQualityGetsTopRating) {
  std::vector<SynthItem> items = {{0, {3.0, 3.0}, 4.2}, {1, {-3.0, -3.0}, -4.2}};
  const std::vector<int> values = {1, 2, 3, 4, 5};
  const auto ds = gen_rating_dataset(items, 20, 5, 0.0, values, rng::Seed{16});
  for (const auto& rec : ds.rating) {
    if (rec.features[0] > 0) EXPECT_EQ(rec.target_rating, 5);
    else EXPECT_EQ(rec.target_rating, 1);
  }
}

TEST(GenRatingDataset, TwoValuesSplitAtMedian) {
  const auto items = gen_items(2000, 2, kUnitW, rng::Seed{17});
  const std::vector<int> values = {1, 2};
  const auto ds = gen_rating_dataset(items, 1, 2000, 0.0, values, rng::Seed{18});
  for (const auto& rec : ds.rating) {
    double q = 0.0;
    for (size_t d = 0; d < kUnitW.size(); ++d) q += kUnitW[d] * rec.features[d];
    EXPECT_EQ(rec.target_rating, q >= 0.0 ? 2 : 1);
  }
}

TEST(GenRatingDataset, HistogramRoughlyUniform) {
  const auto items = gen_items(50000, 2, kUnitW, rng::Seed{19});
  const std::vector<int> values = {1, 2, 3, 4, 5};
  const auto ds = gen_rating_dataset(items, 1, 50000, 0.0, values, rng::Seed{20});
  std::map<int, int> hist;
  for (const auto& rec : ds.rating) ++hist[rec.target_rating];
  for (int v : values) {
    const double frac = hist[v] / static_cast<double>(ds.size());
    EXPECT_NEAR(frac, 0.2, 0.02);
  }
}

TEST(DatasetIo, RoundTripPreservesRecords) {
  const auto items = gen_items(10, 2, kUnitW, rng::Seed{21});
  auto ds = gen_pairwise_dataset(items, 4, 6, 0.3, rng::Seed{22});
  ds.config_echo = {{"note", 1}};
  std::ostringstream out;
  write_dataset(ds, out);
  std::istringstream in(out.str());
  const auto back = read_dataset(in);
  EXPECT_EQ(back.kind, ds.kind);
  EXPECT_EQ(back.seed, ds.seed);
  ASSERT_EQ(back.size(), ds.size());
  for (size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.pairwise[i].prompt_id, ds.pairwise[i].prompt_id);
    EXPECT_EQ(back.pairwise[i].features_a, ds.pairwise[i].features_a);
    EXPECT_EQ(back.pairwise[i].features_b, ds.pairwise[i].features_b);
    EXPECT_EQ(back.pairwise[i].label, ds.pairwise[i].label);
  }
  // byte-stable second serialization
  std::ostringstream out2;
  write_dataset(back, out2);
  EXPECT_EQ(out.str(), out2.str());
}

TEST(DatasetIo, RatingRoundTrip) {
  const auto items = gen_items(20, 2, kUnitW, rng::Seed{24});
  const std::vector<int> values = {1, 2, 3};
  auto ds = gen_rating_dataset(items, 5, 4, 0.5, values, rng::Seed{25});
  std::ostringstream out;
  write_dataset(ds, out);
  std::istringstream in(out.str());
  const auto back = read_dataset(in);
  EXPECT_EQ(back.kind, DatasetKind::Rating);
  ASSERT_EQ(back.rating.size(), ds.rating.size());
  for (size_t i = 0; i < ds.rating.size(); ++i) {
    EXPECT_EQ(back.rating[i].prompt_id, ds.rating[i].prompt_id);
    EXPECT_EQ(back.rating[i].features, ds.rating[i].features);
    EXPECT_EQ(back.rating[i].target_rating, ds.rating[i].target_rating);
  }
}

TEST(DatasetIo, RejectsCorruptInput) {
  std::istringstream empty("");
  EXPECT_THROW(read_dataset(empty), DataError);
  std::istringstream garbage("not json\n");
  EXPECT_THROW(read_dataset(garbage), DataError);
  std::istringstream bad_kind("{\"kind\":\"nope\",\"seed\":1}\n");
  EXPECT_THROW(read_dataset(bad_kind), DataError);
  std::istringstream bad_label(
      "{\"kind\":\"pairwise\",\"seed\":1}\n"
      "{\"prompt_id\":0,\"features_a\":[0.1],\"features_b\":[0.2],\"label\":3}\n");
  EXPECT_THROW(read_dataset(bad_label), DataError);
}

TEST(ItemsIo, RoundTrip) {
  const auto items = gen_items(7, 2, kUnitW, rng::Seed{23});
  std::ostringstream out;
  write_items(items, 23, nlohmann::json::object(), out);
  std::istringstream in(out.str());
  const auto back = read_items(in);
  ASSERT_EQ(back.size(), items.size());
  for (size_t i = 0; i < items.size(); ++i) {
    EXPECT_EQ(back[i].item_id, items[i].item_id);
    EXPECT_EQ(back[i].features, items[i].features);
    EXPECT_EQ(back[i].quality, items[i].quality);
  }
}
