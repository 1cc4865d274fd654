#include "softpref/rng.hpp"

#include <cmath>
#include <vector>

#include "gtest/gtest.h"

using namespace softpref::rng;

TEST(Rng, StreamsAreDeterministic) {
  Stream a(Seed{42});
  Stream b(Seed{42});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DerivationIsPureAndOrderFree) {
  Seed root{7};
  const Seed x = root.derive("rollout", 3);
  // deriving other children first must not disturb x
  (void)root.derive("rollout", 2);
  (void)root.derive("batch");
  EXPECT_EQ(x, root.derive("rollout", 3));
  EXPECT_NE(root.derive("rollout", 3).value, root.derive("rollout", 4).value);
  EXPECT_NE(root.derive("rollout").value, root.derive("batch").value);
}

TEST(Rng, UniformStaysInUnitInterval) {
  Stream s(Seed{1});
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 3.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Rng, BelowCoversRangeUniformly) {
  Stream s(Seed{2});
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[s.below(7)];
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 4.0 * std::sqrt(n / 7.0));
}

TEST(Rng, NormalMoments) {
  Stream s(Seed{3});
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 3.0 / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Rng, CategoricalMatchesWeights) {
  Stream s(Seed{4});
  const std::vector<double> p = {0.1, 0.6, 0.3};
  std::vector<int> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[s.categorical(p)];
  for (size_t i = 0; i < p.size(); ++i) {
    const double se = std::sqrt(p[i] * (1 - p[i]) * n);
    EXPECT_NEAR(counts[i], p[i] * n, 4.0 * se);
  }
}
