#include "softpref/rewards.hpp"

#include <optional>

#include "gtest/gtest.h"
#include "testutil.hpp"

using namespace softpref;
using namespace softpref::rewards;
using testutil::TinyTask;
using testutil::TinyTaskOpts;

namespace {

TinyTask rating_task() {
  TinyTaskOpts o;
  o.l_think = 1;
  o.answer = AnswerKind::Rating;
  o.rating_values = {1, 2, 3, 4, 5};
  return testutil::make_tiny(o);
}

AnswerSequence well_formed(const TinyTask& t, int answer_token) {
  AnswerSequence seq;
  seq.tokens = {kOpenThink};
  const RoleBlock reasoning = t.vocab.block(TokenRole::Reasoning);
  for (int i = 0; i < t.tmpl.l_think(); ++i) seq.tokens.push_back(reasoning.first);
  seq.tokens.push_back(kCloseThink);
  seq.tokens.push_back(kOpenAnswer);
  seq.tokens.push_back(answer_token);
  seq.tokens.push_back(kCloseAnswer);
  seq.per_token_log_probs.assign(seq.tokens.size(), 0.0);
  seq.answer_position = t.tmpl.answer_slot();
  return seq;
}

}  // namespace

TEST(FormatReward, WellFormedScoresOne) {
  const TinyTask t = rating_task();
  const auto seq = well_formed(t, t.vocab.rating_token_for_value(3));
  EXPECT_EQ(format_reward(seq, t.tmpl, t.vocab), 1.0);
}

TEST(FormatReward, MissingCloseThinkScoresZero) {
  const TinyTask t = rating_task();
  auto seq = well_formed(t, t.vocab.rating_token_for_value(3));
  seq.tokens[2] = kOpenAnswer;  // close_think replaced
  EXPECT_EQ(format_reward(seq, t.tmpl, t.vocab), 0.0);
}

TEST(FormatReward, TrailingTokenScoresZero) {
  const TinyTask t = rating_task();
  auto seq = well_formed(t, t.vocab.rating_token_for_value(3));
  seq.tokens.push_back(kCloseAnswer);
  EXPECT_EQ(format_reward(seq, t.tmpl, t.vocab), 0.0);
}

TEST(FormatReward, WrongRoleInAnswerSlotScoresZero) {
  const TinyTask t = rating_task();
  auto seq = well_formed(t, t.vocab.rating_token_for_value(3));
  seq.tokens[static_cast<size_t>(t.tmpl.answer_slot())] = t.vocab.pref_one();
  EXPECT_EQ(format_reward(seq, t.tmpl, t.vocab), 0.0);
}

TEST(ExactScoreReward, MatchMissNone) {
  EXPECT_EQ(exact_score_reward(3, 3), 1.0);
  EXPECT_EQ(exact_score_reward(2, 3), 0.0);
  EXPECT_EQ(exact_score_reward(std::nullopt, 3), 0.0);
}

TEST(GradedScoreReward, DistanceTable) {
  EXPECT_EQ(graded_score_reward(3, 3), 1.0);
  EXPECT_EQ(graded_score_reward(2, 3), 0.75);
  EXPECT_EQ(graded_score_reward(5, 3), 0.5);
  EXPECT_EQ(graded_score_reward(1, 5), 0.0);
  EXPECT_EQ(graded_score_reward(std::nullopt, 3), 0.0);
}

TEST(GradedScoreReward, SymmetricAndMonotone) {
  for (int a = 1; a <= 8; ++a) {
    for (int b = 1; b <= 8; ++b) {
      EXPECT_EQ(graded_score_reward(a, b), graded_score_reward(b, a));
      if (a < 8)
        EXPECT_LE(graded_score_reward(a + (a >= b ? 1 : -1), b), graded_score_reward(a, b));
    }
  }
}

TEST(GradedScoreReward, ExactMatchImpliesGradedOne) {
  for (int v = 1; v <= 5; ++v) {
    if (exact_score_reward(v, v) == 1.0) EXPECT_EQ(graded_score_reward(v, v), 1.0);
  }
}

TEST(PairwiseReward, MatchMissNone) {
  EXPECT_EQ(pairwise_reward(1, 1), 1.0);
  EXPECT_EQ(pairwise_reward(0, 1), 0.0);
  EXPECT_EQ(pairwise_reward(std::nullopt, 0), 0.0);
}

TEST(CompositeReward, EqualWeightsExactHit) {
  const TinyTask t = rating_task();
  const RewardSpec spec{{{RewardKind::Format, 1.0},
                         {RewardKind::ExactScore, 1.0},
                         {RewardKind::GradedScore, 1.0}}};
  const auto seq = well_formed(t, t.vocab.rating_token_for_value(3));
  EXPECT_EQ(composite_reward(seq, 3, spec, t.tmpl, t.vocab), 3.0);
}

TEST(CompositeReward, MalformedSequenceScoresZero) {
  const TinyTask t = rating_task();
  const RewardSpec spec{{{RewardKind::Format, 1.0},
                         {RewardKind::ExactScore, 1.0},
                         {RewardKind::GradedScore, 1.0}}};
  auto seq = well_formed(t, t.vocab.rating_token_for_value(3));
  seq.tokens[0] = kCloseThink;
  EXPECT_EQ(composite_reward(seq, 3, spec, t.tmpl, t.vocab), 0.0);
}

TEST(CompositeReward, WeightMasking) {
  const TinyTask t = rating_task();
  const RewardSpec spec{{{RewardKind::Format, 1.0},
                         {RewardKind::ExactScore, 0.0},
                         {RewardKind::GradedScore, 0.0}}};
  const auto hit = well_formed(t, t.vocab.rating_token_for_value(3));
  const auto miss = well_formed(t, t.vocab.rating_token_for_value(1));
  EXPECT_EQ(composite_reward(hit, 3, spec, t.tmpl, t.vocab),
            format_reward(hit, t.tmpl, t.vocab));
  EXPECT_EQ(composite_reward(miss, 3, spec, t.tmpl, t.vocab),
            format_reward(miss, t.tmpl, t.vocab));
}

TEST(CompositeReward, TaskMismatchIsConfigError) {
  const TinyTask t = rating_task();
  const RewardSpec spec{{{RewardKind::PairwiseExact, 1.0}}};
  const auto seq = well_formed(t, t.vocab.rating_token_for_value(3));
  EXPECT_THROW(composite_reward(seq, 3, spec, t.tmpl, t.vocab), ConfigError);
}

TEST(RewardSpec, EmptyOrNegativeWeightRejected) {
  EXPECT_THROW(validate_reward_spec(RewardSpec{}, AnswerKind::Rating), ConfigError);
  const RewardSpec negative{{{RewardKind::Format, -1.0}}};
  EXPECT_THROW(validate_reward_spec(negative, AnswerKind::Rating), ConfigError);
}

TEST(Rewards, ComponentsStayInUnitIntervalAndCompositeInBound) {
  const TinyTask t = rating_task();
  const RewardSpec spec{{{RewardKind::Format, 1.5},
                         {RewardKind::ExactScore, 0.5},
                         {RewardKind::GradedScore, 2.0}}};
  double weight_sum = 0.0;
  for (const auto& c : spec.components) weight_sum += c.weight;
  rng::Stream meta(rng::Seed{77});
  const PolicyParams p = testutil::random_params(t, rng::Seed{78});
  for (int i = 0; i < 200; ++i) {
    Context ctx;
    ctx.task_kind = TaskKind::Rating;
    rng::Stream stream(rng::Seed{79}.derive(static_cast<uint64_t>(i)));
    const auto seq = sample_sequence(p, t.vocab, ctx, t.tmpl, stream);
    const int target = 1 + static_cast<int>(meta.below(5));
    const auto answer = extract_answer(seq, t.tmpl, t.vocab);
    EXPECT_GE(graded_score_reward(answer, target), 0.0);
    EXPECT_LE(graded_score_reward(answer, target), 1.0);
    const double total = composite_reward(seq, target, spec, t.tmpl, t.vocab);
    EXPECT_GE(total, 0.0);
    EXPECT_LE(total, weight_sum);
    // purity
    EXPECT_EQ(total, composite_reward(seq, target, spec, t.tmpl, t.vocab));
  }
}
