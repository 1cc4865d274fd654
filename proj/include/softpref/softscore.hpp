#pragma once

/**
 * Soft-score inference.
 *
 * Instead of sampling the answer token, the scorer rolls out the reasoning
 * segment and then reads the answer-slot logit row directly: rating tasks
 * take the probability-weighted expected rating over the rating block,
 * pairwise tasks the two-way preference probability p(1 | C). Ranking a set
 * of items picks one anchor (fixed score 0.5) and scores every other item by
 * its probability of being preferred over the anchor, N-1 comparisons total.
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "softpref/error.hpp"
#include "softpref/policy.hpp"
#include "softpref/rng.hpp"
#include "softpref/synthenv.hpp"
#include "softpref/vocab.hpp"

namespace softpref::softscore {

struct RatingDistribution {
  std::vector<double> probs;
  std::vector<int> values;
};

struct PreferenceDistribution {
  double p_one = 0.5;
};

struct RankedEntry {
  int item_id = 0;
  double score = 0.5;
  bool is_anchor = false;
};

struct RankedList {
  int prompt_id = 0;
  int anchor_id = 0;
  std::vector<RankedEntry> entries;  // sorted: score desc, item_id asc
};

// Softmax restricted to the rating block of a full logit row.
inline RatingDistribution rating_distribution(std::span<const double> logit_row,
                                              const Vocabulary& vocab) {
  const RoleBlock block = vocab.block(TokenRole::Rating);
  if (block.count < 2) throw ConfigError("rating_distribution: need >= 2 rating tokens");
  if (static_cast<int>(logit_row.size()) < block.first + block.count)
    throw ConfigError("rating_distribution: logit row too short");
  double m = logit_row[static_cast<size_t>(block.first)];
  for (int i = 1; i < block.count; ++i)
    m = std::max(m, logit_row[static_cast<size_t>(block.first + i)]);
  if (!std::isfinite(m)) throw NumericError("rating_distribution: non-finite logit");
  double z = 0.0;
  RatingDistribution dist;
  dist.probs.resize(static_cast<size_t>(block.count));
  dist.values.assign(vocab.rating_values().begin(), vocab.rating_values().end());
  for (int i = 0; i < block.count; ++i) {
    dist.probs[static_cast<size_t>(i)] =
        std::exp(logit_row[static_cast<size_t>(block.first + i)] - m);
    z += dist.probs[static_cast<size_t>(i)];
  }
  for (auto& p : dist.probs) p /= z;
  return dist;
}

inline double expected_rating(const RatingDistribution& dist) {
  double e = 0.0;
  for (size_t i = 0; i < dist.probs.size(); ++i) e += dist.probs[i] * dist.values[i];
  return e;
}

// Two-way softmax via the stable sigmoid of the logit difference.
inline PreferenceDistribution preference_probability(double logit_zero, double logit_one) {
  const double d = logit_one - logit_zero;
  double p;
  if (d >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-d));
  } else {
    const double e = std::exp(d);
    p = e / (1.0 + e);
  }
  return {p};
}

namespace detail {

// Rolls out slots before the answer slot, returning the answer-slot context.
inline Context walk_to_answer(const PolicyParams& params, const Vocabulary& vocab,
                              const Context& base, const SequenceTemplate& tmpl,
                              rng::Stream& stream) {
  SlotWalker walk(vocab, tmpl, params.space, base);
  while (walk.slot() < tmpl.answer_slot()) {
    int token;
    if (walk.sampled()) {
      const RoleBlock block = walk.role_block();
      const auto p = role_distribution(params, walk.ctx(), block);
      token = block.first + static_cast<int>(stream.categorical(p));
    } else {
      token = walk.forced_token();
    }
    walk.advance(token);
  }
  return walk.ctx();
}

}  // namespace detail

// Reasoning is rolled out stochastically; the answer is read softly from the
// answer-slot logits. Rating tasks return the expected rating, pairwise tasks
// p(1 | C) in [0, 1].
inline double soft_score_of_context(const PolicyParams& params, const Vocabulary& vocab,
                                    const Context& base, const SequenceTemplate& tmpl,
                                    rng::Stream& stream) {
  const Context answer_ctx = detail::walk_to_answer(params, vocab, base, tmpl, stream);
  const auto row = logits(params, answer_ctx);
  if (tmpl.answer_kind() == AnswerKind::Rating)
    return expected_rating(rating_distribution(row, vocab));
  return preference_probability(row[static_cast<size_t>(vocab.pref_zero())],
                                row[static_cast<size_t>(vocab.pref_one())])
      .p_one;
}

// Naive-sampling baseline: rolls out and samples the answer token, returning
// its value (rating value, or 0/1 preference label).
inline int hard_answer_of_context(const PolicyParams& params, const Vocabulary& vocab,
                                  const Context& base, const SequenceTemplate& tmpl,
                                  rng::Stream& stream) {
  const Context answer_ctx = detail::walk_to_answer(params, vocab, base, tmpl, stream);
  const RoleBlock block = vocab.block(tmpl.answer_kind() == AnswerKind::Rating
                                          ? TokenRole::Rating
                                          : TokenRole::Preference);
  const auto p = role_distribution(params, answer_ctx, block);
  const int token = block.first + static_cast<int>(stream.categorical(p));
  if (tmpl.answer_kind() == AnswerKind::Rating) return vocab.rating_value(token);
  return token == vocab.pref_one() ? 1 : 0;
}

// Arithmetic mean of k independent soft-score rollouts with derived sub-seeds.
inline double mean_at_k(const PolicyParams& params, const Vocabulary& vocab, const Context& base,
                        const SequenceTemplate& tmpl, int k, rng::Seed seed) {
  if (k < 1) throw ConfigError("mean_at_k: k must be >= 1");
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    rng::Stream stream(seed.derive("rollout", static_cast<uint64_t>(i)));
    total += soft_score_of_context(params, vocab, base, tmpl, stream);
  }
  return total / k;
}

/**
 * Generic anchor ranking over item ids.
 *
 * score_pair(anchor_id, candidate_id, seed) must return the probability that
 * the candidate is preferred over the anchor; it is called exactly N-1 times.
 * The anchor is drawn uniformly from the id list unless fixed_anchor is set,
 * and always carries the constant score 0.5. Ties sort by ascending item_id.
 */
template <typename ScorePair>
RankedList rank_items(std::span<const int> item_ids, int prompt_id, ScorePair&& score_pair,
                      rng::Seed seed, std::optional<int> fixed_anchor = std::nullopt) {
  if (item_ids.empty()) throw DataError("rank_items: empty item list");
  int anchor_id;
  if (fixed_anchor) {
    anchor_id = *fixed_anchor;
    if (std::find(item_ids.begin(), item_ids.end(), anchor_id) == item_ids.end())
      throw DataError("rank_items: fixed anchor not in item list");
  } else {
    rng::Stream stream(seed.derive("anchor"));
    anchor_id = item_ids[stream.below(item_ids.size())];
  }
  RankedList out;
  out.prompt_id = prompt_id;
  out.anchor_id = anchor_id;
  out.entries.reserve(item_ids.size());
  out.entries.push_back({anchor_id, 0.5, true});
  uint64_t pair_index = 0;
  for (int id : item_ids) {
    if (id == anchor_id) continue;
    const double score =
        score_pair(anchor_id, id, seed.derive("pair", pair_index));
    ++pair_index;
    out.entries.push_back({id, score, false});
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
  });
  return out;
}

// Anchor ranking with a tabular policy scoring each (anchor, candidate) pair
// as mean_at_k of p(candidate preferred | C).
inline RankedList anchor_rank(const PolicyParams& params, const Vocabulary& vocab,
                              const FeatureBucketer& bucketer,
                              std::span<const synthenv::SynthItem> items, int prompt_id,
                              const SequenceTemplate& tmpl, int k, rng::Seed seed,
                              std::optional<int> fixed_anchor = std::nullopt) {
  if (tmpl.answer_kind() != AnswerKind::Preference)
    throw ConfigError("anchor_rank: requires a pairwise template");
  std::vector<int> ids(items.size());
  for (size_t i = 0; i < items.size(); ++i) ids[i] = items[i].item_id;
  auto item_by_id = [&](int id) -> const synthenv::SynthItem& {
    for (const auto& it : items)
      if (it.item_id == id) return it;
    throw DataError("anchor_rank: unknown item id");
  };
  auto score_pair = [&](int anchor, int candidate, rng::Seed pair_seed) {
    Context ctx;
    ctx.task_kind = TaskKind::Pairwise;
    ctx.prompt_id = prompt_id;
    ctx.feature_key =
        bucketer.key_diff(item_by_id(anchor).features, item_by_id(candidate).features);
    return mean_at_k(params, vocab, ctx, tmpl, k, pair_seed);
  };
  return rank_items(ids, prompt_id, score_pair, seed, fixed_anchor);
}

}  // namespace softpref::softscore
