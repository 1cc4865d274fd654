#pragma once

/**
 * Reward functions over generated sequences.
 *
 * format_reward is the binary structural check; the score/preference rewards
 * compare an extracted answer value against a target. Answer extraction is
 * gated on format validity: a malformed sequence has no answer, and all
 * accuracy-type rewards score 0 on a missing answer. Composition is a
 * weighted sum.
 */

#include <cmath>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "softpref/error.hpp"
#include "softpref/policy.hpp"
#include "softpref/vocab.hpp"

namespace softpref::rewards {

enum class RewardKind { Format, ExactScore, GradedScore, PairwiseExact };

struct Component {
  RewardKind kind = RewardKind::Format;
  double weight = 1.0;
};

struct RewardSpec {
  std::vector<Component> components;
};

inline bool kind_allowed(RewardKind kind, AnswerKind task) {
  switch (kind) {
    case RewardKind::Format: return true;
    case RewardKind::ExactScore:
    case RewardKind::GradedScore: return task == AnswerKind::Rating;
    case RewardKind::PairwiseExact: return task == AnswerKind::Preference;
  }
  return false;
}

inline void validate_reward_spec(const RewardSpec& spec, AnswerKind task) {
  if (spec.components.empty())
    throw ConfigError("rewards: at least one component required");
  for (const auto& c : spec.components) {
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
      throw ConfigError("rewards: component weights must be finite and >= 0");
    if (!kind_allowed(c.kind, task))
      throw ConfigError("rewards: component incompatible with task answer kind");
  }
}

// 1 iff the token sequence matches the template skeleton exactly: forced
// structural tokens in place, reasoning tokens in the think span, exactly one
// answer-role token, and nothing after close_answer.
inline double format_reward(const AnswerSequence& seq, const SequenceTemplate& tmpl,
                            const Vocabulary& vocab) {
  if (static_cast<int>(seq.tokens.size()) != tmpl.length()) return 0.0;
  for (int t = 0; t < tmpl.length(); ++t) {
    const int token = seq.tokens[static_cast<size_t>(t)];
    if (token < 0 || token >= vocab.size()) return 0.0;
    if (tmpl.is_structural_slot(t)) {
      if (token != tmpl.expected_structural(t)) return 0.0;
    } else if (vocab.role(token) != tmpl.slot_role(t)) {
      return 0.0;
    }
  }
  return 1.0;
}

// Answer value (rating value, or 0/1 preference label) of a format-valid
// sequence; nullopt when the format check fails.
inline std::optional<int> extract_answer(const AnswerSequence& seq, const SequenceTemplate& tmpl,
                                         const Vocabulary& vocab) {
  if (format_reward(seq, tmpl, vocab) != 1.0) return std::nullopt;
  const int token = seq.tokens[static_cast<size_t>(tmpl.answer_slot())];
  if (tmpl.answer_kind() == AnswerKind::Rating) return vocab.rating_value(token);
  return token == vocab.pref_one() ? 1 : 0;
}

inline double exact_score_reward(std::optional<int> predicted, int target) {
  return (predicted && *predicted == target) ? 1.0 : 0.0;
}

// Distance-graded score match: 0 -> 1, 1 -> 0.75, 2 -> 0.5, otherwise 0.
inline double graded_score_reward(std::optional<int> predicted, int target) {
  if (!predicted) return 0.0;
  switch (std::abs(*predicted - target)) {
    case 0: return 1.0;
    case 1: return 0.75;
    case 2: return 0.5;
    default: return 0.0;
  }
}

inline double pairwise_reward(std::optional<int> predicted, int target) {
  return (predicted && *predicted == target) ? 1.0 : 0.0;
}

inline double composite_reward(const AnswerSequence& seq, int target, const RewardSpec& spec,
                               const SequenceTemplate& tmpl, const Vocabulary& vocab) {
  validate_reward_spec(spec, tmpl.answer_kind());
  const double fmt = format_reward(seq, tmpl, vocab);
  const std::optional<int> answer = extract_answer(seq, tmpl, vocab);
  double total = 0.0;
  for (const auto& c : spec.components) {
    double r = 0.0;
    switch (c.kind) {
      case RewardKind::Format: r = fmt; break;
      case RewardKind::ExactScore: r = exact_score_reward(answer, target); break;
      case RewardKind::GradedScore: r = graded_score_reward(answer, target); break;
      case RewardKind::PairwiseExact: r = pairwise_reward(answer, target); break;
    }
    total += c.weight * r;
  }
  return total;
}

}  // namespace softpref::rewards
