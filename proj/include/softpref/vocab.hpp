#pragma once

/**
 * Token vocabulary and sequence templates.
 *
 * The vocabulary is laid out in contiguous role blocks over dense ids:
 *
 *   [0..3]                      structural: <think> </think> <answer> </answer>
 *   [4 .. 4+m)                  reasoning tokens w_0..w_{m-1}
 *   [4+m .. 4+m+n)              rating tokens carrying strictly increasing
 *                               integer values
 *   [4+m+n .. 4+m+n+2)          preference tokens "0" and "1"
 *
 * A SequenceTemplate fixes the slot layout of every generated sequence:
 * open_think, l_think reasoning slots, close_think, open_answer, one answer
 * slot (rating or preference role), close_answer. Structural slots are
 * forced by default; sample_structural turns them into stochastic slots
 * drawn from the structural role block, for format-reward experiments.
 */

#include <span>
#include <string>
#include <vector>

#include "softpref/error.hpp"

namespace softpref {

enum class TokenRole { Structural, Reasoning, Rating, Preference };

inline constexpr int kOpenThink = 0;
inline constexpr int kCloseThink = 1;
inline constexpr int kOpenAnswer = 2;
inline constexpr int kCloseAnswer = 3;
inline constexpr int kStructuralCount = 4;

// Contiguous id block of one token role.
struct RoleBlock {
  int first = 0;
  int count = 0;
  bool contains(int token) const { return token >= first && token < first + count; }
};

class Vocabulary {
 public:
  static Vocabulary make(int reasoning_tokens, std::vector<int> rating_values) {
    if (reasoning_tokens < 1)
      throw ConfigError("vocabulary: reasoning_tokens must be >= 1");
    if (rating_values.size() < 2)
      throw ConfigError("vocabulary: need at least 2 rating values");
    for (size_t i = 1; i < rating_values.size(); ++i)
      if (rating_values[i] <= rating_values[i - 1])
        throw ConfigError("vocabulary: rating values must be strictly increasing");
    Vocabulary v;
    v.reasoning_ = {kStructuralCount, reasoning_tokens};
    v.rating_ = {v.reasoning_.first + v.reasoning_.count,
                 static_cast<int>(rating_values.size())};
    v.preference_ = {v.rating_.first + v.rating_.count, 2};
    v.rating_values_ = std::move(rating_values);
    return v;
  }

  int size() const { return preference_.first + preference_.count; }

  TokenRole role(int token) const {
    if (token >= 0 && token < kStructuralCount) return TokenRole::Structural;
    if (reasoning_.contains(token)) return TokenRole::Reasoning;
    if (rating_.contains(token)) return TokenRole::Rating;
    if (preference_.contains(token)) return TokenRole::Preference;
    throw ConfigError("vocabulary: token id " + std::to_string(token) + " out of range");
  }

  RoleBlock block(TokenRole r) const {
    switch (r) {
      case TokenRole::Structural: return {0, kStructuralCount};
      case TokenRole::Reasoning: return reasoning_;
      case TokenRole::Rating: return rating_;
      case TokenRole::Preference: return preference_;
    }
    throw ConfigError("vocabulary: unknown role");
  }

  std::span<const int> rating_values() const { return rating_values_; }

  // Integer value carried by a rating token.
  int rating_value(int token) const {
    if (!rating_.contains(token))
      throw ConfigError("vocabulary: token is not a rating token");
    return rating_values_[static_cast<size_t>(token - rating_.first)];
  }

  // Rating token carrying the given value, or -1.
  int rating_token_for_value(int value) const {
    for (int i = 0; i < rating_.count; ++i)
      if (rating_values_[static_cast<size_t>(i)] == value) return rating_.first + i;
    return -1;
  }

  int pref_zero() const { return preference_.first; }
  int pref_one() const { return preference_.first + 1; }

 private:
  RoleBlock reasoning_;
  RoleBlock rating_;
  RoleBlock preference_;
  std::vector<int> rating_values_;
};

enum class AnswerKind { Rating, Preference };

class SequenceTemplate {
 public:
  SequenceTemplate(int l_think, AnswerKind answer, bool sample_structural = false)
      : l_think_(l_think), answer_(answer), sample_structural_(sample_structural) {
    if (l_think < 0) throw ConfigError("template: l_think must be >= 0");
  }

  int length() const { return l_think_ + 5; }
  int l_think() const { return l_think_; }
  int answer_slot() const { return l_think_ + 3; }
  AnswerKind answer_kind() const { return answer_; }
  bool sample_structural() const { return sample_structural_; }

  bool is_reasoning_slot(int t) const { return t >= 1 && t <= l_think_; }
  bool is_answer_slot(int t) const { return t == answer_slot(); }
  bool is_structural_slot(int t) const {
    return !is_reasoning_slot(t) && !is_answer_slot(t) && t >= 0 && t < length();
  }

  // Token a format-valid sequence carries at a structural slot.
  int expected_structural(int t) const {
    if (t == 0) return kOpenThink;
    if (t == l_think_ + 1) return kCloseThink;
    if (t == l_think_ + 2) return kOpenAnswer;
    if (t == l_think_ + 4) return kCloseAnswer;
    throw ConfigError("template: slot " + std::to_string(t) + " is not structural");
  }

  // Role block the policy samples from at slot t (valid for sampled slots).
  TokenRole slot_role(int t) const {
    if (is_reasoning_slot(t)) return TokenRole::Reasoning;
    if (is_answer_slot(t))
      return answer_ == AnswerKind::Rating ? TokenRole::Rating : TokenRole::Preference;
    return TokenRole::Structural;
  }

  bool sampled(int t) const {
    if (is_reasoning_slot(t) || is_answer_slot(t)) return true;
    return sample_structural_;
  }

  friend bool operator==(const SequenceTemplate&, const SequenceTemplate&) = default;

 private:
  int l_think_;
  AnswerKind answer_;
  bool sample_structural_;
};

}  // namespace softpref
