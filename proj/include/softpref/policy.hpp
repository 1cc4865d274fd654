#pragma once

/**
 * Tabular autoregressive softmax policy.
 *
 * The policy is a dense logit table over discrete states. A state encodes
 * (task_kind, prompt bucket, feature bucket, slot position, reasoning_key),
 * flattened row-major in that order. reasoning_key is a running mod-S summary
 * of the reasoning tokens sampled so far; it is the only channel through
 * which generated reasoning content can reach later slots, a deliberately
 * coarse stand-in for attention over a reasoning trace. With
 * summary_buckets = 1 the policy conditions on position alone.
 *
 * At a sampled slot the distribution is the softmax of the state's logit row
 * restricted to the slot's role block; forced slots emit their template token
 * with probability 1 and contribute 0 to sequence log-probability. All
 * probability math runs in log space with max-subtraction.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "softpref/error.hpp"
#include "softpref/rng.hpp"
#include "softpref/vocab.hpp"

namespace softpref {

enum class TaskKind { Rating, Pairwise };

struct Context {
  TaskKind task_kind = TaskKind::Pairwise;
  int prompt_id = 0;
  int feature_key = 0;
  int step = 0;
  int reasoning_key = 0;
};

// Equal-width quantizer: each feature dimension is binned over [lo, hi]
// (clamped) and the per-dimension bins form a mixed-radix code.
class FeatureBucketer {
 public:
  FeatureBucketer(int dims, int bins, double lo = -3.0, double hi = 3.0)
      : dims_(dims), bins_(bins), lo_(lo), hi_(hi) {
    if (dims < 1) throw ConfigError("bucketer: feature_dim must be >= 1");
    if (bins < 1) throw ConfigError("bucketer: feature_bins must be >= 1");
    if (!(hi > lo)) throw ConfigError("bucketer: empty feature range");
    n_keys_ = 1;
    for (int d = 0; d < dims; ++d) {
      if (n_keys_ > 1'000'000 / bins)
        throw ConfigError("bucketer: bins^dims too large");
      n_keys_ *= bins;
    }
  }

  int dims() const { return dims_; }
  int bins() const { return bins_; }
  int n_keys() const { return n_keys_; }

  int bin_of(double x) const {
    const double w = (hi_ - lo_) / bins_;
    const int b = static_cast<int>(std::floor((x - lo_) / w));
    return std::clamp(b, 0, bins_ - 1);
  }

  int key(std::span<const double> features) const {
    if (static_cast<int>(features.size()) != dims_)
      throw ConfigError("bucketer: feature vector has wrong dimension");
    int k = 0;
    for (int d = dims_ - 1; d >= 0; --d) k = k * bins_ + bin_of(features[static_cast<size_t>(d)]);
    return k;
  }

  // Bucket of the elementwise difference a - b.
  int key_diff(std::span<const double> a, std::span<const double> b) const {
    if (a.size() != b.size())
      throw ConfigError("bucketer: mismatched feature vectors");
    std::vector<double> d(a.size());
    for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return key(d);
  }

  // Cell center, used by oracle wirings and diagnostics.
  std::vector<double> center(int key) const {
    if (key < 0 || key >= n_keys_) throw ConfigError("bucketer: key out of range");
    const double w = (hi_ - lo_) / bins_;
    std::vector<double> c(static_cast<size_t>(dims_));
    for (int d = 0; d < dims_; ++d) {
      c[static_cast<size_t>(d)] = lo_ + (key % bins_ + 0.5) * w;
      key /= bins_;
    }
    return c;
  }

 private:
  int dims_, bins_;
  double lo_, hi_;
  int n_keys_;
};

struct StateSpace {
  int prompt_buckets = 1;
  int feature_keys = 1;
  int steps = 1;            // sequence length covered by the table
  int summary_buckets = 1;  // S; 1 disables the reasoning-summary channel

  int n_states() const { return 2 * prompt_buckets * feature_keys * steps * summary_buckets; }

  int index(const Context& ctx) const {
    const int task = ctx.task_kind == TaskKind::Rating ? 0 : 1;
    const int prompt = ctx.prompt_id % prompt_buckets;
    if (ctx.prompt_id < 0)
      throw ConfigError("state: negative prompt_id");
    if (ctx.feature_key < 0 || ctx.feature_key >= feature_keys)
      throw ConfigError("state: feature_key " + std::to_string(ctx.feature_key) + " out of range");
    if (ctx.step < 0 || ctx.step >= steps)
      throw ConfigError("state: step " + std::to_string(ctx.step) + " out of range");
    if (ctx.reasoning_key < 0 || ctx.reasoning_key >= summary_buckets)
      throw ConfigError("state: reasoning_key out of range");
    return ((task * prompt_buckets + prompt) * feature_keys + ctx.feature_key) * steps * summary_buckets +
           ctx.step * summary_buckets + ctx.reasoning_key;
  }

  friend bool operator==(const StateSpace&, const StateSpace&) = default;
};

struct PolicyParams {
  StateSpace space;
  int vocab_size = 0;
  std::vector<double> theta;  // [n_states x vocab_size] row-major logits
  uint64_t revision = 0;

  std::span<const double> row(int state) const {
    return {theta.data() + static_cast<size_t>(state) * vocab_size,
            static_cast<size_t>(vocab_size)};
  }
  std::span<double> row(int state) {
    return {theta.data() + static_cast<size_t>(state) * vocab_size,
            static_cast<size_t>(vocab_size)};
  }
};

inline PolicyParams make_params(const StateSpace& space, const Vocabulary& vocab) {
  PolicyParams p;
  p.space = space;
  p.vocab_size = vocab.size();
  p.theta.assign(static_cast<size_t>(space.n_states()) * vocab.size(), 0.0);
  return p;
}

struct AnswerSequence {
  std::vector<int> tokens;
  std::vector<double> per_token_log_probs;  // 0.0 at forced slots
  int answer_position = -1;
};

// Raw logit row for a context. No normalization.
inline std::span<const double> logits(const PolicyParams& params, const Context& ctx) {
  return params.row(params.space.index(ctx));
}

namespace detail {

// log softmax normalizer over row[first..first+count), max-subtracted.
inline double log_sum_exp(std::span<const double> row, int first, int count) {
  double m = row[static_cast<size_t>(first)];
  for (int i = 1; i < count; ++i) m = std::max(m, row[static_cast<size_t>(first + i)]);
  if (!std::isfinite(m)) throw NumericError("policy: non-finite logit");
  double s = 0.0;
  for (int i = 0; i < count; ++i) s += std::exp(row[static_cast<size_t>(first + i)] - m);
  return m + std::log(s);
}

}  // namespace detail

// Softmax over the full vocabulary row.
inline std::vector<double> token_distribution(const PolicyParams& params, const Context& ctx) {
  const auto row = logits(params, ctx);
  const double lz = detail::log_sum_exp(row, 0, params.vocab_size);
  std::vector<double> p(row.size());
  for (size_t i = 0; i < row.size(); ++i) p[i] = std::exp(row[i] - lz);
  return p;
}

// Softmax restricted to one role block of the row.
inline std::vector<double> role_distribution(const PolicyParams& params, const Context& ctx,
                                             const RoleBlock& block) {
  const auto row = logits(params, ctx);
  const double lz = detail::log_sum_exp(row, block.first, block.count);
  std::vector<double> p(static_cast<size_t>(block.count));
  for (int i = 0; i < block.count; ++i)
    p[static_cast<size_t>(i)] = std::exp(row[static_cast<size_t>(block.first + i)] - lz);
  return p;
}

// Reasoning-summary transition: reasoning tokens fold their local index into
// the running key, every other role leaves it unchanged.
inline int reasoning_key_update(const Vocabulary& vocab, int key, int token, int summary_buckets) {
  if (summary_buckets <= 1) return 0;
  if (vocab.role(token) != TokenRole::Reasoning) return key;
  const int local = token - vocab.block(TokenRole::Reasoning).first;
  return (key + local) % summary_buckets;
}

// Walks template slots from a base context, tracking the per-slot Context
// (step + evolving reasoning key). advance() takes the token emitted at the
// current slot.
class SlotWalker {
 public:
  SlotWalker(const Vocabulary& vocab, const SequenceTemplate& tmpl, const StateSpace& space,
             Context base)
      : vocab_(vocab), tmpl_(tmpl), space_(space), ctx_(base) {
    ctx_.step = 0;
    ctx_.reasoning_key = 0;
  }

  bool done() const { return slot_ >= tmpl_.length(); }
  int slot() const { return slot_; }
  const Context& ctx() const { return ctx_; }
  bool sampled() const { return tmpl_.sampled(slot_); }
  int forced_token() const { return tmpl_.expected_structural(slot_); }
  RoleBlock role_block() const { return vocab_.block(tmpl_.slot_role(slot_)); }

  void advance(int token) {
    ctx_.reasoning_key =
        reasoning_key_update(vocab_, ctx_.reasoning_key, token, space_.summary_buckets);
    ++slot_;
    ctx_.step = slot_;
  }

 private:
  const Vocabulary& vocab_;
  const SequenceTemplate& tmpl_;
  const StateSpace& space_;
  Context ctx_;
  int slot_ = 0;
};

inline AnswerSequence sample_sequence(const PolicyParams& params, const Vocabulary& vocab,
                                      const Context& base, const SequenceTemplate& tmpl,
                                      rng::Stream& stream) {
  AnswerSequence seq;
  seq.tokens.reserve(static_cast<size_t>(tmpl.length()));
  seq.per_token_log_probs.reserve(static_cast<size_t>(tmpl.length()));
  seq.answer_position = tmpl.answer_slot();
  SlotWalker walk(vocab, tmpl, params.space, base);
  while (!walk.done()) {
    int token;
    double lp;
    if (walk.sampled()) {
      const RoleBlock block = walk.role_block();
      const auto p = role_distribution(params, walk.ctx(), block);
      const int local = static_cast<int>(stream.categorical(p));
      token = block.first + local;
      lp = std::log(p[static_cast<size_t>(local)]);
    } else {
      token = walk.forced_token();
      lp = 0.0;
    }
    seq.tokens.push_back(token);
    seq.per_token_log_probs.push_back(lp);
    walk.advance(token);
  }
  return seq;
}

namespace detail {

inline void check_conforms(const SequenceTemplate& tmpl, const AnswerSequence& seq) {
  if (static_cast<int>(seq.tokens.size()) != tmpl.length())
    throw DataError("sequence: length " + std::to_string(seq.tokens.size()) +
                    " does not match template length " + std::to_string(tmpl.length()));
}

}  // namespace detail

// Sum of per-slot log-probabilities under params. Forced slots contribute 0;
// a token outside its slot's role block is a format error.
inline double sequence_log_prob(const PolicyParams& params, const Vocabulary& vocab,
                                const Context& base, const SequenceTemplate& tmpl,
                                const AnswerSequence& seq) {
  detail::check_conforms(tmpl, seq);
  double total = 0.0;
  SlotWalker walk(vocab, tmpl, params.space, base);
  while (!walk.done()) {
    const int token = seq.tokens[static_cast<size_t>(walk.slot())];
    if (walk.sampled()) {
      const RoleBlock block = walk.role_block();
      if (!block.contains(token))
        throw DataError("sequence: token " + std::to_string(token) +
                        " outside role block at slot " + std::to_string(walk.slot()));
      const auto row = logits(params, walk.ctx());
      const double lz = detail::log_sum_exp(row, block.first, block.count);
      total += row[static_cast<size_t>(token)] - lz;
    } else if (token != walk.forced_token()) {
      throw DataError("sequence: forced slot " + std::to_string(walk.slot()) +
                      " holds unexpected token");
    }
    walk.advance(token);
  }
  return total;
}

struct GradEntry {
  int state = 0;
  int token = 0;
  double value = 0.0;
};

// d log pi(seq) / d theta as sparse entries: at each sampled slot with chosen
// token a, the row gets one_hot(a) - softmax over the slot's role block.
inline std::vector<GradEntry> log_prob_grad(const PolicyParams& params, const Vocabulary& vocab,
                                            const Context& base, const SequenceTemplate& tmpl,
                                            const AnswerSequence& seq) {
  detail::check_conforms(tmpl, seq);
  std::vector<GradEntry> grad;
  SlotWalker walk(vocab, tmpl, params.space, base);
  while (!walk.done()) {
    const int token = seq.tokens[static_cast<size_t>(walk.slot())];
    if (walk.sampled()) {
      const RoleBlock block = walk.role_block();
      if (!block.contains(token))
        throw DataError("sequence: token outside role block at slot " +
                        std::to_string(walk.slot()));
      const int state = params.space.index(walk.ctx());
      const auto p = role_distribution(params, walk.ctx(), block);
      for (int i = 0; i < block.count; ++i) {
        const double one_hot = (block.first + i == token) ? 1.0 : 0.0;
        grad.push_back({state, block.first + i, one_hot - p[static_cast<size_t>(i)]});
      }
    }
    walk.advance(token);
  }
  return grad;
}

}  // namespace softpref
