#pragma once

/**
 * Group-relative policy optimization.
 *
 * A rollout group holds G sequences sampled from one context under the
 * sampling-time policy snapshot, with their rewards and log-probabilities.
 * Rewards are standardized within the group (population std); the clipped
 * surrogate limits per-sequence probability-ratio movement; a KL penalty
 * toward a frozen reference policy regularizes the update.
 *
 * The KL term comes in three forms:
 *   - kl_penalty_exact: per-state token-level KL averaged over an explicit
 *     context list. The training loss uses it over the states the groups'
 *     sequences actually visited, differentiated at those fixed samples
 *     (so the analytic gradient matches finite differences of the loss).
 *   - kl_penalty_sampled: mean per-sequence log ratio, the Monte Carlo
 *     estimator of the sequence-level divergence.
 *   - kl_sequence_exact: the exact sequence-level KL for one base context,
 *     by forward dynamic programming over reasoning-summary reach
 *     probabilities (tractable because the policy is tabular).
 *
 * All of training is a deterministic function of (config, dataset, seed):
 * every random decision uses a seed derived by purpose and index, and
 * gradient accumulation runs in a fixed order.
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "softpref/error.hpp"
#include "softpref/policy.hpp"
#include "softpref/rewards.hpp"
#include "softpref/rng.hpp"
#include "softpref/task.hpp"
#include "softpref/textio.hpp"

namespace softpref::grpo {

struct RolloutGroup {
  Context context;
  std::vector<AnswerSequence> sequences;
  std::vector<double> rewards;
  std::vector<double> old_log_probs;  // under the sampling-time snapshot
};

struct AdvantageSet {
  std::vector<double> advantages;
  double group_mean = 0.0;
  double group_std = 0.0;  // population
  bool degenerate = false;
};

struct GrpoConfig {
  int group_size = 8;
  double clip_epsilon = 0.2;
  double kl_coeff = 0.04;
  double learning_rate = 0.1;
  int steps = 2000;
  int inner_epochs = 1;
  double std_floor = 1e-8;
  int batch_size = 16;  // contexts rolled out per step
  uint64_t seed = 17;
};

inline void validate_grpo_config(const GrpoConfig& cfg) {
  if (cfg.group_size < 2) throw ConfigError("grpo: group_size must be >= 2");
  if (!(cfg.clip_epsilon > 0.0) || !(cfg.clip_epsilon < 1.0))
    throw ConfigError("grpo: clip_epsilon must be in (0, 1)");
  if (!(cfg.kl_coeff >= 0.0)) throw ConfigError("grpo: kl_coeff must be >= 0");
  if (!(cfg.learning_rate >= 0.0)) throw ConfigError("grpo: learning_rate must be >= 0");
  if (cfg.steps < 0) throw ConfigError("grpo: steps must be >= 0");
  if (cfg.inner_epochs < 1) throw ConfigError("grpo: inner_epochs must be >= 1");
  if (!(cfg.std_floor > 0.0)) throw ConfigError("grpo: std_floor must be > 0");
  if (cfg.batch_size < 1) throw ConfigError("grpo: batch_size must be >= 1");
}

// Within-group standardization: A_i = (r_i - mean) / population std. Groups
// whose std falls below std_floor carry no ranking signal and standardize to
// all zeros (degenerate).
inline AdvantageSet compute_advantages(std::span<const double> rewards, double std_floor) {
  const size_t g = rewards.size();
  if (g < 2) throw ConfigError("compute_advantages: group size must be >= 2");
  AdvantageSet out;
  double mean = 0.0;
  for (double r : rewards) {
    if (!std::isfinite(r)) throw NumericError("compute_advantages: non-finite reward");
    mean += r;
  }
  mean /= static_cast<double>(g);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);
  out.group_mean = mean;
  out.group_std = std::sqrt(var);
  out.advantages.resize(g);
  if (out.group_std < std_floor) {
    out.degenerate = true;
    for (auto& a : out.advantages) a = 0.0;
  } else {
    for (size_t i = 0; i < g; ++i) out.advantages[i] = (rewards[i] - mean) / out.group_std;
  }
  return out;
}

// (1/G) sum_i min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i),
// rho_i = exp(new_i - old_i).
inline double clipped_surrogate(std::span<const double> new_log_probs,
                                std::span<const double> old_log_probs, const AdvantageSet& adv,
                                double epsilon) {
  const size_t g = new_log_probs.size();
  if (g != old_log_probs.size() || g != adv.advantages.size())
    throw ConfigError("clipped_surrogate: mismatched lengths");
  double total = 0.0;
  for (size_t i = 0; i < g; ++i) {
    const double rho = std::exp(new_log_probs[i] - old_log_probs[i]);
    if (!std::isfinite(rho)) throw NumericError("clipped_surrogate: non-finite ratio");
    const double a = adv.advantages[i];
    const double clipped = std::clamp(rho, 1.0 - epsilon, 1.0 + epsilon);
    total += std::min(rho * a, clipped * a);
  }
  return total / static_cast<double>(g);
}

namespace detail {

// Token-level KL between two logit rows restricted to a role block, plus its
// gradient w.r.t. the first row: dKL/dtheta_b = p_b (log(p_b / q_b) - KL).
struct TokenKl {
  double value = 0.0;
  std::vector<double> grad;  // over the block, aligned with block tokens
};

inline TokenKl token_kl(std::span<const double> row, std::span<const double> ref_row,
                        const RoleBlock& block, bool with_grad) {
  const double lz = softpref::detail::log_sum_exp(row, block.first, block.count);
  const double lz_ref = softpref::detail::log_sum_exp(ref_row, block.first, block.count);
  TokenKl out;
  std::vector<double> p(static_cast<size_t>(block.count));
  std::vector<double> log_ratio(static_cast<size_t>(block.count));
  for (int i = 0; i < block.count; ++i) {
    const size_t t = static_cast<size_t>(block.first + i);
    const double lp = row[t] - lz;
    const double lq = ref_row[t] - lz_ref;
    p[static_cast<size_t>(i)] = std::exp(lp);
    log_ratio[static_cast<size_t>(i)] = lp - lq;
    out.value += p[static_cast<size_t>(i)] * log_ratio[static_cast<size_t>(i)];
  }
  if (with_grad) {
    out.grad.resize(static_cast<size_t>(block.count));
    for (int i = 0; i < block.count; ++i)
      out.grad[static_cast<size_t>(i)] =
          p[static_cast<size_t>(i)] * (log_ratio[static_cast<size_t>(i)] - out.value);
  }
  return out;
}

}  // namespace detail

// Mean over contexts of the exact token-level KL(pi_theta || pi_ref) at each
// context's slot, restricted to the slot's role block. Forced slots are
// deterministic on both sides and contribute 0.
inline double kl_penalty_exact(const PolicyParams& params, const PolicyParams& ref,
                               const Vocabulary& vocab, const SequenceTemplate& tmpl,
                               std::span<const Context> contexts) {
  if (contexts.empty()) return 0.0;
  if (params.space != ref.space || params.vocab_size != ref.vocab_size)
    throw ConfigError("kl_penalty_exact: mismatched policies");
  double total = 0.0;
  for (const Context& ctx : contexts) {
    if (!tmpl.sampled(ctx.step)) continue;
    const RoleBlock block = vocab.block(tmpl.slot_role(ctx.step));
    total += detail::token_kl(logits(params, ctx), logits(ref, ctx), block, false).value;
  }
  return total / static_cast<double>(contexts.size());
}

// Monte Carlo estimator: mean over samples of log(pi_theta(seq) / pi_ref(seq)).
inline double kl_penalty_sampled(const PolicyParams& params, const PolicyParams& ref,
                                 const Vocabulary& vocab, const SequenceTemplate& tmpl,
                                 std::span<const std::pair<Context, AnswerSequence>> samples) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [ctx, seq] : samples) {
    total += sequence_log_prob(params, vocab, ctx, tmpl, seq) -
             sequence_log_prob(ref, vocab, ctx, tmpl, seq);
  }
  return total / static_cast<double>(samples.size());
}

// Exact sequence-level KL(pi_theta || pi_ref) for one base context: forward
// DP over the reach distribution of the reasoning key under pi_theta, adding
// the reach-weighted token-level KL at every sampled slot.
inline double kl_sequence_exact(const PolicyParams& params, const PolicyParams& ref,
                                const Vocabulary& vocab, const SequenceTemplate& tmpl,
                                const Context& base) {
  if (params.space != ref.space || params.vocab_size != ref.vocab_size)
    throw ConfigError("kl_sequence_exact: mismatched policies");
  const int s_count = params.space.summary_buckets;
  std::vector<double> reach(static_cast<size_t>(s_count), 0.0);
  reach[0] = 1.0;
  double total = 0.0;
  for (int t = 0; t < tmpl.length(); ++t) {
    Context ctx = base;
    ctx.step = t;
    if (!tmpl.sampled(t)) continue;  // forced slots: no divergence, key unchanged
    const RoleBlock block = vocab.block(tmpl.slot_role(t));
    std::vector<double> next(static_cast<size_t>(s_count), 0.0);
    const bool updates_key = tmpl.is_reasoning_slot(t) && s_count > 1;
    for (int key = 0; key < s_count; ++key) {
      const double w = reach[static_cast<size_t>(key)];
      if (w == 0.0) continue;
      ctx.reasoning_key = key;
      total += w * detail::token_kl(logits(params, ctx), logits(ref, ctx), block, false).value;
      if (updates_key) {
        const auto p = role_distribution(params, ctx, block);
        for (int i = 0; i < block.count; ++i)
          next[static_cast<size_t>((key + i) % s_count)] += w * p[static_cast<size_t>(i)];
      }
    }
    if (updates_key) reach = std::move(next);
  }
  return total;
}

struct LossBreakdown {
  double objective = 0.0;  // surrogate - kl_coeff * kl
  double surrogate = 0.0;
  double kl = 0.0;
  double degenerate_fraction = 0.0;
  std::vector<double> grad;         // dense, objective gradient over theta
  std::vector<int> touched_states;  // sorted unique states with nonzero grad rows
};

/**
 * Objective and exact analytic gradient for a batch of rollout groups.
 *
 * objective = mean over groups of the clipped surrogate, minus kl_coeff times
 * the token-level exact KL averaged over every sampled-slot state visited by
 * the groups' sequences. Probability ratios use the stored sampling-time
 * log-probs. Gradient terms follow the active min/clip branch: a term whose
 * clipped bound is active contributes no gradient.
 */
inline LossBreakdown grpo_loss(const PolicyParams& params, const PolicyParams& ref,
                               const Vocabulary& vocab, const SequenceTemplate& tmpl,
                               std::span<const RolloutGroup> groups, const GrpoConfig& cfg) {
  if (groups.empty()) throw ConfigError("grpo_loss: no rollout groups");
  LossBreakdown out;
  out.grad.assign(params.theta.size(), 0.0);
  const double n_groups = static_cast<double>(groups.size());
  size_t degenerate = 0;

  std::vector<Context> visited;
  for (const RolloutGroup& group : groups) {
    const size_t g = group.sequences.size();
    if (g < 2 || group.rewards.size() != g || group.old_log_probs.size() != g)
      throw ConfigError("grpo_loss: malformed rollout group");
    const AdvantageSet adv = compute_advantages(group.rewards, cfg.std_floor);
    if (adv.degenerate) ++degenerate;

    double surrogate = 0.0;
    for (size_t i = 0; i < g; ++i) {
      const AnswerSequence& seq = group.sequences[i];
      const double new_lp = sequence_log_prob(params, vocab, group.context, tmpl, seq);
      const double rho = std::exp(new_lp - group.old_log_probs[i]);
      if (!std::isfinite(rho)) throw NumericError("grpo_loss: non-finite probability ratio");
      const double a = adv.advantages[i];
      const double clipped = std::clamp(rho, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
      const double unclipped_term = rho * a;
      const double clipped_term = clipped * a;
      surrogate += std::min(unclipped_term, clipped_term);

      // Gradient flows only through the unclipped branch when it is active.
      if (unclipped_term <= clipped_term && a != 0.0) {
        const double coeff = rho * a / (static_cast<double>(g) * n_groups);
        for (const GradEntry& e : log_prob_grad(params, vocab, group.context, tmpl, seq)) {
          out.grad[static_cast<size_t>(e.state) * params.vocab_size + e.token] +=
              coeff * e.value;
          out.touched_states.push_back(e.state);
        }
      }

      // Collect visited sampled-slot states for the KL term.
      SlotWalker walk(vocab, tmpl, params.space, group.context);
      while (!walk.done()) {
        if (walk.sampled()) visited.push_back(walk.ctx());
        walk.advance(seq.tokens[static_cast<size_t>(walk.slot())]);
      }
    }
    out.surrogate += surrogate / static_cast<double>(g);
  }
  out.surrogate /= n_groups;
  out.degenerate_fraction = static_cast<double>(degenerate) / n_groups;

  if (!visited.empty()) {
    const double inv = 1.0 / static_cast<double>(visited.size());
    for (const Context& ctx : visited) {
      const RoleBlock block = vocab.block(tmpl.slot_role(ctx.step));
      const int state = params.space.index(ctx);
      const auto kl = detail::token_kl(params.row(state), ref.row(state), block, true);
      out.kl += inv * kl.value;
      if (cfg.kl_coeff != 0.0) {
        for (int i = 0; i < block.count; ++i)
          out.grad[static_cast<size_t>(state) * params.vocab_size + block.first + i] -=
              cfg.kl_coeff * inv * kl.grad[static_cast<size_t>(i)];
        out.touched_states.push_back(state);
      }
    }
  }
  std::sort(out.touched_states.begin(), out.touched_states.end());
  out.touched_states.erase(std::unique(out.touched_states.begin(), out.touched_states.end()),
                           out.touched_states.end());
  out.objective = out.surrogate - cfg.kl_coeff * out.kl;
  return out;
}

// One optimizer update: inner_epochs rounds of gradient ascent at fixed
// sampling-time log-probs. Returns the updated parameters; when first_loss is
// given it receives the loss evaluated at entry (before any update).
inline PolicyParams grpo_step(PolicyParams params, const PolicyParams& ref,
                              const Vocabulary& vocab, const SequenceTemplate& tmpl,
                              std::span<const RolloutGroup> groups, const GrpoConfig& cfg,
                              LossBreakdown* first_loss = nullptr) {
  validate_grpo_config(cfg);
  for (int epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
    LossBreakdown loss = grpo_loss(params, ref, vocab, tmpl, groups, cfg);
    for (int state : loss.touched_states) {
      const size_t off = static_cast<size_t>(state) * params.vocab_size;
      for (int t = 0; t < params.vocab_size; ++t) {
        params.theta[off + t] += cfg.learning_rate * loss.grad[off + t];
        if (!std::isfinite(params.theta[off + t]))
          throw NumericError("grpo_step: non-finite parameter after update (state=" +
                             std::to_string(state) + ", objective=" +
                             textio::format_double(loss.objective) + ")");
      }
    }
    if (epoch == 0 && first_loss) *first_loss = std::move(loss);
  }
  ++params.revision;
  return params;
}

struct StepMetrics {
  int step = 0;
  double mean_reward = 0.0;
  double surrogate = 0.0;
  double kl = 0.0;
  double degenerate_fraction = 0.0;
  std::optional<double> eval_accuracy;
};

struct TrainResult {
  PolicyParams params;
  std::vector<StepMetrics> metrics;
};

// Fixed column set; eval_accuracy is empty on steps without an evaluation.
inline void write_metrics_csv(std::span<const StepMetrics> metrics, std::ostream& out) {
  out << "step,mean_reward,surrogate,kl,degenerate_group_fraction,eval_accuracy\n";
  for (const auto& m : metrics) {
    out << m.step << ',' << textio::format_double(m.mean_reward) << ','
        << textio::format_double(m.surrogate) << ',' << textio::format_double(m.kl) << ','
        << textio::format_double(m.degenerate_fraction) << ',';
    if (m.eval_accuracy) out << textio::format_double(*m.eval_accuracy);
    out << '\n';
  }
}

/**
 * GRPO training loop.
 *
 * Each step samples batch_size dataset records, rolls out group_size
 * sequences per record from the current policy (the sampling-time snapshot
 * the ratios are measured against), scores them with the task's reward
 * composition, and applies one grpo_step. The reference policy is the frozen
 * initial (uniform) policy. eval_fn, when provided, is invoked on the current
 * params at every eval_interval-th step and at the final step.
 */
inline TrainResult train(const GrpoConfig& cfg, const TaskSpec& task,
                         const synthenv::PreferenceDataset& dataset, rng::Seed seed,
                         const std::function<double(const PolicyParams&)>& eval_fn = {}) {
  validate_grpo_config(cfg);
  rewards::validate_reward_spec(task.reward_spec, task.tmpl.answer_kind());
  if ((dataset.kind == synthenv::DatasetKind::Rating) !=
      (task.tmpl.answer_kind() == AnswerKind::Rating))
    throw ConfigError("train: dataset kind does not match task");
  if (dataset.size() == 0) throw DataError("train: empty dataset");

  TrainResult result;
  result.params = make_params(task.space, task.vocab);
  const PolicyParams ref = result.params;  // frozen uniform reference

  for (int step = 1; step <= cfg.steps; ++step) {
    const rng::Seed step_seed = seed.derive("step", static_cast<uint64_t>(step));
    rng::Stream batch_stream(step_seed.derive("batch"));
    std::vector<RolloutGroup> groups;
    groups.reserve(static_cast<size_t>(cfg.batch_size));
    double reward_sum = 0.0;
    // TODO: rollout generation is embarrassingly parallel across (b, g) since
    // every stream is derived by index; worth threading for large batches.
    for (int b = 0; b < cfg.batch_size; ++b) {
      const size_t record = batch_stream.below(dataset.size());
      RolloutGroup group;
      group.context = context_for_record(task, dataset, record);
      const int target = target_for_record(dataset, record);
      for (int g = 0; g < cfg.group_size; ++g) {
        rng::Stream roll(step_seed.derive("rollout", static_cast<uint64_t>(b))
                             .derive(static_cast<uint64_t>(g)));
        AnswerSequence seq =
            sample_sequence(result.params, task.vocab, group.context, task.tmpl, roll);
        double old_lp = 0.0;
        for (double lp : seq.per_token_log_probs) old_lp += lp;
        const double reward =
            rewards::composite_reward(seq, target, task.reward_spec, task.tmpl, task.vocab);
        reward_sum += reward;
        group.sequences.push_back(std::move(seq));
        group.rewards.push_back(reward);
        group.old_log_probs.push_back(old_lp);
      }
      groups.push_back(std::move(group));
    }

    LossBreakdown loss;
    result.params =
        grpo_step(std::move(result.params), ref, task.vocab, task.tmpl, groups, cfg, &loss);

    StepMetrics m;
    m.step = step;
    m.mean_reward = reward_sum / static_cast<double>(cfg.batch_size * cfg.group_size);
    m.surrogate = loss.surrogate;
    m.kl = loss.kl;
    m.degenerate_fraction = loss.degenerate_fraction;
    if (eval_fn && (step % task.eval_interval == 0 || step == cfg.steps))
      m.eval_accuracy = eval_fn(result.params);
    result.metrics.push_back(m);
  }
  return result;
}

}  // namespace softpref::grpo
