#pragma once

/**
 * Run configuration.
 *
 * One JSON file with five sections: policy, grpo, rewards, env, eval. Every
 * field is optional and falls back to its default; unknown keys are rejected
 * with the offending JSON path. Precedence everywhere is flag > file >
 * default. load/save round-trip is value-identical.
 */

#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "softpref/error.hpp"
#include "softpref/grpo.hpp"
#include "softpref/rewards.hpp"
#include "softpref/synthenv.hpp"
#include "softpref/task.hpp"
#include "softpref/vocab.hpp"

namespace softpref::config {

using nlohmann::json;

struct PolicySection {
  int feature_dim = 2;
  int feature_bins = 5;
  int l_think = 2;
  std::vector<int> rating_values = {1, 2, 3, 4, 5};
  int prompt_buckets = 128;
  int reasoning_tokens = 4;
  int summary_buckets = 4;
  bool sample_structural = false;
};

struct EnvSection {
  synthenv::DatasetKind kind = synthenv::DatasetKind::Pairwise;
  int n_items = 200;
  int prompts = 128;
  int pairs_per_prompt = 8;  // records per prompt for rating datasets
  double tau = 0.0;
  std::vector<double> quality_weights = {0.7071067811865476, 0.7071067811865476};
};

struct EvalSection {
  std::vector<int> k_list = {1, 3};
  int eval_interval = 100;
};

struct RunConfig {
  PolicySection policy;
  grpo::GrpoConfig grpo;
  std::vector<rewards::Component> reward_components;  // defaulted per env.kind
  EnvSection env;
  EvalSection eval;
};

inline std::vector<rewards::Component> default_rewards(synthenv::DatasetKind kind) {
  using rewards::RewardKind;
  if (kind == synthenv::DatasetKind::Rating)
    return {{RewardKind::Format, 1.0}, {RewardKind::ExactScore, 1.0},
            {RewardKind::GradedScore, 1.0}};
  return {{RewardKind::Format, 1.0}, {RewardKind::PairwiseExact, 1.0}};
}

inline RunConfig default_config() {
  RunConfig cfg;
  cfg.reward_components = default_rewards(cfg.env.kind);
  return cfg;
}

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& path) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("config error at " + path + "." + key + ": unknown key");
}

template <typename T>
T get_field(const json& obj, const char* key, T fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config error at " + path + "." + key + ": wrong type");
  }
}

inline rewards::RewardKind reward_kind_from_name(const std::string& name) {
  using rewards::RewardKind;
  if (name == "format") return RewardKind::Format;
  if (name == "exact_score") return RewardKind::ExactScore;
  if (name == "graded_score") return RewardKind::GradedScore;
  if (name == "pairwise_exact") return RewardKind::PairwiseExact;
  throw ConfigError("config error at rewards: unknown kind '" + name + "'");
}

inline std::string reward_kind_name(rewards::RewardKind kind) {
  using rewards::RewardKind;
  switch (kind) {
    case RewardKind::Format: return "format";
    case RewardKind::ExactScore: return "exact_score";
    case RewardKind::GradedScore: return "graded_score";
    case RewardKind::PairwiseExact: return "pairwise_exact";
  }
  throw ConfigError("config: unknown reward kind");
}

}  // namespace detail

inline void validate_config(const RunConfig& cfg) {
  const auto& p = cfg.policy;
  if (p.feature_dim < 1) throw ConfigError("config error at policy.feature_dim: must be >= 1");
  if (p.feature_bins < 1) throw ConfigError("config error at policy.feature_bins: must be >= 1");
  if (p.l_think < 0) throw ConfigError("config error at policy.l_think: must be >= 0");
  if (p.rating_values.size() < 2)
    throw ConfigError("config error at policy.rating_values: need >= 2 values");
  for (size_t i = 1; i < p.rating_values.size(); ++i)
    if (p.rating_values[i] <= p.rating_values[i - 1])
      throw ConfigError("config error at policy.rating_values: must be strictly increasing");
  if (p.prompt_buckets < 1)
    throw ConfigError("config error at policy.prompt_buckets: must be >= 1");
  if (p.reasoning_tokens < 1)
    throw ConfigError("config error at policy.reasoning_tokens: must be >= 1");
  if (p.summary_buckets < 1)
    throw ConfigError("config error at policy.summary_buckets: must be >= 1");

  grpo::validate_grpo_config(cfg.grpo);

  const auto& e = cfg.env;
  if (e.n_items < 1) throw ConfigError("config error at env.n_items: must be >= 1");
  if (e.prompts < 1) throw ConfigError("config error at env.prompts: must be >= 1");
  if (e.pairs_per_prompt < 0)
    throw ConfigError("config error at env.pairs_per_prompt: must be >= 0");
  if (!(e.tau >= 0.0)) throw ConfigError("config error at env.tau: must be >= 0");
  if (static_cast<int>(e.quality_weights.size()) != p.feature_dim)
    throw ConfigError("config error at env.quality_weights: length must equal feature_dim");
  double norm2 = 0.0;
  for (double w : e.quality_weights) norm2 += w * w;
  if (std::abs(norm2 - 1.0) > 1e-6)
    throw ConfigError("config error at env.quality_weights: must be a unit vector");

  if (cfg.eval.k_list.empty())
    throw ConfigError("config error at eval.k_list: must be non-empty");
  for (int k : cfg.eval.k_list)
    if (k < 1) throw ConfigError("config error at eval.k_list: every k must be >= 1");
  if (cfg.eval.eval_interval < 1)
    throw ConfigError("config error at eval.eval_interval: must be >= 1");

  rewards::RewardSpec spec{cfg.reward_components};
  const AnswerKind ak = cfg.env.kind == synthenv::DatasetKind::Rating ? AnswerKind::Rating
                                                                      : AnswerKind::Preference;
  rewards::validate_reward_spec(spec, ak);
}

inline RunConfig config_from_json(const json& root) {
  if (!root.is_object()) throw ConfigError("config error: top level must be an object");
  detail::reject_unknown_keys(root, {"policy", "grpo", "rewards", "env", "eval"}, "config");
  RunConfig cfg;

  if (root.contains("policy")) {
    const json& j = root.at("policy");
    detail::reject_unknown_keys(j,
                                {"feature_dim", "feature_bins", "l_think", "rating_values",
                                 "prompt_buckets", "reasoning_tokens", "summary_buckets",
                                 "sample_structural"},
                                "policy");
    auto& p = cfg.policy;
    p.feature_dim = detail::get_field(j, "feature_dim", p.feature_dim, "policy");
    p.feature_bins = detail::get_field(j, "feature_bins", p.feature_bins, "policy");
    p.l_think = detail::get_field(j, "l_think", p.l_think, "policy");
    p.rating_values = detail::get_field(j, "rating_values", p.rating_values, "policy");
    p.prompt_buckets = detail::get_field(j, "prompt_buckets", p.prompt_buckets, "policy");
    p.reasoning_tokens = detail::get_field(j, "reasoning_tokens", p.reasoning_tokens, "policy");
    p.summary_buckets = detail::get_field(j, "summary_buckets", p.summary_buckets, "policy");
    p.sample_structural = detail::get_field(j, "sample_structural", p.sample_structural, "policy");
  }

  if (root.contains("grpo")) {
    const json& j = root.at("grpo");
    detail::reject_unknown_keys(j,
                                {"group_size", "clip_epsilon", "kl_coeff", "learning_rate",
                                 "steps", "inner_epochs", "std_floor", "batch_size", "seed"},
                                "grpo");
    auto& g = cfg.grpo;
    g.group_size = detail::get_field(j, "group_size", g.group_size, "grpo");
    g.clip_epsilon = detail::get_field(j, "clip_epsilon", g.clip_epsilon, "grpo");
    g.kl_coeff = detail::get_field(j, "kl_coeff", g.kl_coeff, "grpo");
    g.learning_rate = detail::get_field(j, "learning_rate", g.learning_rate, "grpo");
    g.steps = detail::get_field(j, "steps", g.steps, "grpo");
    g.inner_epochs = detail::get_field(j, "inner_epochs", g.inner_epochs, "grpo");
    g.std_floor = detail::get_field(j, "std_floor", g.std_floor, "grpo");
    g.batch_size = detail::get_field(j, "batch_size", g.batch_size, "grpo");
    g.seed = detail::get_field(j, "seed", g.seed, "grpo");
  }

  if (root.contains("env")) {
    const json& j = root.at("env");
    detail::reject_unknown_keys(
        j, {"kind", "n_items", "prompts", "pairs_per_prompt", "tau", "quality_weights"}, "env");
    auto& e = cfg.env;
    const std::string kind = detail::get_field<std::string>(j, "kind", "pairwise", "env");
    if (kind == "rating") e.kind = synthenv::DatasetKind::Rating;
    else if (kind == "pairwise") e.kind = synthenv::DatasetKind::Pairwise;
    else throw ConfigError("config error at env.kind: must be 'rating' or 'pairwise'");
    e.n_items = detail::get_field(j, "n_items", e.n_items, "env");
    e.prompts = detail::get_field(j, "prompts", e.prompts, "env");
    e.pairs_per_prompt = detail::get_field(j, "pairs_per_prompt", e.pairs_per_prompt, "env");
    e.tau = detail::get_field(j, "tau", e.tau, "env");
    e.quality_weights = detail::get_field(j, "quality_weights", e.quality_weights, "env");
  }

  if (root.contains("rewards")) {
    const json& j = root.at("rewards");
    if (!j.is_array()) throw ConfigError("config error at rewards: must be an array");
    cfg.reward_components.clear();
    size_t idx = 0;
    for (const json& item : j) {
      const std::string path = "rewards[" + std::to_string(idx++) + "]";
      if (!item.is_object()) throw ConfigError("config error at " + path + ": must be an object");
      detail::reject_unknown_keys(item, {"kind", "weight"}, path);
      if (!item.contains("kind"))
        throw ConfigError("config error at " + path + ": missing 'kind'");
      rewards::Component c;
      c.kind = detail::reward_kind_from_name(
          detail::get_field<std::string>(item, "kind", "", path));
      c.weight = detail::get_field(item, "weight", 1.0, path);
      cfg.reward_components.push_back(c);
    }
  } else {
    cfg.reward_components = default_rewards(cfg.env.kind);
  }

  if (root.contains("eval")) {
    const json& j = root.at("eval");
    detail::reject_unknown_keys(j, {"k_list", "eval_interval"}, "eval");
    cfg.eval.k_list = detail::get_field(j, "k_list", cfg.eval.k_list, "eval");
    cfg.eval.eval_interval = detail::get_field(j, "eval_interval", cfg.eval.eval_interval, "eval");
  }

  validate_config(cfg);
  return cfg;
}

inline json to_json(const RunConfig& cfg) {
  json rewards_json = json::array();
  for (const auto& c : cfg.reward_components)
    rewards_json.push_back({{"kind", detail::reward_kind_name(c.kind)}, {"weight", c.weight}});
  return {
      {"policy",
       {{"feature_dim", cfg.policy.feature_dim},
        {"feature_bins", cfg.policy.feature_bins},
        {"l_think", cfg.policy.l_think},
        {"rating_values", cfg.policy.rating_values},
        {"prompt_buckets", cfg.policy.prompt_buckets},
        {"reasoning_tokens", cfg.policy.reasoning_tokens},
        {"summary_buckets", cfg.policy.summary_buckets},
        {"sample_structural", cfg.policy.sample_structural}}},
      {"grpo",
       {{"group_size", cfg.grpo.group_size},
        {"clip_epsilon", cfg.grpo.clip_epsilon},
        {"kl_coeff", cfg.grpo.kl_coeff},
        {"learning_rate", cfg.grpo.learning_rate},
        {"steps", cfg.grpo.steps},
        {"inner_epochs", cfg.grpo.inner_epochs},
        {"std_floor", cfg.grpo.std_floor},
        {"batch_size", cfg.grpo.batch_size},
        {"seed", cfg.grpo.seed}}},
      {"rewards", rewards_json},
      {"env",
       {{"kind", synthenv::kind_name(cfg.env.kind)},
        {"n_items", cfg.env.n_items},
        {"prompts", cfg.env.prompts},
        {"pairs_per_prompt", cfg.env.pairs_per_prompt},
        {"tau", cfg.env.tau},
        {"quality_weights", cfg.env.quality_weights}}},
      {"eval", {{"k_list", cfg.eval.k_list}, {"eval_interval", cfg.eval.eval_interval}}}};
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  return config_from_json(root);
}

inline void save_config(const RunConfig& cfg, std::ostream& out) {
  out << to_json(cfg).dump(2) << '\n';
}

// Assembles the runtime task description a config implies.
inline TaskSpec make_task(const RunConfig& cfg) {
  validate_config(cfg);
  const AnswerKind answer = cfg.env.kind == synthenv::DatasetKind::Rating
                                ? AnswerKind::Rating
                                : AnswerKind::Preference;
  SequenceTemplate tmpl(cfg.policy.l_think, answer, cfg.policy.sample_structural);
  FeatureBucketer bucketer(cfg.policy.feature_dim, cfg.policy.feature_bins);
  StateSpace space;
  space.prompt_buckets = cfg.policy.prompt_buckets;
  space.feature_keys = bucketer.n_keys();
  space.steps = tmpl.length();
  space.summary_buckets = cfg.policy.summary_buckets;
  TaskSpec task{Vocabulary::make(cfg.policy.reasoning_tokens, cfg.policy.rating_values),
                bucketer,
                space,
                tmpl,
                rewards::RewardSpec{cfg.reward_components},
                cfg.env.kind,
                cfg.eval.k_list,
                cfg.eval.eval_interval};
  return task;
}

}  // namespace softpref::config
