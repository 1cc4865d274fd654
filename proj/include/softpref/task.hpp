#pragma once

/// TaskSpec bundles everything a training or evaluation run needs besides
/// the optimizer settings: vocabulary, state space, feature bucketing, the
/// sequence template, the reward composition, and eval cadence.

#include <vector>

#include "softpref/policy.hpp"
#include "softpref/rewards.hpp"
#include "softpref/synthenv.hpp"
#include "softpref/vocab.hpp"

namespace softpref {

struct TaskSpec {
  Vocabulary vocab;
  FeatureBucketer bucketer;
  StateSpace space;
  SequenceTemplate tmpl;
  rewards::RewardSpec reward_spec;
  synthenv::DatasetKind kind = synthenv::DatasetKind::Pairwise;
  std::vector<int> k_list = {1, 3};
  int eval_interval = 100;
};

inline Context context_for_rating(const TaskSpec& task, const synthenv::RatingRecord& rec) {
  Context ctx;
  ctx.task_kind = TaskKind::Rating;
  ctx.prompt_id = rec.prompt_id;
  ctx.feature_key = task.bucketer.key(rec.features);
  return ctx;
}

inline Context context_for_pairwise(const TaskSpec& task, const synthenv::PairwiseRecord& rec) {
  Context ctx;
  ctx.task_kind = TaskKind::Pairwise;
  ctx.prompt_id = rec.prompt_id;
  ctx.feature_key = task.bucketer.key_diff(rec.features_a, rec.features_b);
  return ctx;
}

inline Context context_for_record(const TaskSpec& task, const synthenv::PreferenceDataset& ds,
                                  size_t index) {
  if (ds.kind == synthenv::DatasetKind::Rating)
    return context_for_rating(task, ds.rating[index]);
  return context_for_pairwise(task, ds.pairwise[index]);
}

// Target the rewards compare against: rating value, or pairwise label.
inline int target_for_record(const synthenv::PreferenceDataset& ds, size_t index) {
  if (ds.kind == synthenv::DatasetKind::Rating) return ds.rating[index].target_rating;
  return ds.pairwise[index].label;
}

}  // namespace softpref
