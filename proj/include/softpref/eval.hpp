#pragma once

/**
 * Evaluation metrics over preference datasets.
 *
 * Soft accuracy thresholds the soft score per record at each requested k;
 * hard accuracy samples exactly one answer per record; kendall_tau (tau-a,
 * all pairs, ties count as neither) correlates per-item scores with latent
 * quality when items are supplied. Rating-task "accuracy" means the nearest
 * rating value to the expected rating matches the target (ties toward the
 * lower value). A soft pairwise score of exactly 0.5 predicts label 0.
 */

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "softpref/error.hpp"
#include "softpref/policy.hpp"
#include "softpref/rng.hpp"
#include "softpref/softscore.hpp"
#include "softpref/synthenv.hpp"
#include "softpref/task.hpp"
#include "softpref/textio.hpp"

namespace softpref::eval {

using nlohmann::json;

struct EvalReport {
  double pairwise_accuracy = 0.0;  // headline soft accuracy (first k in k_list)
  std::optional<double> mean_at_1;
  std::optional<double> mean_at_3;
  std::vector<std::pair<int, double>> accuracy_at_k;  // one entry per k in k_list
  double soft_accuracy = 0.0;
  double hard_accuracy = 0.0;
  std::optional<double> kendall_tau;
  size_t n_records = 0;
  uint64_t seed = 0;
};

inline double pairwise_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.empty()) throw DataError("pairwise_accuracy: empty input");
  if (predictions.size() != labels.size())
    throw DataError("pairwise_accuracy: mismatched lengths");
  size_t hits = 0;
  for (size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

// Threshold rule for soft pairwise scores; exact 0.5 predicts 0.
inline int soft_pairwise_prediction(double score) {
  if (!(score >= 0.0) || !(score <= 1.0))
    throw DataError("soft_pairwise_prediction: score outside [0, 1]");
  return score > 0.5 ? 1 : 0;
}

// Kendall tau-a: (concordant - discordant) / C(n, 2); ties count as neither.
inline double kendall_tau(std::span<const double> scores, std::span<const double> qualities) {
  const size_t n = scores.size();
  if (n != qualities.size()) throw DataError("kendall_tau: mismatched lengths");
  if (n < 2) throw DataError("kendall_tau: need at least 2 entries");
  long long net = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const double ds = scores[i] - scores[j];
      const double dq = qualities[i] - qualities[j];
      if (ds == 0.0 || dq == 0.0) continue;
      net += (ds > 0.0) == (dq > 0.0) ? 1 : -1;
    }
  }
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  return static_cast<double>(net) / pairs;
}

namespace detail {

// Nearest rating value to a continuous score; ties toward the lower value.
inline int nearest_rating(double score, std::span<const int> values) {
  int best = values[0];
  double best_d = std::abs(score - values[0]);
  for (int v : values) {
    const double d = std::abs(score - v);
    if (d < best_d) {
      best_d = d;
      best = v;
    }
  }
  return best;
}

}  // namespace detail

/**
 * Full evaluation pass. Soft accuracy is computed at every k in k_list with
 * per-record derived sub-seeds; the hard baseline samples one answer per
 * record. When items are given, kendall_tau correlates model scores with
 * latent quality: expected ratings per item on rating tasks, anchor-rank
 * scores (non-anchor entries) on pairwise tasks.
 */
inline EvalReport evaluate(const PolicyParams& params, const TaskSpec& task,
                           const synthenv::PreferenceDataset& dataset,
                           std::span<const int> k_list, rng::Seed seed,
                           std::span<const synthenv::SynthItem> items = {}) {
  if ((dataset.kind == synthenv::DatasetKind::Rating) !=
      (task.tmpl.answer_kind() == AnswerKind::Rating))
    throw ConfigError("evaluate: dataset kind does not match task");
  if (dataset.size() == 0) throw DataError("evaluate: empty dataset");
  if (k_list.empty()) throw ConfigError("evaluate: k_list must be non-empty");
  for (int k : k_list)
    if (k < 1) throw ConfigError("evaluate: every k must be >= 1");

  EvalReport report;
  report.n_records = dataset.size();
  report.seed = seed.value;

  const bool rating_task = dataset.kind == synthenv::DatasetKind::Rating;
  size_t hard_hits = 0;
  std::vector<size_t> soft_hits(k_list.size(), 0);
  for (size_t i = 0; i < dataset.size(); ++i) {
    const Context ctx = context_for_record(task, dataset, i);
    const int target = target_for_record(dataset, i);
    for (size_t ki = 0; ki < k_list.size(); ++ki) {
      const double score =
          softscore::mean_at_k(params, task.vocab, ctx, task.tmpl, k_list[ki],
                               seed.derive("soft", i).derive(ki));
      const int pred = rating_task
                           ? detail::nearest_rating(score, task.vocab.rating_values())
                           : soft_pairwise_prediction(score);
      if (pred == target) ++soft_hits[ki];
    }
    rng::Stream hard_stream(seed.derive("hard", i));
    const int hard_pred =
        softscore::hard_answer_of_context(params, task.vocab, ctx, task.tmpl, hard_stream);
    if (hard_pred == target) ++hard_hits;
  }

  const double inv_n = 1.0 / static_cast<double>(dataset.size());
  for (size_t ki = 0; ki < k_list.size(); ++ki) {
    const double acc = static_cast<double>(soft_hits[ki]) * inv_n;
    report.accuracy_at_k.emplace_back(k_list[ki], acc);
    if (k_list[ki] == 1 && !report.mean_at_1) report.mean_at_1 = acc;
    if (k_list[ki] == 3 && !report.mean_at_3) report.mean_at_3 = acc;
  }
  report.soft_accuracy = report.accuracy_at_k.front().second;
  report.pairwise_accuracy = report.soft_accuracy;
  report.hard_accuracy = static_cast<double>(hard_hits) * inv_n;

  if (items.size() >= 2) {
    std::vector<double> scores;
    std::vector<double> qualities;
    if (rating_task) {
      for (const auto& item : items) {
        Context ctx;
        ctx.task_kind = TaskKind::Rating;
        ctx.prompt_id = 0;
        ctx.feature_key = task.bucketer.key(item.features);
        scores.push_back(softscore::mean_at_k(params, task.vocab, ctx, task.tmpl, k_list[0],
                                              seed.derive("tau", item.item_id)));
        qualities.push_back(item.quality);
      }
    } else {
      const auto ranked =
          softscore::anchor_rank(params, task.vocab, task.bucketer, items, 0, task.tmpl,
                                 k_list[0], seed.derive("tau"));
      for (const auto& entry : ranked.entries) {
        if (entry.is_anchor) continue;
        for (const auto& item : items) {
          if (item.item_id == entry.item_id) {
            scores.push_back(entry.score);
            qualities.push_back(item.quality);
            break;
          }
        }
      }
    }
    if (scores.size() >= 2) report.kendall_tau = kendall_tau(scores, qualities);
  }
  return report;
}

inline json report_to_json(const EvalReport& report, const json& config_echo) {
  json at_k = json::object();
  for (const auto& [k, acc] : report.accuracy_at_k) at_k[std::to_string(k)] = acc;
  json j = {{"pairwise_accuracy", report.pairwise_accuracy},
            {"soft_accuracy", report.soft_accuracy},
            {"hard_accuracy", report.hard_accuracy},
            {"mean_at_k", at_k},
            {"mean_at_1", report.mean_at_1 ? json(*report.mean_at_1) : json()},
            {"mean_at_3", report.mean_at_3 ? json(*report.mean_at_3) : json()},
            {"kendall_tau", report.kendall_tau ? json(*report.kendall_tau) : json()},
            {"n_records", report.n_records},
            {"seed", report.seed},
            {"config", config_echo}};
  return j;
}

// Flat one-row CSV variant for sweep aggregation.
inline void report_to_csv(const EvalReport& report, std::ostream& out) {
  out << "n_records,pairwise_accuracy,soft_accuracy,hard_accuracy,mean_at_1,mean_at_3,"
         "kendall_tau,seed\n";
  out << report.n_records << ',' << textio::format_double(report.pairwise_accuracy) << ','
      << textio::format_double(report.soft_accuracy) << ','
      << textio::format_double(report.hard_accuracy) << ',';
  if (report.mean_at_1) out << textio::format_double(*report.mean_at_1);
  out << ',';
  if (report.mean_at_3) out << textio::format_double(*report.mean_at_3);
  out << ',';
  if (report.kendall_tau) out << textio::format_double(*report.kendall_tau);
  out << ',' << report.seed << '\n';
}

}  // namespace softpref::eval
