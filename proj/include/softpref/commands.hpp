#pragma once

/**
 * Pipeline commands behind the CLI: gen-data, train, eval, rank. Each command
 * is a plain function over parsed options so tests can call it in-process;
 * the CLI binary only parses flags and maps exceptions to exit codes. With
 * identical inputs and seed every command writes byte-identical files.
 */

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "softpref/checkpoint.hpp"
#include "softpref/config.hpp"
#include "softpref/error.hpp"
#include "softpref/eval.hpp"
#include "softpref/grpo.hpp"
#include "softpref/softscore.hpp"
#include "softpref/synthenv.hpp"
#include "softpref/textio.hpp"

namespace softpref::cli {

using nlohmann::json;

namespace detail {

inline config::RunConfig load_config_with_seed(const std::string& path,
                                               std::optional<uint64_t> seed_override) {
  config::RunConfig cfg = config::load_config(path);
  if (seed_override) cfg.grpo.seed = *seed_override;
  return cfg;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

inline synthenv::PreferenceDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  return synthenv::read_dataset(in);
}

}  // namespace detail

struct GenDataArgs {
  std::string config_path;
  std::string out_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> items_out;
};

inline void cmd_gen_data(const GenDataArgs& args, std::ostream& log = std::cout) {
  const config::RunConfig cfg = detail::load_config_with_seed(args.config_path, args.seed);
  const rng::Seed root{cfg.grpo.seed};
  const auto items = synthenv::gen_items(cfg.env.n_items, cfg.policy.feature_dim,
                                         cfg.env.quality_weights, root.derive("items"));
  synthenv::PreferenceDataset ds;
  if (cfg.env.kind == synthenv::DatasetKind::Pairwise) {
    ds = synthenv::gen_pairwise_dataset(items, cfg.env.prompts, cfg.env.pairs_per_prompt,
                                        cfg.env.tau, root.derive("dataset"));
  } else {
    ds = synthenv::gen_rating_dataset(items, cfg.env.prompts, cfg.env.pairs_per_prompt,
                                      cfg.env.tau, cfg.policy.rating_values,
                                      root.derive("dataset"));
  }
  ds.config_echo = config::to_json(cfg);

  auto out = detail::open_output(args.out_path);
  synthenv::write_dataset(ds, out);
  if (args.items_out) {
    auto items_out = detail::open_output(*args.items_out);
    synthenv::write_items(items, cfg.grpo.seed, config::to_json(cfg), items_out);
  }

  log << "records=" << ds.size() << '\n';
  if (ds.kind == synthenv::DatasetKind::Pairwise) {
    size_t ones = 0;
    for (const auto& r : ds.pairwise) ones += static_cast<size_t>(r.label);
    const double balance =
        ds.pairwise.empty() ? 0.0 : static_cast<double>(ones) / static_cast<double>(ds.size());
    log << "label_balance=" << textio::format_double(balance) << '\n';
  } else {
    std::map<int, size_t> hist;
    for (const auto& r : ds.rating) ++hist[r.target_rating];
    log << "target_histogram=";
    bool first = true;
    for (const auto& [value, count] : hist) {
      if (!first) log << ' ';
      log << value << ':' << count;
      first = false;
    }
    log << '\n';
  }
}

struct TrainArgs {
  std::string config_path;
  std::string data_path;
  std::string checkpoint_out;
  std::string metrics_out;
  std::optional<uint64_t> seed;
};

inline void cmd_train(const TrainArgs& args, std::ostream& log = std::cout) {
  const config::RunConfig cfg = detail::load_config_with_seed(args.config_path, args.seed);
  const TaskSpec task = config::make_task(cfg);
  const synthenv::PreferenceDataset ds = detail::load_dataset(args.data_path);
  if (ds.kind != cfg.env.kind)
    throw ConfigError("train: dataset kind (" + synthenv::kind_name(ds.kind) +
                      ") does not match config env.kind");

  const rng::Seed root{cfg.grpo.seed};
  const rng::Seed eval_seed = root.derive("train-eval");
  auto eval_fn = [&](const PolicyParams& params) {
    return eval::evaluate(params, task, ds, std::vector<int>{task.k_list.front()}, eval_seed)
        .soft_accuracy;
  };
  grpo::TrainResult result = grpo::train(cfg.grpo, task, ds, root.derive("train"), eval_fn);

  checkpoint::Checkpoint ckpt{cfg, std::move(result.params), cfg.grpo.steps};
  checkpoint::save(ckpt, args.checkpoint_out);
  auto metrics = detail::open_output(args.metrics_out);
  grpo::write_metrics_csv(result.metrics, metrics);

  const double final_accuracy =
      (!result.metrics.empty() && result.metrics.back().eval_accuracy)
          ? *result.metrics.back().eval_accuracy
          : eval_fn(ckpt.params);
  log << "final_eval_accuracy=" << textio::format_double(final_accuracy) << '\n';
}

struct EvalArgs {
  std::string checkpoint_path;
  std::string data_path;
  std::string report_out;
  std::optional<std::vector<int>> k_list;
  std::optional<std::string> items_path;
  std::optional<uint64_t> seed;
};

inline void cmd_eval(const EvalArgs& args, std::ostream& log = std::cout) {
  const checkpoint::Checkpoint ckpt = checkpoint::load(args.checkpoint_path);
  const TaskSpec task = config::make_task(ckpt.run_config);
  const synthenv::PreferenceDataset ds = detail::load_dataset(args.data_path);

  std::vector<synthenv::SynthItem> items;
  if (args.items_path) {
    std::ifstream in(*args.items_path, std::ios::binary);
    if (!in) throw DataError("cannot open items '" + *args.items_path + "'");
    items = synthenv::read_items(in);
  }

  const std::vector<int> k_list = args.k_list ? *args.k_list : task.k_list;
  const uint64_t seed = args.seed ? *args.seed : ckpt.run_config.grpo.seed;
  const eval::EvalReport report = eval::evaluate(ckpt.params, task, ds, k_list,
                                                 rng::Seed{seed}.derive("eval"), items);

  const json report_json = eval::report_to_json(report, config::to_json(ckpt.run_config));
  auto out = detail::open_output(args.report_out);
  out << report_json.dump(2) << '\n';
  auto csv = detail::open_output(args.report_out + ".csv");
  eval::report_to_csv(report, csv);

  log << "soft_accuracy=" << textio::format_double(report.soft_accuracy)
      << " hard_accuracy=" << textio::format_double(report.hard_accuracy) << '\n';
}

struct RankArgs {
  std::string checkpoint_path;
  std::string items_path;
  int prompt_id = 0;
  int k = 1;
  std::string out_path;
  std::optional<int> anchor;
  std::optional<uint64_t> seed;
};

inline void cmd_rank(const RankArgs& args, std::ostream& log = std::cout) {
  const checkpoint::Checkpoint ckpt = checkpoint::load(args.checkpoint_path);
  const TaskSpec task = config::make_task(ckpt.run_config);
  if (task.tmpl.answer_kind() != AnswerKind::Preference)
    throw ConfigError("rank: checkpoint is not a pairwise policy");

  std::ifstream in(args.items_path, std::ios::binary);
  if (!in) throw DataError("cannot open items '" + args.items_path + "'");
  const auto items = synthenv::read_items(in);
  if (items.empty()) throw DataError("rank: items file has no items");

  const uint64_t seed = args.seed ? *args.seed : ckpt.run_config.grpo.seed;
  std::optional<int> anchor = args.anchor;
  const softscore::RankedList ranked =
      softscore::anchor_rank(ckpt.params, task.vocab, task.bucketer, items, args.prompt_id,
                             task.tmpl, args.k, rng::Seed{seed}.derive("rank"), anchor);

  json entries = json::array();
  for (const auto& e : ranked.entries)
    entries.push_back(
        {{"item_id", e.item_id}, {"score", e.score}, {"is_anchor", e.is_anchor}});
  const json out_json = {
      {"prompt_id", ranked.prompt_id}, {"anchor_id", ranked.anchor_id}, {"entries", entries}};
  auto out = detail::open_output(args.out_path);
  out << out_json.dump(2) << '\n';

  for (const auto& e : ranked.entries) {
    log << e.item_id << '\t' << textio::format_double(e.score);
    if (e.is_anchor) log << "\t(anchor)";
    log << '\n';
  }
}

}  // namespace softpref::cli
