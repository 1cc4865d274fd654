// softpref command-line interface: gen-data, train, eval, rank.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or format
// error. Flag values override config-file values, which override defaults.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "softpref/commands.hpp"
#include "softpref/error.hpp"

namespace {

struct SeedOpt {
  std::optional<uint64_t> value;
};

void add_seed_flag(CLI::App* cmd, SeedOpt& seed) {
  cmd->add_option_function<uint64_t>(
      "--seed", [&seed](uint64_t v) { seed.value = v; },
      "Root seed override (flag > config file > default)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "softpref: GRPO training and soft-score preference inference on a "
      "synthetic pairwise/rating environment"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic preference dataset (JSONL)");
  softpref::cli::GenDataArgs gen_args;
  SeedOpt gen_seed;
  std::string gen_items_out;
  gen->add_option("--config", gen_args.config_path, "Run config JSON")->required();
  gen->add_option("--out", gen_args.out_path, "Output dataset path (JSONL)")->required();
  gen->add_option("--items-out", gen_items_out, "Also write the item corpus (JSONL)");
  add_seed_flag(gen, gen_seed);

  // train
  auto* train = app.add_subcommand("train", "Train a policy with GRPO");
  softpref::cli::TrainArgs train_args;
  SeedOpt train_seed;
  train->add_option("--config", train_args.config_path, "Run config JSON")->required();
  train->add_option("--data", train_args.data_path, "Training dataset (JSONL)")->required();
  train->add_option("--checkpoint-out", train_args.checkpoint_out, "Checkpoint output path")
      ->required();
  train->add_option("--metrics-out", train_args.metrics_out, "Metrics CSV output path")
      ->required();
  add_seed_flag(train, train_seed);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  softpref::cli::EvalArgs eval_args;
  SeedOpt eval_seed;
  std::vector<int> eval_k_list;
  std::string eval_items;
  eval->add_option("--checkpoint", eval_args.checkpoint_path, "Checkpoint path")->required();
  eval->add_option("--data", eval_args.data_path, "Dataset (JSONL)")->required();
  eval->add_option("--report-out", eval_args.report_out,
                   "Report JSON output path (a .csv sibling is written too)")
      ->required();
  eval->add_option("--k-list", eval_k_list, "Rollout counts for soft scores (default from config)");
  eval->add_option("--items", eval_items, "Item corpus for the rank-quality correlation");
  add_seed_flag(eval, eval_seed);

  // rank
  auto* rank = app.add_subcommand("rank", "Rank items against a random anchor");
  softpref::cli::RankArgs rank_args;
  SeedOpt rank_seed;
  int rank_anchor = -1;
  rank->add_option("--checkpoint", rank_args.checkpoint_path, "Checkpoint path")->required();
  rank->add_option("--items", rank_args.items_path, "Item corpus (JSONL)")->required();
  rank->add_option("--prompt-id", rank_args.prompt_id, "Prompt id for the ranking contexts");
  rank->add_option("--k", rank_args.k, "Soft-score rollouts per comparison")
      ->check(CLI::PositiveNumber);
  rank->add_option("--out", rank_args.out_path, "Ranked list JSON output path")->required();
  rank->add_option("--anchor", rank_anchor, "Pin the anchor to this item id");
  add_seed_flag(rank, rank_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      gen_args.seed = gen_seed.value;
      if (!gen_items_out.empty()) gen_args.items_out = gen_items_out;
      softpref::cli::cmd_gen_data(gen_args);
    } else if (train->parsed()) {
      train_args.seed = train_seed.value;
      softpref::cli::cmd_train(train_args);
    } else if (eval->parsed()) {
      eval_args.seed = eval_seed.value;
      if (!eval_k_list.empty()) eval_args.k_list = eval_k_list;
      if (!eval_items.empty()) eval_args.items_path = eval_items;
      softpref::cli::cmd_eval(eval_args);
    } else if (rank->parsed()) {
      rank_args.seed = rank_seed.value;
      if (rank_anchor >= 0) rank_args.anchor = rank_anchor;
      softpref::cli::cmd_rank(rank_args);
    }
  } catch (const softpref::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const softpref::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const softpref::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
