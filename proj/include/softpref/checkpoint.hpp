#pragma once

/// Versioned policy checkpoints: one JSON document carrying the format
/// version, the full run config, and theta in row-major decimal text (JSON
/// numbers in shortest round-trip form, so save -> load -> save is
/// byte-identical).

#include <fstream>
#include <string>

#include <json.hpp>

#include "softpref/config.hpp"
#include "softpref/error.hpp"
#include "softpref/policy.hpp"

namespace softpref::checkpoint {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

struct Checkpoint {
  config::RunConfig run_config;
  PolicyParams params;
  int steps_trained = 0;
};

inline json to_json(const Checkpoint& ckpt) {
  return {{"format_version", kFormatVersion},
          {"config", config::to_json(ckpt.run_config)},
          {"n_states", ckpt.params.space.n_states()},
          {"vocab_size", ckpt.params.vocab_size},
          {"revision", ckpt.params.revision},
          {"steps_trained", ckpt.steps_trained},
          {"theta", ckpt.params.theta}};
}

inline void save(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write '" + path + "'");
  out << to_json(ckpt).dump() << '\n';
}

inline Checkpoint load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("checkpoint: " + std::string(e.what()));
  }
  if (!j.contains("format_version") || !j.at("format_version").is_number_integer())
    throw DataError("checkpoint: missing format_version");
  const int version = j.at("format_version").get<int>();
  if (version != kFormatVersion)
    throw DataError("checkpoint: format version " + std::to_string(version) +
                    " not supported (expected " + std::to_string(kFormatVersion) + ")");
  Checkpoint ckpt;
  ckpt.run_config = config::config_from_json(j.at("config"));
  const TaskSpec task = config::make_task(ckpt.run_config);
  ckpt.params = make_params(task.space, task.vocab);
  ckpt.params.theta = j.at("theta").get<std::vector<double>>();
  ckpt.params.revision = j.value("revision", uint64_t{0});
  ckpt.steps_trained = j.value("steps_trained", 0);
  if (ckpt.params.theta.size() !=
      static_cast<size_t>(task.space.n_states()) * static_cast<size_t>(task.vocab.size()))
    throw DataError("checkpoint: theta length does not match the configured state space");
  if (j.value("n_states", task.space.n_states()) != task.space.n_states() ||
      j.value("vocab_size", task.vocab.size()) != task.vocab.size())
    throw DataError("checkpoint: recorded dimensions disagree with config");
  return ckpt;
}

}  // namespace softpref::checkpoint
