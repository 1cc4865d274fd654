#pragma once

/**
 * Synthetic preference environment.
 *
 * Items carry standard-normal features and a latent quality q = w . features
 * for a fixed unit weight vector. A Bradley-Terry annotator labels pairs:
 * P(b preferred) = sigmoid((q_b - q_a) / tau), with tau = 0 the deterministic
 * argmax (ties toward label 0). Rating targets come from quantile-binning
 * q + noise against the theoretical quantiles of q's distribution, which is
 * standard normal for unit w, so classes are balanced.
 *
 * Datasets serialize as JSON lines: one header object carrying kind, seed and
 * a config echo, then one record per line.
 */

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "softpref/error.hpp"
#include "softpref/rng.hpp"

namespace softpref::synthenv {

using nlohmann::json;

struct SynthItem {
  int item_id = 0;
  std::vector<double> features;
  double quality = 0.0;
};

enum class DatasetKind { Rating, Pairwise };

inline std::string kind_name(DatasetKind k) {
  return k == DatasetKind::Rating ? "rating" : "pairwise";
}

struct RatingRecord {
  int prompt_id = 0;
  std::vector<double> features;
  int target_rating = 0;
};

struct PairwiseRecord {
  int prompt_id = 0;
  std::vector<double> features_a;
  std::vector<double> features_b;
  int label = 0;  // 1: b preferred over a
};

struct PreferenceDataset {
  DatasetKind kind = DatasetKind::Pairwise;
  uint64_t seed = 0;
  json config_echo = json::object();
  std::vector<RatingRecord> rating;
  std::vector<PairwiseRecord> pairwise;

  size_t size() const {
    return kind == DatasetKind::Rating ? rating.size() : pairwise.size();
  }
};

inline std::vector<SynthItem> gen_items(int n, int feature_dim,
                                        std::span<const double> quality_weights,
                                        rng::Seed seed) {
  if (n < 1) throw ConfigError("gen_items: n must be >= 1");
  if (static_cast<int>(quality_weights.size()) != feature_dim)
    throw ConfigError("gen_items: quality weight vector has wrong dimension");
  std::vector<SynthItem> items(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    rng::Stream stream(seed.derive("item", static_cast<uint64_t>(i)));
    auto& item = items[static_cast<size_t>(i)];
    item.item_id = i;
    item.features.resize(static_cast<size_t>(feature_dim));
    item.quality = 0.0;
    for (int d = 0; d < feature_dim; ++d) {
      item.features[static_cast<size_t>(d)] = stream.normal();
      item.quality += quality_weights[static_cast<size_t>(d)] * item.features[static_cast<size_t>(d)];
    }
  }
  return items;
}

// Bradley-Terry annotation. Returns 1 iff b is preferred.
inline int annotate_pair(double q_a, double q_b, double tau, rng::Stream& stream) {
  if (tau < 0.0) throw ConfigError("annotate_pair: tau must be >= 0");
  if (tau == 0.0) return q_b > q_a ? 1 : 0;
  const double z = (q_b - q_a) / tau;
  const double p_one = 1.0 / (1.0 + std::exp(-z));
  return stream.uniform() < p_one ? 1 : 0;
}

inline PreferenceDataset gen_pairwise_dataset(std::span<const SynthItem> items, int prompts,
                                              int pairs_per_prompt, double tau, rng::Seed seed) {
  if (items.size() < 2) throw ConfigError("gen_pairwise_dataset: need at least 2 items");
  if (prompts < 1) throw ConfigError("gen_pairwise_dataset: prompts must be >= 1");
  if (pairs_per_prompt < 0) throw ConfigError("gen_pairwise_dataset: negative pairs_per_prompt");
  PreferenceDataset ds;
  ds.kind = DatasetKind::Pairwise;
  ds.seed = seed.value;
  for (int p = 0; p < prompts; ++p) {
    for (int j = 0; j < pairs_per_prompt; ++j) {
      rng::Stream stream(
          seed.derive("pair", static_cast<uint64_t>(p)).derive(static_cast<uint64_t>(j)));
      const auto a = stream.below(items.size());
      auto b = stream.below(items.size() - 1);
      if (b >= a) ++b;  // pair without replacement
      PairwiseRecord rec;
      rec.prompt_id = p;
      rec.features_a = items[a].features;
      rec.features_b = items[b].features;
      rec.label = annotate_pair(items[a].quality, items[b].quality, tau, stream);
      ds.pairwise.push_back(std::move(rec));
    }
  }
  return ds;
}

// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline PreferenceDataset gen_rating_dataset(std::span<const SynthItem> items, int prompts,
                                            int records_per_prompt, double tau,
                                            std::span<const int> rating_values, rng::Seed seed) {
  if (items.empty()) throw ConfigError("gen_rating_dataset: need at least 1 item");
  if (rating_values.size() < 2) throw ConfigError("gen_rating_dataset: need >= 2 rating values");
  if (prompts < 1) throw ConfigError("gen_rating_dataset: prompts must be >= 1");
  const int n_bins = static_cast<int>(rating_values.size());
  PreferenceDataset ds;
  ds.kind = DatasetKind::Rating;
  ds.seed = seed.value;
  for (int p = 0; p < prompts; ++p) {
    for (int j = 0; j < records_per_prompt; ++j) {
      rng::Stream stream(
          seed.derive("rate", static_cast<uint64_t>(p)).derive(static_cast<uint64_t>(j)));
      const auto& item = items[stream.below(items.size())];
      const double noisy = item.quality + (tau > 0.0 ? tau * stream.normal() : 0.0);
      // quantile bin of the noisy quality against q ~ N(0,1)
      int bin = static_cast<int>(std::floor(normal_cdf(noisy) * n_bins));
      bin = std::clamp(bin, 0, n_bins - 1);
      RatingRecord rec;
      rec.prompt_id = p;
      rec.features = item.features;
      rec.target_rating = rating_values[static_cast<size_t>(bin)];
      ds.rating.push_back(std::move(rec));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// JSONL serialization
// ---------------------------------------------------------------------------

inline void write_dataset(const PreferenceDataset& ds, std::ostream& out) {
  json header = {{"kind", kind_name(ds.kind)}, {"seed", ds.seed}, {"config", ds.config_echo}};
  out << header.dump() << '\n';
  if (ds.kind == DatasetKind::Rating) {
    for (const auto& r : ds.rating) {
      json j = {{"prompt_id", r.prompt_id},
                {"features", r.features},
                {"target_rating", r.target_rating}};
      out << j.dump() << '\n';
    }
  } else {
    for (const auto& r : ds.pairwise) {
      json j = {{"prompt_id", r.prompt_id},
                {"features_a", r.features_a},
                {"features_b", r.features_b},
                {"label", r.label}};
      out << j.dump() << '\n';
    }
  }
}

namespace detail {

inline json parse_line(const std::string& line, size_t line_no) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded())
    throw DataError("dataset: invalid JSON on line " + std::to_string(line_no));
  if (!j.is_object())
    throw DataError("dataset: line " + std::to_string(line_no) + " is not an object");
  return j;
}

inline void require_keys(const json& j, std::initializer_list<const char*> keys, size_t line_no) {
  for (const char* k : keys)
    if (!j.contains(k))
      throw DataError("dataset: line " + std::to_string(line_no) + " missing key '" + k + "'");
}

}  // namespace detail

inline PreferenceDataset read_dataset(std::istream& in) {
  std::string line;
  size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError("dataset: empty file");
  ++line_no;
  json header = detail::parse_line(line, line_no);
  detail::require_keys(header, {"kind", "seed"}, line_no);
  PreferenceDataset ds;
  const std::string kind = header.at("kind").get<std::string>();
  if (kind == "rating") ds.kind = DatasetKind::Rating;
  else if (kind == "pairwise") ds.kind = DatasetKind::Pairwise;
  else throw DataError("dataset: unknown kind '" + kind + "'");
  ds.seed = header.at("seed").get<uint64_t>();
  ds.config_echo = header.value("config", json::object());
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = detail::parse_line(line, line_no);
    if (ds.kind == DatasetKind::Rating) {
      detail::require_keys(j, {"prompt_id", "features", "target_rating"}, line_no);
      RatingRecord r;
      r.prompt_id = j.at("prompt_id").get<int>();
      r.features = j.at("features").get<std::vector<double>>();
      r.target_rating = j.at("target_rating").get<int>();
      ds.rating.push_back(std::move(r));
    } else {
      detail::require_keys(j, {"prompt_id", "features_a", "features_b", "label"}, line_no);
      PairwiseRecord r;
      r.prompt_id = j.at("prompt_id").get<int>();
      r.features_a = j.at("features_a").get<std::vector<double>>();
      r.features_b = j.at("features_b").get<std::vector<double>>();
      r.label = j.at("label").get<int>();
      if (r.label != 0 && r.label != 1)
        throw DataError("dataset: label out of range on line " + std::to_string(line_no));
      ds.pairwise.push_back(std::move(r));
    }
  }
  return ds;
}

inline void write_items(std::span<const SynthItem> items, uint64_t seed, const json& config_echo,
                        std::ostream& out) {
  json header = {{"kind", "items"}, {"seed", seed}, {"config", config_echo}};
  out << header.dump() << '\n';
  for (const auto& item : items) {
    json j = {{"item_id", item.item_id}, {"features", item.features}, {"quality", item.quality}};
    out << j.dump() << '\n';
  }
}

inline std::vector<SynthItem> read_items(std::istream& in) {
  std::string line;
  size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError("items: empty file");
  ++line_no;
  json header = detail::parse_line(line, line_no);
  if (header.value("kind", "") != "items")
    throw DataError("items: header kind is not 'items'");
  std::vector<SynthItem> items;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = detail::parse_line(line, line_no);
    detail::require_keys(j, {"item_id", "features", "quality"}, line_no);
    SynthItem item;
    item.item_id = j.at("item_id").get<int>();
    item.features = j.at("features").get<std::vector<double>>();
    item.quality = j.at("quality").get<double>();
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace softpref::synthenv
