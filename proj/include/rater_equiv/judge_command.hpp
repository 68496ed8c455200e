#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "rater_equiv/config.hpp"
#include "rater_equiv/csv.hpp"
#include "rater_equiv/error.hpp"
#include "rater_equiv/judge/cache.hpp"
#include "rater_equiv/judge/client.hpp"
#include "rater_equiv/judge/judge.hpp"
#include "rater_equiv/judge/prompt.hpp"
#include "rater_equiv/ratings.hpp"

namespace rater_equiv {

struct JudgeCommandOutput {
  fs::path directory;
  fs::path ratings_csv;
  fs::path failures_csv;
  fs::path demonstrations_csv;
  std::string rater_id;
  judge::JudgeResult result;
  std::vector<judge::Demonstration> demonstrations;
  std::size_t description_calls = 0;

  int exit_status() const { return result.failures.empty() ? 0 : 1; }
};

inline fs::path default_judge_dir(const AnalysisConfig& config, const std::string& metric, std::uint64_t seed) {
  return config.output_dir / "judge" / judge::safe_component(config.judge.variant) / judge::safe_component(metric) /
         ("run_" + std::to_string(seed));
}

namespace detail {

inline judge::PromptTemplates load_templates(const fs::path& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open prompt templates '" + path.string() + "'");
  try {
    return judge::PromptTemplates::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t parallelism, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
  };
  const std::size_t threads = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(count, 1));
  if (threads == 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
}

}  // namespace detail

// Rates the test partition of the split with one judge variant and writes
// ratings.csv (standard ratings schema), failures.csv and demonstrations.csv.
// A warm response cache makes reruns call the provider zero times.
inline JudgeCommandOutput cmd_judge(const AnalysisConfig& config, const std::string& metric, std::uint64_t seed,
                                    judge::ModelClient& client,
                                    const judge::ImageLoader& load_image = judge::load_image_raw,
                                    std::optional<fs::path> out_dir = std::nullopt,
                                    judge::LogSink log = judge::stderr_log()) {
  const auto& js = config.judge;
  if (!config.split_manifest) {
    throw Error(ErrorCode::kParameter, "judge needs 'split_manifest' in the config (run 'split' first)");
  }
  DatasetSplit split;
  {
    std::ifstream in(*config.split_manifest);
    if (!in) throw Error(ErrorCode::kIo, "cannot open split manifest '" + config.split_manifest->string() + "'");
    split = read_split_manifest(in);
  }
  const RatingMatrix ratings = load_rating_files(config.ratings, config.scale);

  judge::JudgeVariant variant = judge::make_variant(judge::parse_variant(js.variant));
  if (!js.model.empty()) variant.model_name = js.model;
  const auto templates = detail::load_templates(js.templates);

  judge::RetryPolicy policy;
  policy.max_attempts = std::max(1, js.transport_attempts);
  judge::RetryingClient retrying(client, policy, log);

  auto image_path = [&](const std::string& item) {
    return (js.images_dir / (item + "." + js.image_extension)).string();
  };

  JudgeCommandOutput out;
  out.directory = out_dir ? *out_dir : default_judge_dir(config, metric, seed);
  out.rater_id = js.rater_id.empty() ? judge::variant_rater_id(variant.kind) : js.rater_id;

  std::map<std::string, int> agreed;
  for (const auto& [item, rating] : agreed_items(ratings, config.expert_a, config.expert_b, metric)) {
    if (split.context_pool.count(item)) agreed.emplace(item, rating);
  }
  const std::vector<std::string> test_items(split.test_set.begin(), split.test_set.end());

  // Descriptions are transcribed once per item and persisted in the store.
  judge::DescriptionStore store(js.descriptions);
  std::map<std::string, std::string> failed_descriptions;
  if (variant.needs_description()) {
    std::vector<std::string> wanted;
    for (const auto& [item, rating] : agreed) wanted.push_back(item);
    wanted.insert(wanted.end(), test_items.begin(), test_items.end());
    std::vector<std::optional<std::string>> errors(wanted.size());
    std::atomic<std::size_t> calls{0};
    detail::parallel_for(wanted.size(), js.parallelism, [&](std::size_t i) {
      try {
        auto r = judge::extract_description(wanted[i], image_path(wanted[i]), retrying, store, js.description_model,
                                            templates, load_image);
        if (!r.from_store) calls.fetch_add(1);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    });
    out.description_calls = calls.load();
    for (std::size_t i = 0; i < wanted.size(); ++i) {
      if (errors[i]) failed_descriptions.emplace(wanted[i], "description extraction failed: " + *errors[i]);
    }
  }
  const auto descriptions = store.snapshot();

  std::vector<judge::TargetItem> targets;
  for (const auto& item : test_items) {
    judge::TargetItem t{item, std::nullopt, std::nullopt};
    if (auto d = descriptions.find(item); d != descriptions.end()) t.description = d->second;
    if (fs::exists(image_path(item))) t.image = image_path(item);
    targets.push_back(std::move(t));
  }

  std::optional<std::string> context_error;
  if (variant.needs_demonstrations()) {
    try {
      out.demonstrations = judge::select_context(agreed, descriptions, config.scale, js.demo_count, seed);
    } catch (const Error& e) {
      context_error = e.what();
    }
  }

  if (context_error) {
    for (const auto& item : test_items) out.result.failures.push_back({item, "no demonstrations: " + *context_error});
  } else {
    judge::ResponseCache cache(js.cache_dir);
    judge::JudgeOptions options;
    options.metric = metric;
    options.run_seed = seed;
    options.retries = js.retries;
    options.parallelism = js.parallelism;
    options.scale = config.scale;
    options.templates = templates;
    options.load_image = load_image;
    out.result = judge::run_judge(variant, targets, out.demonstrations, retrying, &cache, options);
    // Prefer the root cause when a missing description made an item unratable.
    for (auto& f : out.result.failures) {
      if (auto it = failed_descriptions.find(f.item_id); it != failed_descriptions.end()) f.reason = it->second;
    }
  }

  fs::create_directories(out.directory);
  out.ratings_csv = out.directory / "ratings.csv";
  out.failures_csv = out.directory / "failures.csv";
  out.demonstrations_csv = out.directory / "demonstrations.csv";

  std::ostringstream rows, failures, demos;
  csv::write_row(rows, ratings_header());
  for (const auto& [item, rating] : out.result.ratings) {
    csv::write_row(rows, {item, out.rater_id, metric, std::to_string(rating)});
  }
  csv::write_row(failures, {"item_id", "reason"});
  for (const auto& f : out.result.failures) csv::write_row(failures, {f.item_id, f.reason});
  csv::write_row(demos, {"position", "item_id", "rating"});
  for (std::size_t i = 0; i < out.demonstrations.size(); ++i) {
    csv::write_row(demos, {std::to_string(i + 1), out.demonstrations[i].item_id,
                           std::to_string(out.demonstrations[i].rating)});
  }
  judge::atomic_write(out.ratings_csv, rows.str());
  judge::atomic_write(out.failures_csv, failures.str());
  judge::atomic_write(out.demonstrations_csv, demos.str());
  return out;
}

}  // namespace rater_equiv
