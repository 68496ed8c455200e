#pragma once

#include <algorithm>
#include <atomic>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "rater_equiv/error.hpp"
#include "rater_equiv/judge/cache.hpp"
#include "rater_equiv/judge/client.hpp"
#include "rater_equiv/judge/prompt.hpp"
#include "rater_equiv/ratings.hpp"

namespace rater_equiv::judge {

struct DescriptionResult {
  std::string text;
  bool empty = false;       // transcription came back blank; item still usable without text
  bool from_store = false;  // no model call was made
};

// Transcribes the handwritten description on a sketch once; later calls for
// the same item are served from the store.
inline DescriptionResult extract_description(const std::string& item_id, const std::string& image_path,
                                             ModelClient& client, DescriptionStore& store,
                                             const std::string& model_name, const PromptTemplates& templates = {},
                                             const ImageLoader& load_image = load_image_raw) {
  if (auto stored = store.get(item_id)) return {*stored, stored->empty(), true};
  std::string text = client.complete(transcription_request(model_name, templates.transcription, image_path, load_image));
  auto b = text.find_first_not_of(" \t\r\n");
  auto e = text.find_last_not_of(" \t\r\n");
  text = b == std::string::npos ? std::string() : text.substr(b, e - b + 1);
  store.put(item_id, text);
  return {text, text.empty(), false};
}

struct JudgeOptions {
  std::string metric;
  std::uint64_t run_seed = 1;
  int retries = 2;  // extra requests after an unparseable reply
  std::size_t parallelism = 1;
  bool strict_parsing = false;
  RatingScale scale;
  PromptTemplates templates;
  ImageLoader load_image = load_image_raw;
};

struct JudgeFailure {
  std::string item_id;
  std::string reason;
};

struct JudgeResult {
  std::map<std::string, int> ratings;
  std::vector<JudgeFailure> failures;  // the failure manifest
  std::map<std::string, std::string> bundle_hashes;
  std::size_t client_calls = 0;
  std::size_t cache_hits = 0;
};

inline JudgeResult run_judge(const JudgeVariant& variant, const std::vector<TargetItem>& items,
                             const std::vector<Demonstration>& demos, ModelClient& client,
                             const ResponseCache* cache, const JudgeOptions& options) {
  std::set<std::string> demo_ids;
  for (const auto& d : demos) demo_ids.insert(d.item_id);
  for (const auto& item : items) {
    if (demo_ids.count(item.item_id)) {
      throw Error(ErrorCode::kParameter, "demonstration item '" + item.item_id + "' is also a test item");
    }
  }

  struct Outcome {
    std::optional<int> rating;
    std::string reason;
    std::string hash;
  };
  std::vector<Outcome> outcomes(items.size());
  std::atomic<std::size_t> next{0}, calls{0}, hits{0};

  auto judge_one = [&](const TargetItem& item, Outcome& out) {
    PromptBundle bundle;
    try {
      bundle = build_prompt(variant, demos, item, options.metric, options.templates, options.scale);
    } catch (const Error& e) {
      out.reason = e.what();
      return;
    }
    out.hash = bundle.content_hash;
    const CacheKey key{std::string(variant_name(variant.kind)), options.metric, variant.model_name, item.item_id,
                       options.run_seed, bundle.content_hash};
    if (cache) {
      if (auto cached = cache->load(key); cached && cached->parsed_rating) {
        hits.fetch_add(1);
        out.rating = cached->parsed_rating;
        return;
      }
    }
    ChatRequest request;
    try {
      request = to_chat_request(bundle, variant, options.load_image);
    } catch (const Error& e) {
      out.reason = e.what();
      return;
    }
    std::string last_raw;
    for (int attempt = 0; attempt <= options.retries; ++attempt) {
      try {
        calls.fetch_add(1);
        last_raw = client.complete(request);
      } catch (const Error& e) {
        out.reason = e.what();
        return;
      }
      try {
        const int rating = parse_rating(last_raw, options.scale, options.strict_parsing);
        if (cache) cache->store({key, last_raw, rating, utc_timestamp()});
        out.rating = rating;
        return;
      } catch (const Error&) {
      }
    }
    out.reason = "no parseable rating after " + std::to_string(options.retries + 1) + " attempts; last reply: '" +
                 last_raw + "'";
  };

  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < items.size(); i = next.fetch_add(1)) judge_one(items[i], outcomes[i]);
  };
  const std::size_t threads = std::clamp<std::size_t>(options.parallelism, 1, std::max<std::size_t>(1, items.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  JudgeResult result;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!outcomes[i].hash.empty()) result.bundle_hashes[items[i].item_id] = outcomes[i].hash;
    if (outcomes[i].rating) {
      result.ratings[items[i].item_id] = *outcomes[i].rating;
    } else {
      result.failures.push_back({items[i].item_id, outcomes[i].reason});
    }
  }
  std::sort(result.failures.begin(), result.failures.end(),
            [](const JudgeFailure& l, const JudgeFailure& r) { return l.item_id < r.item_id; });
  result.client_calls = calls.load();
  result.cache_hits = hits.load();
  return result;
}

}  // namespace rater_equiv::judge
