#pragma once

// Offline judge workspace: ratings, split, fake sketches and a scripted provider.

#include <atomic>
#include <mutex>
#include <set>
#include <sstream>
#include <string>

#include "rater_equiv/config.hpp"
#include "rater_equiv/judge/client.hpp"
#include "test_util.hpp"

namespace testutil {

// Deterministic provider: transcriptions and ratings are functions of the
// request payload only. Items listed in `garbage` never get a parseable reply.
class ScriptedClient : public rater_equiv::judge::ModelClient {
 public:
  std::string complete(const rater_equiv::judge::ChatRequest& request) override {
    calls_.fetch_add(1);
    const std::string body = rater_equiv::judge::chat_request_json(request).dump();
    const std::string digest = rater_equiv::judge::sha256_hex(body);
    const auto& first = request.messages.back().parts.front().text;
    if (first.rfind("Transcribe", 0) == 0) return "  sketch " + digest.substr(0, 8) + "\n";
    {
      std::lock_guard lock(mutex_);
      for (const auto& g : garbage_) {
        if (body.find(g) != std::string::npos) return "I cannot decide.";
      }
    }
    return "Rating: " + std::to_string(1 + std::stoi(digest.substr(0, 6), nullptr, 16) % 6);
  }

  void add_garbage(const std::string& needle) {
    std::lock_guard lock(mutex_);
    garbage_.insert(needle);
  }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::atomic<std::size_t> calls_{0};
  std::mutex mutex_;
  std::set<std::string> garbage_;
};

// Writes ratings (two experts), a split manifest, one fake image per item and
// a config into `root`. The pool holds 2 agreed items per rating value.
inline rater_equiv::AnalysisConfig make_judge_workspace(const fs::path& root, std::size_t test_items = 20) {
  std::ostringstream ratings;
  ratings << "item_id,rater_id,metric,rating\n";
  rater_equiv::DatasetSplit split;
  auto add = [&](const std::string& id, int a, int b) {
    ratings << id << ",expert_1,uniqueness," << a << '\n' << id << ",expert_2,uniqueness," << b << '\n';
    spit(root / "images" / (id + ".png"), "fake image bytes for " + id);
  };
  for (int r = 1; r <= 6; ++r) {
    for (int k = 0; k < 2; ++k) {
      const std::string id = "pool_" + std::to_string(r) + "_" + std::to_string(k);
      add(id, r, r);
      split.context_pool.insert(id);
    }
  }
  for (std::size_t i = 0; i < test_items; ++i) {
    const std::string id = "test_" + std::to_string(100 + i);
    add(id, 1 + static_cast<int>(i % 6), 1 + static_cast<int>((i * 5) % 6));
    split.test_set.insert(id);
  }
  spit(root / "ratings.csv", ratings.str());
  std::ostringstream manifest;
  rater_equiv::write_split_manifest(manifest, split);
  spit(root / "split.csv", manifest.str());

  const std::string config = R"({
  "ratings": ["ratings.csv"],
  "metrics": ["uniqueness"],
  "split_manifest": "split.csv",
  "output_dir": "out",
  "runs": [{"id": "run1", "seed": 1}],
  "judge": {"variant": "text_image", "images_dir": "images", "descriptions": "descriptions.csv",
            "cache_dir": "cache", "parallelism": 4, "transport_attempts": 1}
})";
  spit(root / "config.json", config);
  return rater_equiv::load_config(root / "config.json");
}

}  // namespace testutil
