#pragma once

#include <atomic>
#include <cctype>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "json.hpp"

#include "rater_equiv/csv.hpp"
#include "rater_equiv/error.hpp"

namespace rater_equiv::judge {

namespace fs = std::filesystem;

struct CacheKey {
  std::string variant;
  std::string metric;
  std::string model_name;
  std::string item_id;
  std::uint64_t run_seed = 0;
  std::string content_hash;
};

struct CachedResponse {
  CacheKey key;
  std::string raw_text;
  std::optional<int> parsed_rating;
  std::string timestamp;
};

// Keeps path components to a portable character set.
inline std::string safe_component(const std::string& text) {
  std::string out;
  for (unsigned char c : text) out.push_back(std::isalnum(c) || c == '-' || c == '_' || c == '.' ? c : '_');
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Writes via a uniquely named temp file and rename, so concurrent writers to
// distinct keys never see partial files and a completed store is visible to
// the next load of the same key.
inline void atomic_write(const fs::path& path, const std::string& contents) {
  static std::atomic<std::uint64_t> counter{0};
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ostringstream tmp_name;
  tmp_name << path.filename().string() << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << '.'
           << counter.fetch_add(1);
  const fs::path tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out.flush()) throw Error(ErrorCode::kIo, "short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

// One JSON record per response under cache/<variant>/<metric>/<run_seed>/<item_id>.json.
class ResponseCache {
 public:
  explicit ResponseCache(fs::path root) : root_(std::move(root)) {}

  fs::path path_for(const CacheKey& key) const {
    return root_ / safe_component(key.variant) / safe_component(key.metric) / std::to_string(key.run_seed) /
           (safe_component(key.item_id) + ".json");
  }

  // A record only counts as a hit when every key field matches.
  std::optional<CachedResponse> load(const CacheKey& key) const {
    std::ifstream in(path_for(key));
    if (!in) return std::nullopt;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;
    }
    if (!j.is_object() || !j.contains("key") || !j["key"].is_object()) return std::nullopt;
    const auto& k = j["key"];
    if (k.value("variant", "") != key.variant || k.value("metric", "") != key.metric ||
        k.value("model_name", "") != key.model_name || k.value("item_id", "") != key.item_id ||
        k.value("run_seed", std::uint64_t{0}) != key.run_seed || k.value("content_hash", "") != key.content_hash) {
      return std::nullopt;
    }
    CachedResponse r;
    r.key = key;
    r.raw_text = j.value("raw_text", "");
    if (j.contains("parsed_rating") && !j["parsed_rating"].is_null()) r.parsed_rating = j["parsed_rating"].get<int>();
    r.timestamp = j.value("timestamp", "");
    return r;
  }

  void store(const CachedResponse& response) const {
    const auto& key = response.key;
    nlohmann::json j{{"key",
                      {{"variant", key.variant},
                       {"metric", key.metric},
                       {"model_name", key.model_name},
                       {"item_id", key.item_id},
                       {"run_seed", key.run_seed},
                       {"content_hash", key.content_hash}}},
                     {"raw_text", response.raw_text},
                     {"timestamp", response.timestamp}};
    j["parsed_rating"] = response.parsed_rating ? nlohmann::json(*response.parsed_rating) : nlohmann::json(nullptr);
    atomic_write(path_for(key), j.dump(2) + "\n");
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
};

// item_id -> extracted description, persisted as `item_id,description` CSV.
class DescriptionStore {
 public:
  DescriptionStore() = default;
  explicit DescriptionStore(fs::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;
    csv::Reader reader(in);
    csv::expect_header(reader, {"item_id", "description"});
    while (auto row = reader.next()) {
      if (csv::is_blank(*row)) continue;
      if (row->fields.size() != 2) {
        throw Error(ErrorCode::kParse, path_.string() + " line " + std::to_string(row->line) + ": expected 2 columns");
      }
      entries_[row->fields[0]] = row->fields[1];
    }
  }

  std::optional<std::string> get(const std::string& item_id) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(item_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  // Records the description and rewrites the backing file, if any.
  void put(const std::string& item_id, const std::string& description) {
    std::lock_guard lock(mutex_);
    entries_[item_id] = description;
    if (!path_.empty()) {
      std::ostringstream out;
      csv::write_row(out, {"item_id", "description"});
      for (const auto& [item, text] : entries_) csv::write_row(out, {item, text});
      atomic_write(path_, out.str());
    }
  }

  std::map<std::string, std::string> snapshot() const {
    std::lock_guard lock(mutex_);
    return entries_;
  }

 private:
  fs::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, std::string> entries_;
};

}  // namespace rater_equiv::judge
