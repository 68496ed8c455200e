#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rater_equiv/error.hpp"
#include "rater_equiv/gate.hpp"
#include "rater_equiv/ratings.hpp"
#include "rater_equiv/topset.hpp"

namespace rater_equiv {

namespace fs = std::filesystem;

struct RunPlan {
  std::string id;
  std::uint64_t seed = 1;
  std::vector<fs::path> ratings;  // extra files (e.g. judge output) for this run only
};

struct JudgeSettings {
  std::string variant = "text_image";
  std::string model;  // empty: variant default
  std::string rater_id;  // empty: ai_<variant>
  std::string base_url = "https://api.openai.com/v1";
  std::string description_model = "gpt-4o-2024-08-06";
  fs::path images_dir = "images";
  std::string image_extension = "png";
  fs::path descriptions = "descriptions.csv";
  fs::path cache_dir = "cache";
  fs::path templates;  // optional JSON overriding prompt templates
  std::size_t demo_count = 9;
  int retries = 2;
  int transport_attempts = 4;
  std::size_t parallelism = 4;
  int max_image_edge = 1024;
};

struct AnalysisConfig {
  RatingScale scale;
  std::vector<fs::path> ratings;
  std::vector<std::string> metrics;
  std::string expert_a = "expert_1";
  std::string expert_b = "expert_2";
  std::vector<std::string> candidates;
  std::vector<RunPlan> runs;
  std::optional<fs::path> split_manifest;
  std::size_t pool_size = 50;
  GateConfig gate;
  std::vector<double> fractions = default_fraction_grid();
  fs::path output_dir = "out";
  JudgeSettings judge;

  void validate() const {
    scale.validate();
    gate.validate();
    if (runs.empty()) throw Error(ErrorCode::kParameter, "config needs at least one run");
    if (metrics.empty()) throw Error(ErrorCode::kParameter, "config needs at least one metric");
    if (expert_a == expert_b) throw Error(ErrorCode::kParameter, "the two experts must differ");
    if (ratings.empty()) throw Error(ErrorCode::kParameter, "config needs at least one ratings file");
    for (double f : fractions) {
      if (!(f > 0.0 && f <= 1.0)) throw Error(ErrorCode::kParameter, "fraction grid values must lie in (0,1]");
    }
  }
};

namespace detail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace detail

// Relative paths are resolved against `base_dir` (normally the config file's directory).
inline AnalysisConfig parse_config(const nlohmann::json& j, const fs::path& base_dir = ".") {
  AnalysisConfig c;
  try {
    if (j.contains("scale")) {
      c.scale.min = j["scale"].value("min", 1);
      c.scale.max = j["scale"].value("max", 6);
    }
    for (const auto& p : j.value("ratings", std::vector<std::string>{})) c.ratings.push_back(detail::resolve(base_dir, p));
    c.metrics = j.value("metrics", std::vector<std::string>{});
    if (j.contains("experts")) {
      auto experts = j["experts"].get<std::vector<std::string>>();
      if (experts.size() != 2) throw Error(ErrorCode::kParameter, "'experts' must list exactly two rater ids");
      c.expert_a = experts[0];
      c.expert_b = experts[1];
    }
    c.candidates = j.value("candidates", std::vector<std::string>{});
    if (j.contains("runs")) {
      for (const auto& r : j["runs"]) {
        RunPlan run;
        run.seed = r.value("seed", std::uint64_t{1});
        run.id = r.value("id", "run" + std::to_string(run.seed));
        for (const auto& p : r.value("ratings", std::vector<std::string>{})) {
          run.ratings.push_back(detail::resolve(base_dir, p));
        }
        c.runs.push_back(std::move(run));
      }
    } else {
      for (std::uint64_t s : {1, 2, 3}) c.runs.push_back({"run" + std::to_string(s), s, {}});
    }
    if (j.contains("split_manifest")) c.split_manifest = detail::resolve(base_dir, j["split_manifest"].get<std::string>());
    c.pool_size = j.value("pool_size", c.pool_size);
    if (j.contains("gate")) {
      const auto& g = j["gate"];
      c.gate.tolerance = g.value("tolerance", c.gate.tolerance);
      c.gate.tost_margin = g.value("tost_margin", c.gate.tost_margin);
      c.gate.alpha = g.value("alpha", c.gate.alpha);
      c.gate.bonferroni_m = g.value("bonferroni_m", c.gate.bonferroni_m);
    }
    if (j.contains("fractions")) c.fractions = j["fractions"].get<std::vector<double>>();
    if (j.contains("output_dir")) c.output_dir = detail::resolve(base_dir, j["output_dir"].get<std::string>());
    if (j.contains("judge")) {
      const auto& s = j["judge"];
      auto& js = c.judge;
      js.variant = s.value("variant", js.variant);
      js.model = s.value("model", js.model);
      js.rater_id = s.value("rater_id", js.rater_id);
      js.base_url = s.value("base_url", js.base_url);
      js.description_model = s.value("description_model", js.description_model);
      if (s.contains("images_dir")) js.images_dir = detail::resolve(base_dir, s["images_dir"].get<std::string>());
      js.image_extension = s.value("image_extension", js.image_extension);
      if (s.contains("descriptions")) js.descriptions = detail::resolve(base_dir, s["descriptions"].get<std::string>());
      if (s.contains("cache_dir")) js.cache_dir = detail::resolve(base_dir, s["cache_dir"].get<std::string>());
      if (s.contains("templates")) js.templates = detail::resolve(base_dir, s["templates"].get<std::string>());
      js.demo_count = s.value("demo_count", js.demo_count);
      js.retries = s.value("retries", js.retries);
      js.transport_attempts = s.value("transport_attempts", js.transport_attempts);
      js.parallelism = s.value("parallelism", js.parallelism);
      js.max_image_edge = s.value("max_image_edge", js.max_image_edge);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline AnalysisConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

inline RatingMatrix load_rating_files(const std::vector<fs::path>& paths, const RatingScale& scale) {
  RatingMatrix matrix(scale);
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorCode::kIo, "cannot open ratings file '" + p.string() + "'");
    try {
      load_ratings_into(in, matrix);
    } catch (const Error& e) {
      rethrow_with_context(e, p.string());
    }
  }
  return matrix;
}

}  // namespace rater_equiv
