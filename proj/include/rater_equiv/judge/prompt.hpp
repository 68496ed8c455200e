#pragma once

#include <openssl/evp.h>

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "rater_equiv/error.hpp"
#include "rater_equiv/random.hpp"
#include "rater_equiv/ratings.hpp"

namespace rater_equiv::judge {

enum class VariantKind { kNoContext, kText, kTextImage, kTextImageReasoning };

struct JudgeVariant {
  VariantKind kind = VariantKind::kTextImage;
  std::string model_name = "gpt-4o-2024-08-06";
  bool uses_reasoning = false;

  bool needs_demonstrations() const { return kind != VariantKind::kNoContext; }
  bool needs_description() const { return kind != VariantKind::kNoContext; }
  bool needs_image() const { return kind != VariantKind::kText; }
};

constexpr std::string_view variant_name(VariantKind kind) {
  switch (kind) {
    case VariantKind::kNoContext: return "no_context";
    case VariantKind::kText: return "text";
    case VariantKind::kTextImage: return "text_image";
    case VariantKind::kTextImageReasoning: return "text_image_reasoning";
  }
  return "?";
}

inline VariantKind parse_variant(std::string_view name) {
  for (auto kind : {VariantKind::kNoContext, VariantKind::kText, VariantKind::kTextImage,
                    VariantKind::kTextImageReasoning}) {
    if (variant_name(kind) == name) return kind;
  }
  throw Error(ErrorCode::kParameter, "unknown judge variant '" + std::string(name) + "'");
}

// Default rater id under which a variant's ratings are stored.
inline std::string variant_rater_id(VariantKind kind) { return "ai_" + std::string(variant_name(kind)); }

inline JudgeVariant make_variant(VariantKind kind) {
  JudgeVariant v;
  v.kind = kind;
  if (kind == VariantKind::kTextImageReasoning) {
    v.model_name = "o1";
    v.uses_reasoning = true;
  }
  return v;
}

struct Demonstration {
  std::string item_id;
  std::string description;
  int rating = 0;

  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

// Prompt text pieces. Placeholders: {min}, {max}, {metric}, {description}, {rating}.
struct PromptTemplates {
  std::string task_framing =
      "You are an experienced engineering design evaluator. Designers were asked to sketch concepts for a "
      "new milk frother. Each concept is a hand-drawn sketch with a short handwritten description.";
  std::map<std::string, std::string> metric_definitions{
      {"uniqueness", "Uniqueness: how different the concept is from the other concepts generated for the same task."},
      {"creativity", "Creativity: how novel and original the concept is overall, as judged by a design expert."},
      {"usefulness", "Usefulness: how well the concept would work and satisfy the needs of the task if built."},
      {"drawing_quality", "Drawing quality: how clearly and skilfully the sketch communicates the concept."},
  };
  std::string scale_instruction =
      "Rate the {metric} of the design on an integer scale from {min} (lowest) to {max} (highest). "
      "Answer with the rating only.";
  std::string demonstrations_intro = "Here are example designs with ratings given by expert raters:";
  std::string demonstration = "Design description: {description}\nExpert {metric} rating: {rating}";
  std::string query_with_description = "Now rate this design.\nDesign description: {description}";
  std::string query_image_only = "Now rate the design shown in the attached sketch.";
  std::string transcription =
      "Transcribe the handwritten text description written on this design sketch. Reply with the text only.";

  static PromptTemplates from_json(const nlohmann::json& j) {
    PromptTemplates t;
    auto take = [&](const char* key, std::string& field) {
      if (j.contains(key)) field = j.at(key).get<std::string>();
    };
    take("task_framing", t.task_framing);
    take("scale_instruction", t.scale_instruction);
    take("demonstrations_intro", t.demonstrations_intro);
    take("demonstration", t.demonstration);
    take("query_with_description", t.query_with_description);
    take("query_image_only", t.query_image_only);
    take("transcription", t.transcription);
    if (j.contains("metric_definitions")) {
      for (const auto& [metric, text] : j.at("metric_definitions").items()) {
        t.metric_definitions[metric] = text.get<std::string>();
      }
    }
    return t;
  }

  std::string metric_definition(const std::string& metric) const {
    auto it = metric_definitions.find(metric);
    if (it == metric_definitions.end()) {
      throw Error(ErrorCode::kParameter, "no metric definition for '" + metric + "'");
    }
    return it->second;
  }
};

inline std::string substitute(std::string text, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string token = "{" + key + "}";
    for (std::size_t pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size())) {
      text.replace(pos, token.size(), value);
    }
  }
  return text;
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

struct PromptBundle {
  std::string task_framing;
  std::string metric_definition;
  std::string scale_instruction;
  std::string demonstrations_intro;
  std::vector<std::string> demonstrations;  // rendered, in list order
  std::vector<Demonstration> demonstration_items;
  std::optional<std::string> query_description;
  std::optional<std::string> query_image;  // path of the target sketch
  std::string query_text;
  std::string content_hash;

  std::string system_text() const { return task_framing + "\n\n" + metric_definition + "\n\n" + scale_instruction; }

  nlohmann::json to_json() const {
    nlohmann::json demos = nlohmann::json::array();
    for (const auto& d : demonstration_items) {
      demos.push_back({{"item_id", d.item_id}, {"description", d.description}, {"rating", d.rating}});
    }
    nlohmann::json j{{"task_framing", task_framing},
                     {"metric_definition", metric_definition},
                     {"scale_instruction", scale_instruction},
                     {"demonstrations_intro", demonstrations_intro},
                     {"demonstrations", demonstrations},
                     {"demonstration_items", demos},
                     {"query_text", query_text}};
    j["query_description"] = query_description ? nlohmann::json(*query_description) : nlohmann::json(nullptr);
    j["query_image"] = query_image ? nlohmann::json(*query_image) : nlohmann::json(nullptr);
    return j;
  }
};

struct TargetItem {
  std::string item_id;
  std::optional<std::string> description;
  std::optional<std::string> image;
};

inline PromptBundle build_prompt(const JudgeVariant& variant, const std::vector<Demonstration>& demos,
                                 const TargetItem& target, const std::string& metric,
                                 const PromptTemplates& templates, const RatingScale& scale) {
  const bool has_description = target.description && !target.description->empty();
  if (variant.needs_image() && !target.image) {
    throw Error(ErrorCode::kModality, std::string(variant_name(variant.kind)) + " judge needs an image for item '" +
                                          target.item_id + "'");
  }
  if (variant.needs_description() && !has_description) {
    throw Error(ErrorCode::kModality, std::string(variant_name(variant.kind)) +
                                          " judge needs a description for item '" + target.item_id + "'");
  }
  if (variant.needs_demonstrations() == demos.empty()) {
    throw Error(ErrorCode::kModality, std::string(variant_name(variant.kind)) +
                                          (demos.empty() ? " judge needs demonstrations" : " judge takes no demonstrations"));
  }

  const std::map<std::string, std::string> common{
      {"min", std::to_string(scale.min)}, {"max", std::to_string(scale.max)}, {"metric", metric}};
  PromptBundle b;
  b.task_framing = templates.task_framing;
  b.metric_definition = templates.metric_definition(metric);
  b.scale_instruction = substitute(templates.scale_instruction, common);
  for (const auto& d : demos) {
    if (!scale.contains(d.rating)) throw Error(ErrorCode::kRange, "demonstration rating outside scale");
    if (d.description.empty()) throw Error(ErrorCode::kParameter, "demonstration '" + d.item_id + "' has no description");
    auto values = common;
    values["description"] = d.description;
    values["rating"] = std::to_string(d.rating);
    b.demonstrations.push_back(substitute(templates.demonstration, values));
  }
  b.demonstration_items = demos;
  if (!demos.empty()) b.demonstrations_intro = templates.demonstrations_intro;
  if (variant.needs_description()) {
    b.query_description = *target.description;
    auto values = common;
    values["description"] = *target.description;
    b.query_text = substitute(templates.query_with_description, values);
  } else {
    b.query_text = substitute(templates.query_image_only, common);
  }
  if (variant.needs_image()) b.query_image = target.image;
  b.content_hash = sha256_hex(b.to_json().dump());
  return b;
}

// Parses a model reply into a rating. Strict mode accepts only a bare integer;
// lenient mode takes the last standalone in-scale integer.
inline int parse_rating(std::string_view raw, const RatingScale& scale, bool strict = false) {
  auto fail = [&]() -> int {
    throw Error(ErrorCode::kParse, "no rating in " + std::to_string(scale.min) + ".." + std::to_string(scale.max) +
                                       " found in response '" + std::string(raw) + "'");
  };
  if (strict) {
    std::size_t b = 0, e = raw.size();
    while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
    const std::string trimmed(raw.substr(b, e - b));
    if (trimmed.empty() || trimmed.size() > 9 ||
        !std::all_of(trimmed.begin(), trimmed.end(), [](unsigned char c) { return std::isdigit(c); })) {
      return fail();
    }
    const int value = std::stoi(trimmed);
    return scale.contains(value) ? value : fail();
  }
  static const std::regex token(R"((^|[^0-9./\-])(\d+)(?![0-9]|\.\d|-\d))");
  std::optional<int> found;
  const std::string text(raw);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), token); it != std::sregex_iterator(); ++it) {
    const std::string digits = (*it)[2].str();
    if (digits.size() > 9) continue;
    const int value = std::stoi(digits);
    if (scale.contains(value)) found = value;
  }
  return found ? *found : fail();
}

// Picks demo_count demonstrations from agreed context items: one per rating
// value, the rest spread round-robin over a seeded order of rating values,
// then shuffled. Items without a description are not eligible.
inline std::vector<Demonstration> select_context(const std::map<std::string, int>& agreed_pool,
                                                 const std::map<std::string, std::string>& descriptions,
                                                 const RatingScale& scale, std::size_t demo_count,
                                                 std::uint64_t seed) {
  if (demo_count < static_cast<std::size_t>(scale.size())) {
    throw Error(ErrorCode::kParameter, "demo_count " + std::to_string(demo_count) + " is smaller than the scale size");
  }
  std::map<int, std::vector<std::string>> by_rating;
  for (const auto& [item, rating] : agreed_pool) {
    auto d = descriptions.find(item);
    if (d != descriptions.end() && !d->second.empty() && scale.contains(rating)) by_rating[rating].push_back(item);
  }
  for (int r = scale.min; r <= scale.max; ++r) {
    if (by_rating[r].empty()) {
      throw Error(ErrorCode::kCoverage, "context pool has no described, expert-agreed item rated " + std::to_string(r));
    }
  }

  SeededRng rng(seed);
  for (auto& [rating, items] : by_rating) rng.shuffle(items);
  std::map<int, std::size_t> taken;
  std::vector<Demonstration> demos;
  auto take = [&](int rating) {
    const auto& item = by_rating[rating][taken[rating]++];
    demos.push_back({item, descriptions.at(item), rating});
  };
  for (int r = scale.min; r <= scale.max; ++r) take(r);

  std::vector<int> order;
  for (int r = scale.min; r <= scale.max; ++r) order.push_back(r);
  rng.shuffle(order);
  while (demos.size() < demo_count) {
    bool progressed = false;
    for (int r : order) {
      if (demos.size() == demo_count) break;
      if (taken[r] < by_rating[r].size()) {
        take(r);
        progressed = true;
      }
    }
    if (!progressed) {
      throw Error(ErrorCode::kCoverage, "context pool holds only " + std::to_string(demos.size()) +
                                            " eligible items, need " + std::to_string(demo_count));
    }
  }
  rng.shuffle(demos);
  return demos;
}

}  // namespace rater_equiv::judge
