#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rater_equiv/judge/http_client.hpp"
#include "rater_equiv/rater_equiv.hpp"

#ifdef RATER_EQUIV_WITH_OPENCV
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#endif

namespace re = rater_equiv;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> metrics;
};

re::AnalysisConfig load(const Globals& g) {
  if (g.config_path.empty()) throw re::Error(re::ErrorCode::kParameter, "--config is required for this command");
  auto config = re::load_config(g.config_path);
  if (!g.out.empty()) config.output_dir = g.out;
  if (!g.metrics.empty()) config.metrics = g.metrics;
  if (g.seed) {
    config.runs = {{"run" + std::to_string(*g.seed), *g.seed, {}}};
  }
  return config;
}

re::judge::ImageLoader image_loader(int max_edge) {
#ifdef RATER_EQUIV_WITH_OPENCV
  return [max_edge](const std::string& path) {
    cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
    if (img.empty()) return re::judge::load_image_raw(path);
    const int edge = std::max(img.cols, img.rows);
    if (max_edge <= 0 || edge <= max_edge) return re::judge::load_image_raw(path);
    const double s = static_cast<double>(max_edge) / edge;
    cv::Mat small;
    cv::resize(img, small, cv::Size(), s, s, cv::INTER_AREA);
    std::vector<unsigned char> png;
    cv::imencode(".png", small, png);
    return re::judge::ContentPart{re::judge::ContentPart::Kind::kImage, {}, "image/png",
                                  re::judge::base64_encode(std::string_view(reinterpret_cast<const char*>(png.data()),
                                                                            png.size()))};
  };
#else
  (void)max_edge;
  return re::judge::load_image_raw;
#endif
}

int run_ingest(const std::vector<std::string>& inputs, const std::string& output, int scale_min, int scale_max) {
  re::RatingScale scale{scale_min, scale_max};
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  const auto matrix = re::load_rating_files(paths, scale);
  std::cerr << matrix.size() << " records, " << matrix.items().size() << " items, " << matrix.roster().size()
            << " raters, " << matrix.metrics().size() << " metrics\n";
  if (output.empty() || output == "-") {
    re::write_ratings(std::cout, matrix);
  } else {
    std::ostringstream text;
    re::write_ratings(text, matrix);
    re::write_file(output, text.str());
  }
  return 0;
}

int run_split(const Globals& g) {
  auto config = load(g);
  if (config.metrics.size() != 1) {
    throw re::Error(re::ErrorCode::kParameter, "split needs exactly one metric (use --metric)");
  }
  const std::uint64_t seed = g.seed.value_or(config.runs.front().seed);
  const auto matrix = re::load_rating_files(config.ratings, config.scale);
  const auto split =
      re::split_context_pool(matrix, config.expert_a, config.expert_b, config.metrics.front(), config.pool_size, seed);
  fs::path target = config.split_manifest.value_or(config.output_dir / "split.csv");
  if (!g.out.empty()) target = fs::path(g.out) / "split.csv";
  std::ostringstream text;
  re::write_split_manifest(text, split);
  re::write_file(target, text.str());
  std::cerr << "context pool " << split.context_pool.size() << ", test set " << split.test_set.size() << " -> "
            << target.string() << '\n';
  return 0;
}

int run_judge(const Globals& g, const std::string& variant) {
  auto config = load(g);
  if (!variant.empty()) config.judge.variant = variant;
  re::judge::HttpChatClient client({config.judge.base_url, {}, std::chrono::seconds(120)});
  const auto loader = image_loader(config.judge.max_image_edge);
  int status = 0;
  for (const auto& metric : config.metrics) {
    for (const auto& run : config.runs) {
      const auto out = re::cmd_judge(config, metric, run.seed, client, loader);
      std::cerr << metric << " seed " << run.seed << ": " << out.result.ratings.size() << " rated, "
                << out.result.failures.size() << " failed, " << out.result.cache_hits << " cache hits -> "
                << out.ratings_csv.string() << '\n';
      status = std::max(status, out.exit_status());
    }
  }
  return status;
}

int run_analyze(const Globals& g) {
  const auto bundle = re::cmd_analyze(load(g));
  for (const auto& t : bundle.tables) {
    std::cout << t.metric << '/' << t.run_id << ": " << t.n_items << " items, " << t.rows.size() << " comparisons\n";
  }
  return 0;
}

int run_plot_data(const Globals& g) {
  const auto config = load(g);
  const auto bundle = re::cmd_analyze(config, false);
  const auto files = re::emit_plot_data(bundle, config.output_dir);
  std::cerr << files.size() << " plot files under " << config.output_dir.string() << '\n';
  return 0;
}

int run_gate_replay(const std::string& input, const std::string& output, re::GateConfig gate, bool check) {
  std::ifstream in(input);
  if (!in) throw re::Error(re::ErrorCode::kIo, "cannot open '" + input + "'");
  const auto result = re::cmd_gate_replay(in, gate);
  std::ostringstream text;
  re::write_replay_csv(text, result);
  if (output.empty() || output == "-") {
    std::cout << text.str();
  } else {
    re::write_file(output, text.str());
  }
  for (const auto& r : result.rows) {
    if (r.published_passed && *r.published_passed != r.gate.passed) {
      std::cerr << "mismatch: " << r.candidate << " vs " << r.expert << ": computed " << r.gate.passed
                << "/9, input says " << *r.published_passed << "/9\n";
    }
  }
  return check && result.mismatches() > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rater equivalence toolkit: agreement battery, expert-equivalence gate and VLM judge harness"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON configuration file");
  app.add_option("--out", g.out, "Output directory (overrides config)");
  app.add_option("--seed", g.seed, "Run seed (replaces the config's run plan with this single run)");
  app.add_option("--metric", g.metrics, "Metric name (repeatable; overrides config)");

  auto* ingest = app.add_subcommand("ingest", "Validate ratings CSVs and write them merged in canonical order");
  std::vector<std::string> ingest_inputs;
  std::string ingest_output;
  int scale_min = 1, scale_max = 6;
  ingest->add_option("inputs", ingest_inputs, "Ratings CSV files")->required();
  ingest->add_option("-o,--output", ingest_output, "Merged output file (default stdout)");
  ingest->add_option("--scale-min", scale_min, "Lowest rating");
  ingest->add_option("--scale-max", scale_max, "Highest rating");

  auto* split = app.add_subcommand("split", "Reserve expert-agreed items as the context pool");
  auto* judge = app.add_subcommand("judge", "Rate the test set with an AI judge variant");
  std::string variant;
  judge->add_option("--variant", variant, "no_context | text | text_image | text_image_reasoning");
  auto* analyze = app.add_subcommand("analyze", "Compute gate tables, summaries and plot data");
  auto* plot = app.add_subcommand("plot-data", "Write Bland-Altman and Jaccard curve data only");

  auto* replay = app.add_subcommand("gate-replay", "Re-evaluate the gate on a table of printed statistics");
  std::string replay_input, replay_output;
  re::GateConfig gate;
  bool check = false;
  replay->add_option("input", replay_input, "Gate-table CSV with a baseline row")->required();
  replay->add_option("-o,--output", replay_output, "Output CSV (default stdout)");
  replay->add_option("--tolerance", gate.tolerance, "Relative tolerance band");
  replay->add_option("--alpha", gate.alpha, "Significance level for the Wilcoxon criterion");
  replay->add_flag("--check", check, "Exit 1 when a computed count differs from the input's tests_passed");

  for (auto* sub : {ingest, split, judge, analyze, plot, replay}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*ingest) return run_ingest(ingest_inputs, ingest_output, scale_min, scale_max);
    if (*split) return run_split(g);
    if (*judge) return run_judge(g, variant);
    if (*analyze) return run_analyze(g);
    if (*plot) return run_plot_data(g);
    if (*replay) return run_gate_replay(replay_input, replay_output, gate, check);
  } catch (const re::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
