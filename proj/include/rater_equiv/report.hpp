#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "rater_equiv/agreement.hpp"
#include "rater_equiv/config.hpp"
#include "rater_equiv/csv.hpp"
#include "rater_equiv/error.hpp"
#include "rater_equiv/format.hpp"
#include "rater_equiv/gate.hpp"
#include "rater_equiv/hypothesis.hpp"
#include "rater_equiv/ratings.hpp"
#include "rater_equiv/topset.hpp"

namespace rater_equiv {

// Everything computed for one candidate/reference pair.
struct PairAnalysis {
  PairedRatings pair;
  PairStats stats;
  TestResult wilcoxon;
  JaccardCurve curve;
};

inline PairAnalysis analyze_pair(PairedRatings pair, const GateConfig& gate, std::size_t bonferroni_m,
                                 const std::vector<double>& fractions) {
  PairAnalysis out;
  out.stats.agreement = summarize_agreement(pair);
  out.stats.tost = tost_equivalence(pair, gate.tost_margin, gate.alpha);
  out.wilcoxon = wilcoxon_signed_rank(pair);
  out.stats.wilcoxon_p_corrected = bonferroni(out.wilcoxon.p_value, bonferroni_m);
  out.curve = jaccard_curve(pair, ReferenceSide::kB, fractions);
  out.stats.jaccard_auc = out.curve.auc;
  out.pair = std::move(pair);
  return out;
}

struct ComparisonRow {
  std::string expert;
  std::string candidate;
  PairAnalysis analysis;
  GateReport gate;
};

struct MetricRunReport {
  std::string metric;
  std::string run_id;
  std::uint64_t seed = 0;
  std::size_t n_items = 0;
  std::size_t bonferroni_m = 1;
  TestResult friedman;
  std::vector<std::string> friedman_raters;
  std::string baseline_label;
  PairAnalysis baseline;
  std::vector<ComparisonRow> rows;
};

struct ReportBundle {
  std::vector<MetricRunReport> tables;
  // (metric, expert, candidate) -> aggregate over runs, in run order
  std::map<std::tuple<std::string, std::string, std::string>, RunAggregate> aggregates;
  std::vector<std::string> run_ids;
};

inline std::string baseline_label(const AnalysisConfig& config) {
  return config.expert_a + " vs " + config.expert_b;
}

// One metric, one run. The baseline treats expert_a as the candidate side and
// expert_b as the reference, so a candidate equal to expert_a reproduces it.
inline MetricRunReport analyze_metric_run(const RatingMatrix& ratings, const AnalysisConfig& config,
                                          const std::string& metric, const RunPlan& run,
                                          const std::optional<DatasetSplit>& split) {
  MetricRunReport report;
  report.metric = metric;
  report.run_id = run.id;
  report.seed = run.seed;
  report.baseline_label = baseline_label(config);

  std::vector<std::string> raters{config.expert_a, config.expert_b};
  for (const auto& c : config.candidates) {
    if (std::find(raters.begin(), raters.end(), c) == raters.end()) raters.push_back(c);
  }
  auto filtered = complete_case_filter(ratings, raters, metric);
  ItemSet items = filtered.matrix.items();
  if (split) {
    ItemSet kept;
    for (const auto& item : items) {
      if (split->test_set.count(item)) kept.insert(item);
    }
    items = std::move(kept);
  }
  if (items.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "only " + std::to_string(items.size()) +
                                                  " items are rated by every rater after filtering");
  }
  report.n_items = items.size();

  std::size_t comparisons = 1;
  for (const auto& c : config.candidates) {
    for (const auto& e : {config.expert_a, config.expert_b}) comparisons += c == e ? 0 : 1;
  }
  report.bonferroni_m = config.gate.bonferroni_m ? config.gate.bonferroni_m : comparisons;

  std::vector<std::vector<int>> columns;
  for (const auto& r : raters) {
    std::vector<int> col;
    for (const auto& item : items) col.push_back(*ratings.rating(item, r, metric));
    columns.push_back(std::move(col));
  }
  report.friedman = friedman_test(columns);
  report.friedman_raters = raters;

  try {
    report.baseline = analyze_pair(paired_vector(ratings, config.expert_a, config.expert_b, metric, items),
                                   config.gate, report.bonferroni_m, config.fractions);
  } catch (const Error& e) {
    rethrow_with_context(e, "baseline " + report.baseline_label);
  }

  for (const auto& expert : {config.expert_a, config.expert_b}) {
    for (const auto& candidate : config.candidates) {
      if (candidate == expert) continue;
      const std::string context = candidate + " vs " + expert;
      try {
        ComparisonRow row{expert, candidate,
                          analyze_pair(paired_vector(ratings, candidate, expert, metric, items), config.gate,
                                       report.bonferroni_m, config.fractions),
                          {}};
        row.gate = evaluate_gate(row.analysis.stats, report.baseline.stats, config.gate);
        report.rows.push_back(std::move(row));
      } catch (const Error& e) {
        rethrow_with_context(e, context);
      }
    }
  }
  return report;
}

inline std::vector<std::string> gate_table_header() {
  return {"expert", "candidate", "kappa",    "icc",             "mae",         "bias",
          "loa",    "tost",      "spearman", "wilcoxon_p_corr", "jaccard_auc", "tests_passed"};
}

namespace detail {

inline std::string spearman_text(const std::optional<double>& rho) { return rho ? fmt::fixed(*rho) : "nan"; }

inline std::vector<std::string> stats_fields(const PairStats& s) {
  return {fmt::fixed(s.agreement.kappa),
          fmt::fixed(s.agreement.icc),
          fmt::fixed(s.agreement.mae),
          fmt::fixed(s.agreement.bland_altman.bias),
          fmt::fixed(s.sd_band()),
          s.tost.equivalent ? "True" : "False",
          spearman_text(s.agreement.spearman_rho),
          fmt::scientific(s.wilcoxon_p_corrected),
          fmt::fixed(s.jaccard_auc)};
}

inline std::string passed_text(int passed) { return std::to_string(passed) + "/9"; }

}  // namespace detail

// Machine-readable table; the baseline row has expert "baseline".
inline void write_gate_table_csv(std::ostream& out, const MetricRunReport& report) {
  csv::write_row(out, gate_table_header());
  auto base = detail::stats_fields(report.baseline.stats);
  base[5] = "--";
  std::vector<std::string> row{"baseline", report.baseline_label};
  row.insert(row.end(), base.begin(), base.end());
  row.push_back("--");
  csv::write_row(out, row);
  for (const auto& r : report.rows) {
    std::vector<std::string> fields{r.expert, r.candidate};
    auto stats = detail::stats_fields(r.analysis.stats);
    fields.insert(fields.end(), stats.begin(), stats.end());
    fields.push_back(detail::passed_text(r.gate.passed));
    csv::write_row(out, fields);
  }
}

// Human-readable table; a trailing '*' marks a cell whose criterion passed.
inline void write_gate_table_markdown(std::ostream& out, const MetricRunReport& report) {
  out << "## " << report.metric << " / " << report.run_id << " (seed " << report.seed << ")\n\n";
  out << "Items: " << report.n_items << "; Bonferroni family size: " << report.bonferroni_m
      << "; Friedman chi2 = " << fmt::fixed(report.friedman.statistic) << ", p = "
      << fmt::scientific(report.friedman.p_value) << "\n\n";
  out << "| Expert | Comparison | Kappa | ICC | MAE | Mean Diff +/- 1.96 SD | Equiv? | Spear. | Wilcoxon p-corr | AUC | "
         "Tests Passed |\n";
  out << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  const auto& b = report.baseline.stats;
  out << "| | **" << report.baseline_label << "** | " << fmt::fixed(b.agreement.kappa) << " | "
      << fmt::fixed(b.agreement.icc) << " | " << fmt::fixed(b.agreement.mae) << " | "
      << fmt::fixed(b.agreement.bland_altman.bias) << " +/- " << fmt::fixed(b.sd_band()) << " | -- | "
      << detail::spearman_text(b.agreement.spearman_rho) << " | " << fmt::scientific(b.wilcoxon_p_corrected) << " | "
      << fmt::fixed(b.jaccard_auc) << " | -- |\n";
  for (const auto& r : report.rows) {
    const auto& s = r.analysis.stats;
    auto mark = [&](Criterion c) { return r.gate.flag(c) ? "*" : ""; };
    out << "| " << r.expert << " | " << r.candidate << " | " << fmt::fixed(s.agreement.kappa) << mark(Criterion::kKappa)
        << " | " << fmt::fixed(s.agreement.icc) << mark(Criterion::kIcc) << " | " << fmt::fixed(s.agreement.mae)
        << mark(Criterion::kMae) << " | " << fmt::fixed(s.agreement.bland_altman.bias) << mark(Criterion::kBaBias)
        << " +/- " << fmt::fixed(s.sd_band()) << mark(Criterion::kBaLoa) << " | "
        << (s.tost.equivalent ? "True" : "False") << mark(Criterion::kTost) << " | "
        << detail::spearman_text(s.agreement.spearman_rho) << mark(Criterion::kSpearman) << " | "
        << fmt::scientific(s.wilcoxon_p_corrected) << mark(Criterion::kWilcoxon) << " | " << fmt::fixed(s.jaccard_auc)
        << mark(Criterion::kJaccardAuc) << " | " << detail::passed_text(r.gate.passed) << " |\n";
  }
  for (const auto& r : report.rows) {
    for (const auto& w : r.gate.warnings) out << "\nWarning (" << r.candidate << " vs " << r.expert << "): " << w;
  }
  out << "\n* criterion within the band around the expert-expert baseline\n";
}

// Output path components keep to [A-Za-z0-9._-].
inline std::string safe_path_component(const std::string& text) {
  std::string out;
  for (unsigned char c : text) out.push_back(std::isalnum(c) || c == '-' || c == '_' || c == '.' ? c : '_');
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

inline fs::path table_dir(const fs::path& root, const MetricRunReport& report) {
  return root / safe_path_component(report.metric) / safe_path_component(report.run_id);
}

inline std::string pair_file_stem(const std::string& expert, const std::string& candidate) {
  return safe_path_component(candidate) + "__vs__" + safe_path_component(expert);
}

inline void write_file(const fs::path& path, const std::string& contents) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << contents;
}

inline void write_bland_altman_points(std::ostream& out, const PairedRatings& pair) {
  csv::write_row(out, {"item_id", "mean_rating", "difference"});
  for (std::size_t i = 0; i < pair.size(); ++i) {
    csv::write_row(out, {pair.item_ids.empty() ? std::to_string(i) : pair.item_ids[i],
                         fmt::fixed(0.5 * (pair.a[i] + pair.b[i]), 1), std::to_string(pair.b[i] - pair.a[i])});
  }
}

inline void write_bland_altman_lines(std::ostream& out, const BlandAltmanResult& ba) {
  csv::write_row(out, {"line", "value"});
  csv::write_row(out, {"bias", fmt::fixed(ba.bias, 6)});
  csv::write_row(out, {"loa_low", fmt::fixed(ba.loa_low, 6)});
  csv::write_row(out, {"loa_high", fmt::fixed(ba.loa_high, 6)});
  csv::write_row(out, {"sd", fmt::fixed(ba.sd, 6)});
}

inline void write_jaccard_curve(std::ostream& out, const JaccardCurve& curve) {
  csv::write_row(out, {"nominal_fraction", "actual_fraction", "jaccard"});
  for (const auto& p : curve.points) {
    csv::write_row(out, {fmt::fixed(p.nominal_fraction, 4), fmt::fixed(p.actual_fraction, 6), fmt::fixed(p.jaccard, 6)});
  }
}

// Bland-Altman point clouds, their bias/LoA sidecars and Jaccard curves for
// every pair, under <out>/<metric>/<run>/plots/.
inline std::vector<fs::path> emit_plot_data(const ReportBundle& bundle, const fs::path& root) {
  std::vector<fs::path> written;
  for (const auto& table : bundle.tables) {
    const auto dir = table_dir(root, table) / "plots";
    auto emit = [&](const std::string& stem, const PairAnalysis& a) {
      std::ostringstream points, lines, curve;
      write_bland_altman_points(points, a.pair);
      write_bland_altman_lines(lines, a.stats.agreement.bland_altman);
      write_jaccard_curve(curve, a.curve);
      for (auto [name, text] : {std::pair{stem + "_bland_altman.csv", points.str()},
                                std::pair{stem + "_bland_altman_lines.csv", lines.str()},
                                std::pair{stem + "_jaccard.csv", curve.str()}}) {
        write_file(dir / name, text);
        written.push_back(dir / name);
      }
    };
    emit("baseline", table.baseline);
    for (const auto& r : table.rows) emit(pair_file_stem(r.expert, r.candidate), r.analysis);
  }
  return written;
}

inline void write_summary(std::ostream& csv_out, std::ostream& md_out, const ReportBundle& bundle) {
  std::vector<std::string> header{"metric", "expert", "candidate"};
  for (const auto& id : bundle.run_ids) header.push_back(id);
  header.push_back("avg");
  csv::write_row(csv_out, header);
  md_out << "# Tests passed across runs\n\n| Metric | Expert | Comparison |";
  for (const auto& id : bundle.run_ids) md_out << ' ' << id << " |";
  md_out << " Avg. |\n|---|---|---|";
  for (std::size_t i = 0; i <= bundle.run_ids.size(); ++i) md_out << "---|";
  md_out << '\n';
  for (const auto& [key, agg] : bundle.aggregates) {
    const auto& [metric, expert, candidate] = key;
    std::vector<std::string> row{metric, expert, candidate};
    md_out << "| " << metric << " | " << expert << " | " << candidate << " |";
    for (const auto& r : agg.reports) {
      row.push_back(detail::passed_text(r.passed));
      md_out << ' ' << detail::passed_text(r.passed) << " |";
    }
    row.push_back(fmt::passed_fraction(agg.mean_passed));
    md_out << ' ' << fmt::passed_fraction(agg.mean_passed) << " |\n";
    csv::write_row(csv_out, row);
  }
}

inline nlohmann::json table_metadata(const MetricRunReport& t) {
  return {{"metric", t.metric},
          {"run_id", t.run_id},
          {"seed", t.seed},
          {"n_items", t.n_items},
          {"bonferroni_m", t.bonferroni_m},
          {"friedman",
           {{"raters", t.friedman_raters},
            {"statistic", t.friedman.statistic},
            {"p_value", t.friedman.p_value},
            {"method", t.friedman.method}}}};
}

inline ReportBundle cmd_analyze(const AnalysisConfig& config, bool write_outputs = true) {
  config.validate();
  std::optional<DatasetSplit> split;
  if (config.split_manifest) {
    std::ifstream in(*config.split_manifest);
    if (!in) throw Error(ErrorCode::kIo, "cannot open split manifest '" + config.split_manifest->string() + "'");
    split = read_split_manifest(in);
  }
  ReportBundle bundle;
  for (const auto& run : config.runs) bundle.run_ids.push_back(run.id);
  for (const auto& metric : config.metrics) {
    for (const auto& run : config.runs) {
      auto files = config.ratings;
      files.insert(files.end(), run.ratings.begin(), run.ratings.end());
      try {
        RatingMatrix ratings = load_rating_files(files, config.scale);
        ratings.set_role(config.expert_a, RaterRole::kExpert);
        ratings.set_role(config.expert_b, RaterRole::kExpert);
        bundle.tables.push_back(analyze_metric_run(ratings, config, metric, run, split));
      } catch (const Error& e) {
        rethrow_with_context(e, "metric '" + metric + "', run '" + run.id + "'");
      }
    }
  }

  std::map<std::tuple<std::string, std::string, std::string>, std::vector<GateReport>> per_pair;
  for (const auto& t : bundle.tables) {
    for (const auto& r : t.rows) per_pair[{t.metric, r.expert, r.candidate}].push_back(r.gate);
  }
  for (auto& [key, reports] : per_pair) bundle.aggregates.emplace(key, aggregate_runs(std::move(reports)));

  if (write_outputs) {
    for (const auto& t : bundle.tables) {
      const auto dir = table_dir(config.output_dir, t);
      std::ostringstream csv_text, md_text;
      write_gate_table_csv(csv_text, t);
      write_gate_table_markdown(md_text, t);
      write_file(dir / "gate_table.csv", csv_text.str());
      write_file(dir / "gate_table.md", md_text.str());
      write_file(dir / "analysis.json", table_metadata(t).dump(2) + "\n");
    }
    emit_plot_data(bundle, config.output_dir);
    std::ostringstream summary_csv, summary_md;
    write_summary(summary_csv, summary_md, bundle);
    write_file(config.output_dir / "summary.csv", summary_csv.str());
    write_file(config.output_dir / "summary.md", summary_md.str());
  }
  return bundle;
}

struct ReplayRow {
  std::string expert;
  std::string candidate;
  PairStats stats;
  GateReport gate;
  std::optional<int> published_passed;
};

struct ReplayResult {
  std::string baseline_label;
  PairStats baseline;
  std::vector<ReplayRow> rows;

  std::size_t mismatches() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.published_passed && *r.published_passed != r.gate.passed;
    return n;
  }
};

namespace detail {

inline double parse_real(const std::string& text, std::size_t line, const char* column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": column '" + column + "' value '" + text +
                                       "' is not a number");
  }
}

inline std::optional<int> parse_passed(const std::string& text, std::size_t line) {
  if (text.empty() || text == "--") return std::nullopt;
  const auto slash = text.find('/');
  return static_cast<int>(parse_real(slash == std::string::npos ? text : text.substr(0, slash), line, "tests_passed"));
}

inline bool parse_bool(std::string text, std::size_t line) {
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no" || text == "--" || text.empty()) return false;
  throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": tost value '" + text + "' is not a boolean");
}

}  // namespace detail

// Reads a table in the gate-table CSV schema (one row with expert "baseline")
// and re-derives every row's flags from its printed statistics.
inline ReplayResult cmd_gate_replay(std::istream& in, const GateConfig& config) {
  csv::Reader reader(in);
  csv::expect_header(reader, gate_table_header());
  std::optional<std::pair<std::string, PairStats>> baseline;
  std::vector<std::tuple<std::string, std::string, PairStats, std::optional<int>>> pending;
  while (auto row = reader.next()) {
    if (csv::is_blank(*row)) continue;
    const auto& f = row->fields;
    if (f.size() != gate_table_header().size()) {
      throw Error(ErrorCode::kSchema, "line " + std::to_string(row->line) + ": expected 12 columns");
    }
    const auto line = row->line;
    PairStats s;
    s.agreement.kappa = detail::parse_real(f[2], line, "kappa");
    s.agreement.icc = detail::parse_real(f[3], line, "icc");
    s.agreement.mae = detail::parse_real(f[4], line, "mae");
    s.agreement.bland_altman.bias = detail::parse_real(f[5], line, "bias");
    s.agreement.bland_altman.sd = detail::parse_real(f[6], line, "loa") / kLoaZ;
    s.agreement.bland_altman.loa_low = s.agreement.bland_altman.bias - detail::parse_real(f[6], line, "loa");
    s.agreement.bland_altman.loa_high = s.agreement.bland_altman.bias + detail::parse_real(f[6], line, "loa");
    s.tost.equivalent = detail::parse_bool(f[7], line);
    if (f[8] != "nan" && !f[8].empty()) s.agreement.spearman_rho = detail::parse_real(f[8], line, "spearman");
    s.wilcoxon_p_corrected = detail::parse_real(f[9], line, "wilcoxon_p_corr");
    s.jaccard_auc = detail::parse_real(f[10], line, "jaccard_auc");
    if (f[0] == "baseline") {
      if (baseline) throw Error(ErrorCode::kSchema, "line " + std::to_string(line) + ": second baseline row");
      baseline.emplace(f[1], s);
    } else {
      pending.emplace_back(f[0], f[1], s, detail::parse_passed(f[11], line));
    }
  }
  if (!baseline) throw Error(ErrorCode::kSchema, "gate replay input has no baseline row");
  ReplayResult result;
  result.baseline_label = baseline->first;
  result.baseline = baseline->second;
  for (auto& [expert, candidate, stats, published] : pending) {
    auto gate = evaluate_gate(stats, result.baseline, config);
    result.rows.push_back({expert, candidate, stats, std::move(gate), published});
  }
  return result;
}

inline void write_replay_csv(std::ostream& out, const ReplayResult& result) {
  csv::write_row(out, gate_table_header());
  auto base = detail::stats_fields(result.baseline);
  base[5] = "--";
  std::vector<std::string> head{"baseline", result.baseline_label};
  head.insert(head.end(), base.begin(), base.end());
  head.push_back("--");
  csv::write_row(out, head);
  for (const auto& r : result.rows) {
    std::vector<std::string> fields{r.expert, r.candidate};
    auto stats = detail::stats_fields(r.stats);
    fields.insert(fields.end(), stats.begin(), stats.end());
    fields.push_back(detail::passed_text(r.gate.passed));
    csv::write_row(out, fields);
  }
}

}  // namespace rater_equiv
