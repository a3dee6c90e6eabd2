#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plansmith/env.hpp"
#include "plansmith/refine.hpp"

namespace plansmith::eval {

/// 100 * numerator / denominator, rounded half-up to 2 decimals, using
/// integer arithmetic. Throws Error(evaluation) when denominator is 0.
double percent(long long numerator, long long denominator);

/// Half-up rounding of a non-negative value to 2 decimals.
double round2(double value);

double success_rate(std::span<const int> rewards);
double success_rate(std::span<const refine::EpisodeResult> episodes);
double average_reward(std::span<const double> scores);
double average_reward(std::span<const refine::EpisodeResult> episodes);

/// Per-stratum success rate keyed "Easy"/"Medium"/"Hard"; empty strata omitted.
std::map<std::string, double> by_difficulty(std::span<const refine::EpisodeResult> episodes,
                                            const env::StratumThresholds& thresholds = {});

struct BucketCount {
  int successes = 0;
  int episodes = 0;
};
std::map<std::string, BucketCount> bucket_counts(std::span<const refine::EpisodeResult> episodes,
                                                 const env::StratumThresholds& thresholds = {});

struct TableRow {
  std::string model;
  std::string size;
  long long tokens = 0;
  long long successes = 0;
  long long episodes = 0;

  double sr() const { return percent(successes, episodes); }
};

/// Baseline rows stored as counts: {"rows":[{"model","size","tokens","successes","episodes"}]}.
std::vector<TableRow> load_baselines(const std::filesystem::path& path);

struct TokenReport {
  /// Mean long-thought tokens per step.
  double mean_reasoning_tokens = 0.0;
  /// Mean long + short tokens per step.
  double mean_thought_tokens = 0.0;
  long long reasoning_tokens_total = 0;
  long long thought_tokens_total = 0;
  long long steps = 0;
};

TokenReport token_report(std::span<const refine::EpisodeResult> episodes);

struct EvalReport {
  double success_rate = 0.0;
  double average_reward = 0.0;
  double mean_reasoning_tokens = 0.0;
  double mean_thought_tokens = 0.0;
  double tokens_total = 0.0;
  std::map<std::string, double> by_difficulty;
  std::map<std::string, BucketCount> bucket_counts;
  int n_episodes = 0;
  int successes = 0;
};

EvalReport evaluate(std::span<const refine::EpisodeResult> episodes, const env::StratumThresholds& thresholds = {});

enum class Format { json, text, csv };
Format parse_format(std::string_view s);

/// "a | b | c | d" rows under a header line; no padding.
std::string render_table(const std::vector<TableRow>& rows, Format format);
std::string render_row(const TableRow& row);
std::string render_report(const EvalReport& report, Format format);

nlohmann::json to_json(const EvalReport& r);

}  // namespace plansmith::eval
