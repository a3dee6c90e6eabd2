#include "plansmith/eval.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "plansmith/error.hpp"
#include "plansmith/text.hpp"

namespace plansmith::eval {

using nlohmann::json;

double percent(long long numerator, long long denominator) {
  if (denominator <= 0) throw Error(ErrorKind::evaluation, "percentage over an empty set");
  const long long hundredths = (20000 * numerator + denominator) / (2 * denominator);
  return static_cast<double>(hundredths) / 100.0;
}

double round2(double value) { return std::floor(value * 100.0 + 0.5 + 1e-9) / 100.0; }

double success_rate(std::span<const int> rewards) {
  long long wins = 0;
  for (int r : rewards) wins += r == 1 ? 1 : 0;
  return percent(wins, static_cast<long long>(rewards.size()));
}

double success_rate(std::span<const refine::EpisodeResult> episodes) {
  std::vector<int> rewards;
  rewards.reserve(episodes.size());
  for (const auto& e : episodes) rewards.push_back(e.reward);
  return success_rate(rewards);
}

double average_reward(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorKind::evaluation, "average reward over an empty set");
  bool binary = true;
  long long ones = 0;
  double sum = 0.0;
  for (double s : scores) {
    if (s < 0.0 || s > 1.0) throw Error(ErrorKind::evaluation, "score outside [0,1]");
    if (s == 1.0) ++ones;
    else if (s != 0.0) binary = false;
    sum += s;
  }
  if (binary) return percent(ones, static_cast<long long>(scores.size()));
  return round2(100.0 * sum / static_cast<double>(scores.size()));
}

double average_reward(std::span<const refine::EpisodeResult> episodes) {
  std::vector<double> scores;
  scores.reserve(episodes.size());
  for (const auto& e : episodes) scores.push_back(e.score);
  return average_reward(scores);
}

std::map<std::string, BucketCount> bucket_counts(std::span<const refine::EpisodeResult> episodes,
                                                 const env::StratumThresholds& thresholds) {
  std::map<std::string, BucketCount> out;
  for (const auto& e : episodes) {
    const auto stratum = env::stratum_for_length(e.trajectory.instruction.optimal_length, thresholds);
    auto& b = out[std::string(env::to_string(stratum))];
    ++b.episodes;
    if (e.reward == 1) ++b.successes;
  }
  return out;
}

std::map<std::string, double> by_difficulty(std::span<const refine::EpisodeResult> episodes,
                                            const env::StratumThresholds& thresholds) {
  std::map<std::string, double> out;
  for (const auto& [name, b] : bucket_counts(episodes, thresholds)) out[name] = percent(b.successes, b.episodes);
  return out;
}

std::vector<TableRow> load_baselines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open baselines fixture " + path.string());
  try {
    const json j = json::parse(in);
    std::vector<TableRow> rows;
    for (const auto& r : j.at("rows")) {
      rows.push_back({r.at("model").get<std::string>(), r.at("size").get<std::string>(), r.at("tokens").get<long long>(),
                      r.at("successes").get<long long>(), r.at("episodes").get<long long>()});
    }
    return rows;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

TokenReport token_report(std::span<const refine::EpisodeResult> episodes) {
  TokenReport r;
  for (const auto& e : episodes) {
    for (const auto& s : e.trajectory.steps) {
      r.reasoning_tokens_total += s.token_usage.long_tokens;
      r.thought_tokens_total += s.token_usage.long_tokens + s.token_usage.short_tokens;
      ++r.steps;
    }
  }
  if (r.steps > 0) {
    r.mean_reasoning_tokens = round2(static_cast<double>(r.reasoning_tokens_total) / static_cast<double>(r.steps));
    r.mean_thought_tokens = round2(static_cast<double>(r.thought_tokens_total) / static_cast<double>(r.steps));
  }
  return r;
}

EvalReport evaluate(std::span<const refine::EpisodeResult> episodes, const env::StratumThresholds& thresholds) {
  EvalReport r;
  r.success_rate = success_rate(episodes);
  r.average_reward = average_reward(episodes);
  const TokenReport tokens = token_report(episodes);
  r.mean_reasoning_tokens = tokens.mean_reasoning_tokens;
  r.mean_thought_tokens = tokens.mean_thought_tokens;
  r.tokens_total = static_cast<double>(tokens.thought_tokens_total);
  r.bucket_counts = bucket_counts(episodes, thresholds);
  r.by_difficulty = by_difficulty(episodes, thresholds);
  r.n_episodes = static_cast<int>(episodes.size());
  for (const auto& e : episodes) r.successes += e.reward == 1 ? 1 : 0;
  return r;
}

Format parse_format(std::string_view s) {
  if (s == "json") return Format::json;
  if (s == "text") return Format::text;
  if (s == "csv") return Format::csv;
  throw Error(ErrorKind::config, "format: expected json, text or csv, got '" + std::string(s) + "'");
}

std::string render_row(const TableRow& row) {
  return row.model + " | " + row.size + " | " + std::to_string(row.tokens) + " | " + text::fixed(row.sr(), 2);
}

std::string render_table(const std::vector<TableRow>& rows, Format format) {
  std::ostringstream out;
  switch (format) {
    case Format::text:
      out << "Models | Size | # Tokens | SR (%)\n";
      for (const auto& r : rows) out << render_row(r) << '\n';
      break;
    case Format::csv:
      out << "Models,Size,# Tokens,SR (%)\n";
      for (const auto& r : rows) out << r.model << ',' << r.size << ',' << r.tokens << ',' << text::fixed(r.sr(), 2) << '\n';
      break;
    case Format::json: {
      json arr = json::array();
      for (const auto& r : rows) {
        arr.push_back({{"model", r.model}, {"size", r.size}, {"tokens", r.tokens}, {"sr", text::fixed(r.sr(), 2)}});
      }
      out << arr.dump(2) << '\n';
      break;
    }
  }
  return out.str();
}

json to_json(const EvalReport& r) {
  json buckets = json::object();
  for (const auto& [name, b] : r.bucket_counts) buckets[name] = {{"successes", b.successes}, {"episodes", b.episodes}};
  json by = json::object();
  for (const auto& [name, sr] : r.by_difficulty) by[name] = text::fixed(sr, 2);
  return {{"success_rate", text::fixed(r.success_rate, 2)},
          {"average_reward", text::fixed(r.average_reward, 2)},
          {"mean_reasoning_tokens", text::fixed(r.mean_reasoning_tokens, 2)},
          {"mean_thought_tokens", text::fixed(r.mean_thought_tokens, 2)},
          {"tokens_total", r.tokens_total},
          {"by_difficulty", by},
          {"bucket_counts", buckets},
          {"n_episodes", r.n_episodes},
          {"successes", r.successes}};
}

std::string render_report(const EvalReport& r, Format format) {
  std::ostringstream out;
  switch (format) {
    case Format::json:
      out << to_json(r).dump(2) << '\n';
      break;
    case Format::text:
      out << "success_rate: " << text::fixed(r.success_rate, 2) << '\n'
          << "average_reward: " << text::fixed(r.average_reward, 2) << '\n'
          << "mean_reasoning_tokens: " << text::fixed(r.mean_reasoning_tokens, 2) << '\n'
          << "mean_thought_tokens: " << text::fixed(r.mean_thought_tokens, 2) << '\n'
          << "n_episodes: " << r.n_episodes << '\n';
      for (const auto& [name, sr] : r.by_difficulty) {
        const auto& b = r.bucket_counts.at(name);
        out << name << ": " << text::fixed(sr, 2) << " (" << b.successes << '/' << b.episodes << ")\n";
      }
      break;
    case Format::csv:
      out << "metric,value\n"
          << "success_rate," << text::fixed(r.success_rate, 2) << '\n'
          << "average_reward," << text::fixed(r.average_reward, 2) << '\n'
          << "mean_reasoning_tokens," << text::fixed(r.mean_reasoning_tokens, 2) << '\n'
          << "mean_thought_tokens," << text::fixed(r.mean_thought_tokens, 2) << '\n'
          << "n_episodes," << r.n_episodes << '\n';
      for (const auto& [name, sr] : r.by_difficulty) out << "sr_" << text::to_lower(name) << ',' << text::fixed(sr, 2) << '\n';
      break;
  }
  return out.str();
}

}  // namespace plansmith::eval
