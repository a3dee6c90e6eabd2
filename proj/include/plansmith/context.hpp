#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plansmith/trajectory.hpp"

namespace plansmith::context {

using TokenCounter = std::function<int(std::string_view)>;

/// Default estimator: number of maximal non-whitespace runs.
int count_tokens(std::string_view text);

/// One completed step as retained in history. The long thought is not part
/// of this type on purpose.
struct HistoryStep {
  int step_index = 1;
  std::string observation;
  std::string short_thought;
  std::string action;
};

struct AssembleOptions {
  std::string system_prompt;
  /// When set and exceeded, the oldest (o, p, a) triples are dropped.
  std::optional<int> token_budget;
  TokenCounter counter;  // defaults to count_tokens
};

struct PromptContext {
  std::vector<ChatMessage> messages;
  int total_tokens = 0;
  int step = 1;
  /// Set when history was dropped to fit the token budget.
  bool truncated = false;
  int dropped_steps = 0;
};

/// Builds [system, user(u + o_1), assistant(p_1, a_1), ..., user(o_t)] where
/// t = history.size() + 1. Throws Error(validation) if history step indices
/// are not 1..t-1.
PromptContext assemble(std::string_view instruction, std::span<const HistoryStep> history,
                       std::string_view current_observation, const AssembleOptions& options = {});

std::vector<HistoryStep> history_of(const Trajectory& traj, std::size_t upto);

struct FusionReport {
  long long fused_thought_tokens = 0;
  long long full_thought_tokens = 0;
  long long overhead_tokens = 0;
  long long fused_total = 0;
  long long full_total = 0;
  double ratio = 1.0;          // fused_total / full_total
  double thought_ratio = 1.0;  // fused_thought_tokens / full_thought_tokens
};

/// Cumulative context cost over all steps of `traj` when history keeps short
/// thoughts (fused) versus long thoughts (full). Thought costs come from
/// token_usage; overhead (system prompt, instruction, observations, actions)
/// is counted once and added to both totals.
FusionReport fusion_report(const Trajectory& traj, std::string_view system_prompt = {},
                           const TokenCounter& counter = {});

nlohmann::json to_json(const FusionReport& r);

}  // namespace plansmith::context
