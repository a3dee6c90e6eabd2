#include "plansmith/context.hpp"

#include "plansmith/error.hpp"
#include "plansmith/text.hpp"

namespace plansmith::context {

int count_tokens(std::string_view text) { return static_cast<int>(text::words(text).size()); }

namespace {

int count_with(const TokenCounter& counter, std::string_view s) { return counter ? counter(s) : count_tokens(s); }

std::vector<ChatMessage> build(std::string_view system_prompt, std::string_view instruction,
                               std::span<const HistoryStep> kept, std::string_view current) {
  std::vector<ChatMessage> out;
  out.reserve(2 * kept.size() + 2);
  out.push_back({Role::system, std::string(system_prompt)});
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto& h = kept[i];
    out.push_back({Role::user, i == 0 ? first_user_content(instruction, h.observation) : h.observation});
    out.push_back({Role::assistant, history_assistant_content(h.short_thought, h.action)});
  }
  out.push_back({Role::user, kept.empty() ? first_user_content(instruction, current) : std::string(current)});
  return out;
}

int total(const std::vector<ChatMessage>& msgs, const TokenCounter& counter) {
  int n = 0;
  for (const auto& m : msgs) n += count_with(counter, m.content);
  return n;
}

}  // namespace

PromptContext assemble(std::string_view instruction, std::span<const HistoryStep> history,
                       std::string_view current_observation, const AssembleOptions& options) {
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].step_index != static_cast<int>(i) + 1) {
      throw Error(ErrorKind::validation, "history gap: expected step " + std::to_string(i + 1) + ", found " +
                                             std::to_string(history[i].step_index));
    }
  }
  PromptContext ctx;
  ctx.step = static_cast<int>(history.size()) + 1;
  std::size_t first = 0;
  ctx.messages = build(options.system_prompt, instruction, history, current_observation);
  ctx.total_tokens = total(ctx.messages, options.counter);
  if (options.token_budget) {
    while (ctx.total_tokens > *options.token_budget && first < history.size()) {
      ++first;
      ctx.messages = build(options.system_prompt, instruction, history.subspan(first), current_observation);
      ctx.total_tokens = total(ctx.messages, options.counter);
    }
    ctx.dropped_steps = static_cast<int>(first);
    ctx.truncated = first > 0;
  }
  return ctx;
}

std::vector<HistoryStep> history_of(const Trajectory& traj, std::size_t upto) {
  std::vector<HistoryStep> out;
  for (std::size_t i = 0; i < upto && i < traj.steps.size(); ++i) {
    const auto& q = traj.steps[i];
    out.push_back({static_cast<int>(i) + 1, q.observation, q.short_thought, q.action});
  }
  return out;
}

FusionReport fusion_report(const Trajectory& traj, std::string_view system_prompt, const TokenCounter& counter) {
  FusionReport r;
  const long long fixed = count_with(counter, system_prompt) + count_with(counter, traj.instruction.text);
  long long history_overhead = 0;
  long long history_short = 0;
  long long history_long = 0;
  for (const auto& q : traj.steps) {
    const long long obs = count_with(counter, q.observation);
    // Context at step t: fixed part, all prior (o, thought, a), and o_t.
    r.overhead_tokens += fixed + history_overhead + obs;
    r.fused_thought_tokens += history_short;
    r.full_thought_tokens += history_long;
    history_overhead += obs + q.token_usage.action_tokens;
    history_short += q.token_usage.short_tokens;
    history_long += q.token_usage.long_tokens;
  }
  r.fused_total = r.overhead_tokens + r.fused_thought_tokens;
  r.full_total = r.overhead_tokens + r.full_thought_tokens;
  r.ratio = r.full_total > 0 ? static_cast<double>(r.fused_total) / static_cast<double>(r.full_total) : 1.0;
  r.thought_ratio = r.full_thought_tokens > 0
                        ? static_cast<double>(r.fused_thought_tokens) / static_cast<double>(r.full_thought_tokens)
                        : 1.0;
  return r;
}

nlohmann::json to_json(const FusionReport& r) {
  return {{"fused_thought_tokens", r.fused_thought_tokens},
          {"full_thought_tokens", r.full_thought_tokens},
          {"overhead_tokens", r.overhead_tokens},
          {"fused_total", r.fused_total},
          {"full_total", r.full_total},
          {"ratio", r.ratio},
          {"thought_ratio", r.thought_ratio}};
}

}  // namespace plansmith::context
