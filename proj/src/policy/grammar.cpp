#include <optional>

#include "plansmith/context.hpp"
#include "plansmith/error.hpp"
#include "plansmith/policy.hpp"
#include "plansmith/text.hpp"

namespace plansmith::policy {

namespace {

constexpr std::string_view kOpen = "<reasoning>";
constexpr std::string_view kClose = "</reasoning>";
constexpr std::string_view kThought = "Thought:";
constexpr std::string_view kAction = "Action:";

[[noreturn]] void parse_error(const std::string& msg) { throw Error(ErrorKind::parse, "policy output: " + msg); }

std::size_t count_of(std::string_view s, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string_view::npos; pos = s.find(needle, pos + needle.size())) ++n;
  return n;
}

struct Split {
  std::string long_thought;
  std::string_view rest;
};

// Separates the optional leading reasoning block from the Thought/Action body.
Split split_reasoning(std::string_view raw) {
  const std::size_t opens = count_of(raw, kOpen);
  const std::size_t closes = count_of(raw, kClose);
  if (opens != closes || opens > 1) parse_error("unbalanced reasoning markers");
  if (opens == 0) return {{}, raw};
  const auto open = raw.find(kOpen);
  const auto close = raw.find(kClose);
  if (close < open) parse_error("unbalanced reasoning markers");
  if (!text::trim(raw.substr(0, open)).empty()) parse_error("text before the reasoning block");
  const auto inner = raw.substr(open + kOpen.size(), close - open - kOpen.size());
  return {text::normalize_lines(inner), raw.substr(close + kClose.size())};
}

std::optional<std::string_view> keyword_value(std::string_view line, std::string_view keyword) {
  if (!text::starts_with_ci(line, keyword)) return std::nullopt;
  return text::trim(line.substr(keyword.size()));
}

std::vector<std::string_view> content_lines(std::string_view s) {
  std::vector<std::string_view> out;
  for (auto line : text::split_lines(s)) {
    line = text::trim(line);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace

PolicyOutput parse_output(std::string_view raw) {
  PolicyOutput out;
  out.raw = std::string(raw);
  Split split = split_reasoning(raw);
  out.long_thought = std::move(split.long_thought);

  std::vector<std::string> thought;
  bool saw_thought = false;
  bool saw_action = false;
  for (auto line : content_lines(split.rest)) {
    if (auto a = keyword_value(line, kAction)) {
      if (saw_action) parse_error("more than one Action line");
      saw_action = true;
      out.action_raw = std::string(*a);
      continue;
    }
    if (saw_action) parse_error("text after the Action line");
    if (auto t = keyword_value(line, kThought)) {
      if (saw_thought) parse_error("more than one Thought line");
      saw_thought = true;
      if (!t->empty()) thought.emplace_back(*t);
      continue;
    }
    if (!saw_thought) parse_error("unexpected text '" + std::string(line) + "'");
    thought.emplace_back(line);
  }
  if (!saw_action) parse_error("missing Action line");
  if (out.action_raw.empty()) parse_error("empty action");
  out.short_thought = text::join(thought, "\n");
  out.usage.long_tokens = context::count_tokens(out.long_thought);
  out.usage.short_tokens = context::count_tokens(out.short_thought);
  out.usage.action_tokens = context::count_tokens(out.action_raw);
  return out;
}

std::string render_output(std::string_view long_thought, std::string_view short_thought, std::string_view action) {
  std::string out;
  if (!long_thought.empty()) {
    out += kOpen;
    out += long_thought;
    out += kClose;
    out += '\n';
  }
  if (!short_thought.empty()) {
    out += kThought;
    out += ' ';
    out += short_thought;
    out += '\n';
  }
  out += kAction;
  out += ' ';
  out += action;
  return out;
}

std::string normalize_output(std::string_view raw) {
  std::vector<std::string> lines;
  std::string_view body = raw;
  if (const auto open = raw.find(kOpen); open != std::string_view::npos) {
    const auto close = raw.find(kClose);
    if (close != std::string_view::npos && close > open) {
      const std::string inner = text::normalize_lines(raw.substr(open + kOpen.size(), close - open - kOpen.size()));
      if (!inner.empty()) lines.push_back(std::string(kOpen) + inner + std::string(kClose));
      body = raw.substr(close + kClose.size());
    }
  }
  const auto rest = content_lines(body);
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const auto line = rest[i];
    if (auto a = keyword_value(line, kAction)) {
      lines.push_back(std::string(kAction) + " " + std::string(*a));
    } else if (auto t = keyword_value(line, kThought)) {
      if (!t->empty()) {
        lines.push_back(std::string(kThought) + " " + std::string(*t));
      } else if (i + 1 < rest.size() && !keyword_value(rest[i + 1], kAction)) {
        lines.push_back(std::string(kThought) + " " + std::string(rest[++i]));
      }
    } else {
      lines.emplace_back(line);
    }
  }
  return text::join(lines, "\n");
}

}  // namespace plansmith::policy
