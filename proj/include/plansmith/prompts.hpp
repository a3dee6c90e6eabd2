#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "plansmith/trajectory.hpp"

namespace plansmith::prompts {

/// A prompt asset split into its system and user sections. Either section may
/// be empty. Section markers are lines reading `<|system|>` and `<|user|>`.
struct Template {
  std::string name;
  std::string system;
  std::string user;

  std::vector<std::string> placeholders() const;
};

using Values = std::vector<std::pair<std::string, std::string>>;

Template parse_template(std::string_view name, std::string_view text);

/// Built-in templates: distillation, quaternion_synthesis, skeleton,
/// miniworld_system, alfworld_system, sciworld_system.
Template builtin(std::string_view name);
std::vector<std::string> builtin_names();

/// Loads `<dir>/<name>.txt` when `dir` is non-empty, else the built-in copy.
Template load(std::string_view name, const std::filesystem::path& dir = {});

/// Substitutes the values into both sections. Unknown placeholders are left
/// as-is; missing values throw Error(config).
std::vector<ChatMessage> render(const Template& tmpl, const Values& values);

/// Inverse of parse_template for a rendered message pair; used for golden files.
std::string to_text(const std::vector<ChatMessage>& messages);

/// System prompt of an environment profile ("miniworld", "alfworld", "scienceworld").
std::string system_prompt_for(std::string_view profile, const std::filesystem::path& dir = {});

}  // namespace plansmith::prompts
