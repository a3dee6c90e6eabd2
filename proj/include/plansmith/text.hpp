#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace plansmith::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::string to_lower(std::string_view s);

/// Trims every line and drops the blank ones, joining the rest with '\n'.
std::string normalize_lines(std::string_view s);

/// Maximal runs of non-whitespace characters.
std::vector<std::string_view> words(std::string_view s);

/// Replaces `{name}` for each provided key in a single left-to-right pass.
/// Braces around unknown names are left alone, and substituted values are
/// never re-scanned.
std::string substitute(std::string_view tmpl,
                       const std::vector<std::pair<std::string, std::string>>& values);

/// Fixed-point rendering with `decimals` digits after the point.
std::string fixed(double value, int decimals);

}  // namespace plansmith::text
