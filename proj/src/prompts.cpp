#include "plansmith/prompts.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "plansmith/embedded_prompts.hpp"
#include "plansmith/error.hpp"
#include "plansmith/text.hpp"

namespace plansmith::prompts {

namespace {

constexpr std::string_view kSystemMarker = "<|system|>";
constexpr std::string_view kUserMarker = "<|user|>";

std::string_view embedded_text(std::string_view name) {
  if (name == "distillation") return embedded::distillation;
  if (name == "quaternion_synthesis") return embedded::quaternion_synthesis;
  if (name == "skeleton") return embedded::skeleton;
  if (name == "miniworld_system") return embedded::miniworld_system;
  if (name == "alfworld_system") return embedded::alfworld_system;
  if (name == "sciworld_system") return embedded::sciworld_system;
  throw Error(ErrorKind::config, "unknown prompt template '" + std::string(name) + "'");
}

// Names made of identifier characters only; JSON braces in the skeleton
// prompt are not placeholders.
bool is_placeholder_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return true;
}

void collect(std::string_view s, std::vector<std::string>& out) {
  for (std::size_t i = 0; (i = s.find('{', i)) != std::string_view::npos; ++i) {
    const auto close = s.find('}', i + 1);
    if (close == std::string_view::npos) break;
    const auto name = s.substr(i + 1, close - i - 1);
    if (is_placeholder_name(name)) out.emplace_back(name);
  }
}

}  // namespace

std::vector<std::string> Template::placeholders() const {
  std::vector<std::string> out;
  collect(system, out);
  collect(user, out);
  return out;
}

Template parse_template(std::string_view name, std::string_view body) {
  Template t;
  t.name = std::string(name);
  std::string* current = nullptr;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto nl = body.find('\n', pos);
    if (nl == std::string_view::npos) nl = body.size();
    const std::string_view line = body.substr(pos, nl - pos);
    if (line == kSystemMarker || line == kUserMarker) {
      current = line == kSystemMarker ? &t.system : &t.user;
      current->clear();
    } else if (current) {
      current->append(line);
      current->push_back('\n');
    } else if (!text::trim(line).empty()) {
      throw Error(ErrorKind::config, "prompt '" + std::string(name) + "': text before the first section marker");
    }
    if (nl == body.size()) break;
    pos = nl + 1;
  }
  // Each section ends without the newline that separated it from the next marker.
  for (std::string* s : {&t.system, &t.user}) {
    while (!s->empty() && s->back() == '\n') s->pop_back();
  }
  return t;
}

Template builtin(std::string_view name) { return parse_template(name, embedded_text(name)); }

std::vector<std::string> builtin_names() {
  return {"distillation", "quaternion_synthesis", "skeleton", "miniworld_system", "alfworld_system", "sciworld_system"};
}

Template load(std::string_view name, const std::filesystem::path& dir) {
  if (dir.empty()) return builtin(name);
  const auto path = dir / (std::string(name) + ".txt");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::config, "prompt asset not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_template(name, ss.str());
}

std::vector<ChatMessage> render(const Template& tmpl, const Values& values) {
  std::set<std::string> provided;
  for (const auto& [k, v] : values) provided.insert(k);
  for (const auto& p : tmpl.placeholders()) {
    if (!provided.count(p)) {
      throw Error(ErrorKind::config, "prompt '" + tmpl.name + "': missing value for {" + p + "}");
    }
  }
  std::vector<ChatMessage> out;
  if (!tmpl.system.empty()) out.push_back({Role::system, text::substitute(tmpl.system, values)});
  if (!tmpl.user.empty()) out.push_back({Role::user, text::substitute(tmpl.user, values)});
  return out;
}

std::string to_text(const std::vector<ChatMessage>& messages) {
  std::string out;
  for (const auto& m : messages) {
    out += m.role == Role::system ? kSystemMarker : kUserMarker;
    out += '\n';
    out += m.content;
    out += '\n';
  }
  return out;
}

std::string system_prompt_for(std::string_view profile, const std::filesystem::path& dir) {
  std::string_view name;
  if (profile == "miniworld") {
    name = "miniworld_system";
  } else if (profile == "alfworld") {
    name = "alfworld_system";
  } else if (profile == "scienceworld") {
    name = "sciworld_system";
  } else {
    throw Error(ErrorKind::config, "unknown environment profile '" + std::string(profile) + "'");
  }
  return load(name, dir).system;
}

}  // namespace plansmith::prompts
