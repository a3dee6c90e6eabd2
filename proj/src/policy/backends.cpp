#include <random>
#include <unordered_map>

#include "plansmith/error.hpp"
#include "plansmith/policy.hpp"

namespace plansmith::policy {

namespace {

PolicyOutput action_output(std::string long_thought, std::string short_thought, std::string action,
                           const std::string& backend_id, double temperature) {
  PolicyOutput out;
  out.long_thought = std::move(long_thought);
  out.short_thought = std::move(short_thought);
  out.action_raw = std::move(action);
  out.usage.long_tokens = context::count_tokens(out.long_thought);
  out.usage.short_tokens = context::count_tokens(out.short_thought);
  out.usage.action_tokens = context::count_tokens(out.action_raw);
  out.backend_id = backend_id;
  out.temperature = temperature;
  out.raw = render_output(out.long_thought, out.short_thought, out.action_raw);
  return out;
}

std::vector<std::string> templates_for(const env::TaskSpec& task) {
  return task.world.action_templates.empty() ? env::grounded_actions(task.world) : task.world.action_templates;
}

class RandomAgent final : public EpisodeAgent {
 public:
  RandomAgent(std::vector<std::string> templates, std::uint64_t seed, std::string id, double temperature)
      : templates_(std::move(templates)), rng_(seed), id_(std::move(id)), temperature_(temperature) {
    if (templates_.empty()) throw Error(ErrorKind::backend, "random backend: world has no legal action templates");
  }

  PolicyOutput generate(const context::PromptContext&) override {
    const auto& a = templates_[rng_() % templates_.size()];
    return action_output({}, {}, a, id_, temperature_);
  }

 private:
  std::vector<std::string> templates_;
  std::mt19937_64 rng_;
  std::string id_;
  double temperature_;
};

class ScriptedAgent final : public EpisodeAgent {
 public:
  ScriptedAgent(std::vector<env::ActionCommand> plan, std::string id, double temperature)
      : plan_(std::move(plan)), id_(std::move(id)), temperature_(temperature) {}

  PolicyOutput generate(const context::PromptContext&) override {
    const std::string action = cursor_ < plan_.size() ? plan_[cursor_++].canonical() : "wait";
    return action_output({}, {}, action, id_, temperature_);
  }

 private:
  std::vector<env::ActionCommand> plan_;
  std::size_t cursor_ = 0;
  std::string id_;
  double temperature_;
};

class ReplayAgent final : public EpisodeAgent {
 public:
  ReplayAgent(const Trajectory& memory, std::unique_ptr<EpisodeAgent> fallback, std::string id, double temperature)
      : memory_(memory), fallback_(std::move(fallback)), id_(std::move(id)), temperature_(temperature) {}

  PolicyOutput generate(const context::PromptContext& ctx) override {
    if (cursor_ < memory_.steps.size()) {
      const auto& q = memory_.steps[cursor_++];
      return action_output(q.long_thought, q.short_thought, q.action, id_, temperature_);
    }
    return fallback_->generate(ctx);
  }

 private:
  const Trajectory& memory_;
  std::size_t cursor_ = 0;
  std::unique_ptr<EpisodeAgent> fallback_;
  std::string id_;
  double temperature_;
};

class RemoteAgent final : public EpisodeAgent {
 public:
  RemoteAgent(const BackendConfig& cfg, std::shared_ptr<ChatTransport> transport, const Sleeper& sleep,
              std::string id, double temperature)
      : cfg_(cfg), transport_(std::move(transport)), sleep_(sleep), id_(std::move(id)), temperature_(temperature) {}

  PolicyOutput generate(const context::PromptContext& ctx) override {
    const Completion c = complete_with_retries(*transport_, cfg_, ctx.messages, temperature_, sleep_);
    PolicyOutput out;
    try {
      out = parse_output(c.content);
    } catch (const Error& e) {
      out = PolicyOutput{};
      out.raw = c.content;
      out.invalid = true;
      out.error = e.what();
    }
    out.usage.prompt_tokens = c.prompt_tokens;
    out.usage.completion_tokens = c.completion_tokens;
    out.backend_id = id_;
    out.temperature = temperature_;
    return out;
  }

 private:
  const BackendConfig& cfg_;
  std::shared_ptr<ChatTransport> transport_;
  const Sleeper& sleep_;
  std::string id_;
  double temperature_;
};

class BackendBase : public PolicyBackend {
 public:
  explicit BackendBase(BackendConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }
  const BackendConfig& config() const override { return cfg_; }
  std::string id() const override { return std::string(to_string(cfg_.kind)); }

 protected:
  double temperature(const EpisodeSettings& s) const { return s.temperature.value_or(cfg_.temperature); }
  BackendConfig cfg_;
};

class RandomBackend final : public BackendBase {
 public:
  using BackendBase::BackendBase;
  std::unique_ptr<EpisodeAgent> begin_episode(const env::TaskSpec& task, const EpisodeSettings& s) const override {
    return std::make_unique<RandomAgent>(templates_for(task), s.seed, id(), temperature(s));
  }
};

class ScriptedBackend final : public BackendBase {
 public:
  using BackendBase::BackendBase;
  std::unique_ptr<EpisodeAgent> begin_episode(const env::TaskSpec& task, const EpisodeSettings& s) const override {
    return std::make_unique<ScriptedAgent>(env::solve_optimal(task.world).actions, id(), temperature(s));
  }
};

class MemorizingBackend final : public BackendBase {
 public:
  MemorizingBackend(std::vector<Trajectory> memory, BackendConfig cfg)
      : BackendBase(std::move(cfg)), memory_(std::move(memory)) {
    for (std::size_t i = 0; i < memory_.size(); ++i) index_.emplace(key(memory_[i].instruction), i);
  }

  std::unique_ptr<EpisodeAgent> begin_episode(const env::TaskSpec& task, const EpisodeSettings& s) const override {
    auto fallback = std::make_unique<RandomAgent>(templates_for(task), s.seed, id(), temperature(s));
    auto it = index_.find(key(task.instruction));
    if (it == index_.end()) return fallback;
    return std::make_unique<ReplayAgent>(memory_[it->second], std::move(fallback), id(), temperature(s));
  }

 private:
  static std::string key(const env::TaskInstruction& t) { return t.task_id + '\x1f' + t.text; }

  std::vector<Trajectory> memory_;
  std::unordered_map<std::string, std::size_t> index_;  // emplace keeps the first match
};

class RemoteBackend final : public BackendBase {
 public:
  RemoteBackend(BackendConfig cfg, std::shared_ptr<ChatTransport> transport, Sleeper sleep)
      : BackendBase(std::move(cfg)), transport_(std::move(transport)), sleep_(std::move(sleep)) {
    if (!transport_) throw Error(ErrorKind::config, "remote backend requires a transport");
  }
  std::string id() const override { return "remote_chat:" + cfg_.model; }
  std::unique_ptr<EpisodeAgent> begin_episode(const env::TaskSpec&, const EpisodeSettings& s) const override {
    return std::make_unique<RemoteAgent>(cfg_, transport_, sleep_, id(), temperature(s));
  }

 private:
  std::shared_ptr<ChatTransport> transport_;
  Sleeper sleep_;
};

BackendConfig with_kind(BackendConfig cfg, BackendKind kind) {
  cfg.kind = kind;
  return cfg;
}

}  // namespace

std::unique_ptr<PolicyBackend> make_scripted_backend(BackendConfig cfg) {
  return std::make_unique<ScriptedBackend>(with_kind(std::move(cfg), BackendKind::scripted));
}

std::unique_ptr<PolicyBackend> make_random_backend(BackendConfig cfg) {
  return std::make_unique<RandomBackend>(with_kind(std::move(cfg), BackendKind::random));
}

std::unique_ptr<PolicyBackend> make_memorizing_backend(std::vector<Trajectory> memory, BackendConfig cfg) {
  return std::make_unique<MemorizingBackend>(std::move(memory), with_kind(std::move(cfg), BackendKind::memorizing));
}

std::unique_ptr<PolicyBackend> make_remote_backend(BackendConfig cfg, std::shared_ptr<ChatTransport> transport,
                                                   Sleeper sleep) {
  return std::make_unique<RemoteBackend>(with_kind(std::move(cfg), BackendKind::remote_chat), std::move(transport),
                                         std::move(sleep));
}

}  // namespace plansmith::policy
