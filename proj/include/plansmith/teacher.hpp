#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "plansmith/policy.hpp"
#include "plansmith/trajectory.hpp"

namespace plansmith::teacher {

/// Text-completion model used for synthesis and distillation prompts.
/// Implementations throw Error(backend) on transport failure.
class Teacher {
 public:
  virtual ~Teacher() = default;
  virtual std::string id() const = 0;
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
  virtual int concurrency_limit() const { return 1; }
};

/// Wraps a callable; counts calls. Used for mocks.
class FunctionTeacher final : public Teacher {
 public:
  using Fn = std::function<std::string(const std::vector<ChatMessage>&)>;
  explicit FunctionTeacher(Fn fn, std::string id = "function");
  std::string id() const override { return id_; }
  std::string complete(const std::vector<ChatMessage>& messages) override;
  int calls() const { return calls_; }

 private:
  Fn fn_;
  std::string id_;
  std::atomic<int> calls_{0};
};

class RemoteTeacher final : public Teacher {
 public:
  RemoteTeacher(policy::BackendConfig cfg, std::shared_ptr<policy::ChatTransport> transport,
                policy::Sleeper sleep = {});
  std::string id() const override { return "remote_chat:" + cfg_.model; }
  std::string complete(const std::vector<ChatMessage>& messages) override;
  int concurrency_limit() const override { return cfg_.concurrency_limit; }

 private:
  policy::BackendConfig cfg_;
  std::shared_ptr<policy::ChatTransport> transport_;
  policy::Sleeper sleep_;
};

/// Deterministic offline stand-in for a teacher model. Recognises the
/// distillation, synthesis and skeleton prompts and answers each from the
/// prompt content alone (skeletons are built from MiniWorld plans).
class HeuristicTeacher final : public Teacher {
 public:
  std::string id() const override { return "heuristic"; }
  std::string complete(const std::vector<ChatMessage>& messages) override;
  int concurrency_limit() const override { return 4; }

 private:
  std::atomic<std::uint64_t> skeleton_calls_{0};
};

struct TeacherConfig {
  /// "heuristic" or "remote_chat".
  std::string kind = "heuristic";
  policy::BackendConfig remote;
};

void to_json(nlohmann::json& j, const TeacherConfig& c);
void from_json(const nlohmann::json& j, TeacherConfig& c);

std::unique_ptr<Teacher> make_teacher(const TeacherConfig& cfg);

/// Short planning sentence for an action in the MiniWorld grammar.
std::string plan_sentence(std::string_view action);

}  // namespace plansmith::teacher
