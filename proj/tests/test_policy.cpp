#include <gtest/gtest.h>

#include <random>

#include "plansmith/error.hpp"
#include "plansmith/policy.hpp"
#include "support.hpp"

using namespace plansmith;
using namespace plansmith::policy;

namespace {

std::string random_words(std::mt19937_64& rng, int min_words, int max_words) {
  static const std::vector<std::string> vocab{"mug", "table", "go", "then", "okay", "so", "the", "a",
                                              "open", "cabinet", "<b>", "x:y", "42", "kitchen", "wait"};
  const int n = min_words + static_cast<int>(rng() % static_cast<std::uint64_t>(max_words - min_words + 1));
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += vocab[rng() % vocab.size()];
  }
  return out;
}

std::string random_lines(std::mt19937_64& rng, int max_lines) {
  const int lines = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_lines));
  std::string out;
  for (int i = 0; i < lines; ++i) {
    if (i) out += '\n';
    out += random_words(rng, 1, 8);
  }
  return out;
}

struct FakeSleeper {
  std::vector<std::chrono::milliseconds> calls;
  Sleeper fn() {
    return [this](std::chrono::milliseconds d) { calls.push_back(d); };
  }
};

BackendConfig remote_cfg(int retries = 3) {
  BackendConfig c;
  c.kind = BackendKind::remote_chat;
  c.endpoint = "http://127.0.0.1:9/v1/chat/completions";
  c.model = "m";
  c.max_retries = retries;
  c.backoff_initial = std::chrono::milliseconds(10);
  return c;
}

}  // namespace

TEST(Grammar, ParsesFullForm) {
  const auto out = parse_output("<reasoning>\n  first line \n\n second\n</reasoning>\nThought: go get it\nACTION:  take mug from table ");
  EXPECT_EQ(out.long_thought, "first line\nsecond");
  EXPECT_EQ(out.short_thought, "go get it");
  EXPECT_EQ(out.action_raw, "take mug from table");
  EXPECT_EQ(out.usage.long_tokens, 3);
  EXPECT_EQ(out.usage.short_tokens, 3);
  EXPECT_EQ(out.usage.action_tokens, 4);
}

TEST(Grammar, OptionalPartsAndMultilineThought) {
  EXPECT_EQ(parse_output("Action: wait").action_raw, "wait");
  const auto out = parse_output("thought:\nline one\nline two\nAction: wait");
  EXPECT_EQ(out.short_thought, "line one\nline two");
}

TEST(Grammar, RejectsViolations) {
  for (const char* bad : {"", "Thought: hmm", "Action:", "Action: a\nAction: b", "Action: a\ntrailing",
                          "preamble\nAction: a", "<reasoning>x\nAction: a", "x<reasoning>y</reasoning>\nAction: a",
                          "Thought: a\nThought: b\nAction: c", "<reasoning>a</reasoning><reasoning>b</reasoning>Action: c"}) {
    try {
      parse_output(bad);
      ADD_FAILURE() << "accepted: " << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::parse) << bad;
    }
  }
}

TEST(Grammar, ParseRenderRoundTripProperty) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 2000; ++i) {
    const std::string lng = rng() % 4 ? random_lines(rng, 4) : "";
    const std::string shrt = rng() % 4 ? random_lines(rng, 3) : "";
    const std::string action = random_words(rng, 1, 5);
    const auto rendered = render_output(lng, shrt, action);
    const auto out = parse_output(rendered);
    ASSERT_EQ(out.long_thought, lng) << rendered;
    ASSERT_EQ(out.short_thought, shrt) << rendered;
    ASSERT_EQ(out.action_raw, action) << rendered;
    ASSERT_EQ(normalize_output(rendered), rendered);
  }
}

TEST(Grammar, NormalizeIsIdempotentAndPreservesParse) {
  const std::string messy = "  <reasoning> a \n\n b </reasoning>\n\nthought:   \n  plan it \n action:go to kitchen  ";
  const auto norm = normalize_output(messy);
  EXPECT_EQ(norm, "<reasoning>a\nb</reasoning>\nThought: plan it\nAction: go to kitchen");
  EXPECT_EQ(normalize_output(norm), norm);
  const auto a = parse_output(messy);
  const auto b = parse_output(norm);
  EXPECT_EQ(a.long_thought, b.long_thought);
  EXPECT_EQ(a.short_thought, b.short_thought);
  EXPECT_EQ(a.action_raw, b.action_raw);
}

TEST(BackendConfig, ValidationNamesField) {
  BackendConfig c;
  c.temperature = 3.0;
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_EQ(std::string(e.what()).rfind("temperature", 0), 0u);
  }
  BackendConfig r;
  r.kind = BackendKind::remote_chat;
  EXPECT_THROW(r.validate(), Error);
  EXPECT_NO_THROW(remote_cfg().validate());
  const nlohmann::json j = remote_cfg();
  const auto back = j.get<BackendConfig>();
  EXPECT_EQ(back.endpoint, remote_cfg().endpoint);
  EXPECT_EQ(back.backoff_initial, std::chrono::milliseconds(10));
  EXPECT_THROW(parse_backend_kind("gpt"), Error);
}

TEST(ChatClient, RetriesTransientFailuresWithDoublingBackoff) {
  CannedTransport t;
  t.push({0, {}, "connection refused"});
  t.push({503, "busy", {}});
  t.push({200, "not json", {}});
  t.push({200, chat_response_body("Action: wait", 12, 3), {}});
  FakeSleeper sleeper;
  const auto c = complete_with_retries(t, remote_cfg(3), {{Role::user, "hi"}}, 0.5, sleeper.fn());
  EXPECT_EQ(c.content, "Action: wait");
  EXPECT_EQ(c.attempts, 4);
  EXPECT_EQ(c.prompt_tokens, 12);
  EXPECT_EQ(c.completion_tokens, 3);
  EXPECT_EQ(sleeper.calls, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(10), std::chrono::milliseconds(20),
                                                                   std::chrono::milliseconds(40)}));
  const auto reqs = t.requests();
  ASSERT_EQ(reqs.size(), 4u);
  EXPECT_EQ(reqs[0].at("temperature"), 0.5);
  EXPECT_EQ(reqs[0].at("messages")[0].at("content"), "hi");
}

TEST(ChatClient, GivesUpAfterMaxRetries) {
  CannedTransport t({{429, {}, {}}, {429, {}, {}}, {429, {}, {}}});
  FakeSleeper sleeper;
  try {
    complete_with_retries(t, remote_cfg(2), {{Role::user, "hi"}}, 0.0, sleeper.fn());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::backend);
  }
  EXPECT_EQ(t.requests().size(), 3u);
  EXPECT_EQ(sleeper.calls.size(), 2u);
}

TEST(ChatClient, PermanentFailureStopsImmediately) {
  CannedTransport t({{401, "nope", {}}, {200, chat_response_body("Action: wait"), {}}});
  FakeSleeper sleeper;
  EXPECT_THROW(complete_with_retries(t, remote_cfg(5), {{Role::user, "hi"}}, 0.0, sleeper.fn()), Error);
  EXPECT_EQ(t.requests().size(), 1u);
  EXPECT_TRUE(sleeper.calls.empty());
}

TEST(ChatClient, LoggingThenReplayReproducesResponses) {
  testkit::TempDir dir;
  const auto log = dir / "log.jsonl";
  auto canned = std::make_shared<CannedTransport>();
  canned->push_content("Action: go to kitchen");
  canned->push_content("Action: wait");
  LoggingTransport logging(canned, log);
  const auto cfg = remote_cfg();
  const std::vector<ChatMessage> m1{{Role::user, "one"}};
  const std::vector<ChatMessage> m2{{Role::user, "two"}};
  const auto a = complete_with_retries(logging, cfg, m1, 0.0);
  const auto b = complete_with_retries(logging, cfg, m2, 0.0);

  ReplayTransport replay(log);
  EXPECT_EQ(complete_with_retries(replay, cfg, m2, 0.0).content, b.content);
  EXPECT_EQ(complete_with_retries(replay, cfg, m1, 0.0).content, a.content);
  const auto miss = replay.post(chat_request(cfg, m1, 0.0));
  EXPECT_EQ(miss.status, 404);
}

TEST(Backends, ScriptedReplaysPlan) {
  const auto task = env::generate_task(env::Difficulty::easy, 5);
  const auto plan = env::solve_optimal(task.world);
  auto backend = make_scripted_backend();
  auto agent = backend->begin_episode(task, {});
  for (const auto& a : plan.actions) EXPECT_EQ(agent->generate({}).action_raw, a.canonical());
  EXPECT_EQ(agent->generate({}).action_raw, "wait");
}

TEST(Backends, RandomIsSeededAndUsesTemplates) {
  const auto task = testkit::micro_task(3);
  auto backend = make_random_backend();
  auto a = backend->begin_episode(task, {.seed = 9});
  auto b = backend->begin_episode(task, {.seed = 9});
  for (int i = 0; i < 20; ++i) {
    const auto x = a->generate({}).action_raw;
    EXPECT_EQ(x, b->generate({}).action_raw);
    EXPECT_NE(std::find(task.world.action_templates.begin(), task.world.action_templates.end(), x),
              task.world.action_templates.end());
  }
}

TEST(Backends, MemorizingReplaysMatchingTaskOnly) {
  const auto task = env::generate_task(env::Difficulty::easy, 8);
  auto traj = testkit::synthetic_trajectory(2, 3, 1, "m");
  traj.instruction = task.instruction;
  traj.rehash();
  auto backend = make_memorizing_backend({traj});
  auto agent = backend->begin_episode(task, {.seed = 1, .temperature = 0.7});
  const auto first = agent->generate({});
  EXPECT_EQ(first.action_raw, traj.steps[0].action);
  EXPECT_EQ(first.short_thought, traj.steps[0].short_thought);
  EXPECT_EQ(first.temperature, 0.7);
  EXPECT_EQ(agent->generate({}).action_raw, traj.steps[1].action);

  const auto other = env::generate_task(env::Difficulty::easy, 9);
  const auto grounded = env::grounded_actions(other.world);
  auto stranger = backend->begin_episode(other, {.seed = 1});
  const auto x = stranger->generate({}).action_raw;
  EXPECT_NE(std::find(grounded.begin(), grounded.end(), x), grounded.end());
}

TEST(Backends, RemoteMarksUnparseableOutputInvalid) {
  auto transport = std::make_shared<CannedTransport>();
  transport->push_content("I refuse to follow the format");
  transport->push_content("<reasoning>r</reasoning>\nThought: t\nAction: wait");
  FakeSleeper sleeper;
  auto backend = make_remote_backend(remote_cfg(), transport, sleeper.fn());
  EXPECT_EQ(backend->id(), "remote_chat:m");
  const auto task = testkit::micro_task(3);
  auto agent = backend->begin_episode(task, {});
  const auto bad = agent->generate({});
  EXPECT_TRUE(bad.invalid);
  EXPECT_FALSE(bad.error.empty());
  const auto good = agent->generate({});
  EXPECT_FALSE(good.invalid);
  EXPECT_EQ(good.long_thought, "r");
  EXPECT_EQ(good.action_raw, "wait");
  // Exhausted transport: retries end in a backend error.
  EXPECT_THROW(agent->generate({}), Error);
}
