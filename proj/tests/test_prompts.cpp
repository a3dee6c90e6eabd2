#include <gtest/gtest.h>

#include "plansmith/curriculum.hpp"
#include "plansmith/error.hpp"
#include "plansmith/flywheel.hpp"
#include "plansmith/prompts.hpp"
#include "plansmith/text.hpp"
#include "support.hpp"

using namespace plansmith;

namespace {

std::string golden(const std::string& name) {
  return testkit::read_text(std::filesystem::path(PLANSMITH_TEST_GOLDEN_DIR) / (name + ".txt"));
}

}  // namespace

TEST(Prompts, DistillationMatchesGolden) {
  EXPECT_EQ(prompts::to_text(flywheel::distillation_prompt("SAMPLE LONG THOUGHT")), golden("distillation"));
}

TEST(Prompts, SynthesisMatchesGolden) {
  EXPECT_EQ(prompts::to_text(flywheel::synthesis_prompt("SAMPLE EXAMPLES", "SAMPLE TARGET")), golden("synthesis"));
}

TEST(Prompts, SkeletonMatchesGolden) {
  curriculum::SkeletonRequest req;
  req.category = "Household";
  req.category_topic = "tidying objects into containers";
  req.difficulty = env::Difficulty::medium;
  req.target_length = 14;
  req.exemplars = {"EXAMPLE ONE", "EXAMPLE TWO"};
  EXPECT_EQ(prompts::to_text(curriculum::skeleton_prompt(req)), golden("skeleton"));
}

TEST(Prompts, AssetFilesMatchEmbeddedCopies) {
  for (const auto& name : prompts::builtin_names()) {
    const auto from_disk = prompts::load(name, PLANSMITH_TEST_ASSET_DIR "/prompts");
    const auto embedded = prompts::builtin(name);
    EXPECT_EQ(from_disk.system, embedded.system) << name;
    EXPECT_EQ(from_disk.user, embedded.user) << name;
  }
}

TEST(Prompts, PlaceholdersIgnoreJsonBraces) {
  EXPECT_EQ(prompts::builtin("skeleton").placeholders(),
            (std::vector<std::string>{"category", "category_topic", "difficulty", "target_length",
                                      "trajectory_examples"}));
  EXPECT_EQ(prompts::builtin("distillation").placeholders(), std::vector<std::string>{"reasoning_content"});
}

TEST(Prompts, MissingValueIsConfigError) {
  try {
    prompts::render(prompts::builtin("quaternion_synthesis"), {{"examples_section", "x"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_NE(std::string(e.what()).find("{target_messages}"), std::string::npos);
  }
}

TEST(Prompts, SubstitutionIsSinglePass) {
  EXPECT_EQ(text::substitute("{a}-{b}-{c}", {{"a", "{b}"}, {"b", "B"}}), "{b}-B-{c}");
  const auto t = prompts::parse_template("t", "<|user|>\nhi {name}\n");
  EXPECT_TRUE(t.system.empty());
  const auto msgs = prompts::render(t, {{"name", "you"}});
  ASSERT_EQ(msgs.size(), 1u);
  EXPECT_EQ(msgs[0], (ChatMessage{Role::user, "hi you"}));
}

TEST(Prompts, MalformedAndUnknown) {
  EXPECT_THROW(prompts::parse_template("bad", "stray text\n<|user|>\nx"), Error);
  EXPECT_THROW(prompts::builtin("nope"), Error);
  EXPECT_THROW(prompts::system_prompt_for("webshop"), Error);
  EXPECT_NE(prompts::system_prompt_for("miniworld").find("Action: your next action."), std::string::npos);
}
