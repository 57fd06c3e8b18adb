#include <gtest/gtest.h>

#include "florence2_bridge/task_registry.hpp"

using namespace florence2_bridge;
using florence2_interfaces::OutputKind;

TEST(TaskRegistry, LookupKnownTokens) {
  const auto& registry = TaskRegistry::builtin();
  auto od = registry.lookup("<OD>");
  ASSERT_TRUE(od);
  EXPECT_FALSE(od->requires_text_input);
  EXPECT_EQ(od->output_kind, OutputKind::kBoxesLabels);

  auto caption = registry.lookup("<CAPTION>");
  ASSERT_TRUE(caption);
  EXPECT_FALSE(caption->requires_text_input);
  EXPECT_EQ(caption->output_kind, OutputKind::kText);

  auto ocr = registry.lookup("<OCR_WITH_REGION>");
  ASSERT_TRUE(ocr);
  EXPECT_FALSE(ocr->requires_text_input);
  EXPECT_EQ(ocr->output_kind, OutputKind::kQuadBoxesText);

  EXPECT_FALSE(registry.lookup("<NOT_A_TASK>"));
  EXPECT_FALSE(registry.lookup(""));
}

TEST(TaskRegistry, DefaultSetCoversDocumentedFamilies) {
  const auto& registry = TaskRegistry::builtin();
  for (const char* token : {"<OD>", "<CAPTION>", "<DETAILED_CAPTION>", "<MORE_DETAILED_CAPTION>", "<OCR>",
                            "<OCR_WITH_REGION>", "<DENSE_REGION_CAPTION>", "<REGION_PROPOSAL>",
                            "<CAPTION_TO_PHRASE_GROUNDING>", "<OPEN_VOCABULARY_DETECTION>",
                            "<REFERRING_EXPRESSION_SEGMENTATION>"}) {
    EXPECT_TRUE(registry.lookup(token)) << token;
  }
  // Every output kind is served by at least one default task.
  for (auto kind : florence2_interfaces::kAllOutputKinds) {
    bool found = false;
    for (const auto& spec : registry.list_tasks()) found |= spec.output_kind == kind;
    EXPECT_TRUE(found) << florence2_interfaces::to_string(kind);
  }
}

TEST(TaskRegistry, BuiltinMatchesCheckedInFile) {
  auto from_disk = TaskRegistry::from_file(FLORENCE2_SOURCE_DIR "/data/tasks.json");
  EXPECT_EQ(from_disk.list_tasks(), TaskRegistry::builtin().list_tasks());
}

TEST(TaskRegistry, ListIsLexicographic) {
  TaskRegistry two({{"<OD>", false, OutputKind::kBoxesLabels, ""}, {"<CAPTION>", false, OutputKind::kText, ""}});
  auto tasks = two.list_tasks();
  ASSERT_EQ(tasks.size(), 2u);
  EXPECT_EQ(tasks[0].token, "<CAPTION>");
  EXPECT_EQ(tasks[1].token, "<OD>");

  EXPECT_TRUE(TaskRegistry().list_tasks().empty());

  auto all = TaskRegistry::builtin().list_tasks();
  EXPECT_TRUE(std::is_sorted(all.begin(), all.end(), [](auto& a, auto& b) { return a.token < b.token; }));
}

TEST(TaskRegistry, RejectsDuplicatesAndMalformedFiles) {
  EXPECT_THROW(TaskRegistry({{"<OD>", false, OutputKind::kBoxesLabels, ""}, {"<OD>", false, OutputKind::kText, ""}}),
               florence2_interfaces::Error);
  EXPECT_THROW(TaskRegistry({{"OD", false, OutputKind::kBoxesLabels, ""}}), florence2_interfaces::Error);
  EXPECT_THROW(TaskRegistry::from_json("{}"), florence2_interfaces::Error);
  EXPECT_THROW(TaskRegistry::from_json(R"([{"token":"<X>","requires_text_input":false,"output_kind":"NOPE"}])"),
               florence2_interfaces::Error);
  EXPECT_THROW(TaskRegistry::from_json(R"([{"token":"<X>"}])"), florence2_interfaces::Error);
  auto custom = TaskRegistry::from_json(
      R"([{"token":"<MY_TASK>","requires_text_input":true,"output_kind":"TEXT","description":"d"}])");
  EXPECT_TRUE(custom.lookup("<MY_TASK>")->requires_text_input);
}

TEST(TaskRegistry, LookupReturnsTheQueriedToken) {
  for (const auto& spec : TaskRegistry::builtin().list_tasks()) {
    EXPECT_EQ(TaskRegistry::builtin().lookup(spec.token)->token, spec.token);
  }
}

TEST(BuildPrompt, BareTokenForTextFreeTasks) {
  auto od = *TaskRegistry::builtin().lookup("<OD>");
  auto prompt = build_prompt(od, "");
  EXPECT_EQ(prompt.text, "<OD>");
  EXPECT_FALSE(prompt.warning);
}

TEST(BuildPrompt, AppendsTextForConditionedTasks) {
  auto grounding = *TaskRegistry::builtin().lookup("<CAPTION_TO_PHRASE_GROUNDING>");
  EXPECT_EQ(build_prompt(grounding, "a red mug").text, "<CAPTION_TO_PHRASE_GROUNDING>a red mug");
  try {
    build_prompt(grounding, "");
    FAIL();
  } catch (const florence2_interfaces::Error& e) {
    EXPECT_EQ(e.code(), florence2_interfaces::ErrorCode::kMissingTextInput);
  }
}

TEST(BuildPrompt, DiscardsTextWithWarning) {
  auto od = *TaskRegistry::builtin().lookup("<OD>");
  auto prompt = build_prompt(od, "ignored");
  EXPECT_EQ(prompt.text, "<OD>");
  ASSERT_TRUE(prompt.warning);
  EXPECT_NE(prompt.warning->find("discarded"), std::string::npos);
}

TEST(BuildPrompt, IdentityForAllTextFreeTasks) {
  for (const auto& spec : TaskRegistry::builtin().list_tasks()) {
    if (!spec.requires_text_input) EXPECT_EQ(build_prompt(spec, "").text, spec.token);
  }
}
