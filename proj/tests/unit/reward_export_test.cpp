#include <gtest/gtest.h>

#include <random>

#include "logic_orm/reward_export.hpp"
#include "logic_orm/util/text.hpp"
#include "test_support.hpp"

using namespace logic_orm;

namespace {

Trajectory traj(const Problem& p, Reward reward, std::string text = "Step 1. \\boxed{A}") {
  Trajectory t;
  t.problem_id = p.id;
  t.mode = PromptMode::cot();
  t.text = std::move(text);
  t.extracted = Label::True;
  t.reward = reward;
  t.generator_id = "g";
  return t;
}

}  // namespace

TEST(ToTrainingExample, AnnotatesAndMapsOutcome) {
  const Problem p = synth_corpus(1, 1, 2).problems[0];
  const auto pos = to_training_example(traj(p, Reward::Positive), p, "run");
  EXPECT_EQ(pos.outcome, '+');
  EXPECT_EQ(pos.annotated_text, "Step 1. \\boxed{A} <extra_0>");
  EXPECT_EQ(pos.input_text, render_context(p));
  EXPECT_EQ(pos.meta.mode, "cot");
  EXPECT_EQ(to_training_example(traj(p, Reward::Negative), p, "run").outcome, '-');
}

TEST(ToTrainingExample, Errors) {
  const Corpus c = synth_corpus(1, 2, 2);
  const Problem& p = c.problems[0];
  EXPECT_ERROR_KIND(to_training_example(traj(p, Reward::Unassigned), p, "r"),
                    ErrorKind::UnassignedReward);
  EXPECT_ERROR_KIND(to_training_example(traj(p, Reward::Positive), c.problems[1], "r"),
                    ErrorKind::IdMismatch);
  EXPECT_ERROR_KIND(to_training_example(traj(p, Reward::Positive, "has <extra_0> inside"), p, "r"),
                    ErrorKind::StepTagCollision);
  Corpus other = synth_corpus(2, 1, 2);
  EXPECT_ERROR_KIND(to_training_examples({traj(p, Reward::Positive)}, other, "r"),
                    ErrorKind::IdMismatch);
}

TEST(ExportImport, RoundTripThousandExamples) {
  testing_support::TempDir dir;
  const Corpus c = synth_corpus(3, 50, 3);
  std::mt19937_64 rng(1);
  std::vector<Trajectory> pool;
  for (int i = 0; i < 1000; ++i) {
    const Problem& p = c.problems[static_cast<std::size_t>(i) % c.problems.size()];
    pool.push_back(traj(p, rng() % 3 ? Reward::Positive : Reward::Negative,
                        "line \"" + std::to_string(i) + "\"\n\\boxed{B}\té"));
  }
  const auto examples = to_training_examples(pool, c, "run-1");
  EXPECT_EQ(export_examples(examples, dir / "train.jsonl"), 1000u);
  const auto back = import_examples(dir / "train.jsonl");
  ASSERT_EQ(back.size(), examples.size());
  EXPECT_EQ(back, examples);
  for (const auto& ex : back) {
    EXPECT_EQ(text::count_occurrences(ex.annotated_text, kStepTag), 1u);
    EXPECT_TRUE(ex.annotated_text.ends_with(kStepTag));
  }
  EXPECT_EQ(class_balance(back), class_balance(examples));
}

TEST(ExportImport, EmptyList) {
  testing_support::TempDir dir;
  EXPECT_EQ(export_examples({}, dir / "empty.jsonl"), 0u);
  EXPECT_TRUE(import_examples(dir / "empty.jsonl").empty());
}

TEST(ExportImport, MissingOutcomeReportsLine) {
  const Problem p = synth_corpus(1, 1, 2).problems[0];
  json j = to_json(to_training_example(traj(p, Reward::Positive), p, "r"));
  const std::string good = j.dump();
  j.erase("outcome");
  try {
    parse_training_examples(good + "\n" + j.dump() + "\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MalformedRecord);
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ExportImport, RejectsBadTagsAndOutcomes) {
  const Problem p = synth_corpus(1, 1, 2).problems[0];
  json j = to_json(to_training_example(traj(p, Reward::Positive), p, "r"));
  json two_tags = j;
  two_tags["annotated_text"] = "x <extra_0> <extra_0>";
  EXPECT_ERROR_KIND(parse_training_examples(two_tags.dump()), ErrorKind::MalformedRecord);
  json no_tag = j;
  no_tag["annotated_text"] = "x";
  EXPECT_ERROR_KIND(parse_training_examples(no_tag.dump()), ErrorKind::MalformedRecord);
  json bad_outcome = j;
  bad_outcome["outcome"] = "?";
  EXPECT_ERROR_KIND(parse_training_examples(bad_outcome.dump()), ErrorKind::MalformedRecord);
}

TEST(ClassBalanceTest, Counts) {
  const Problem p = synth_corpus(1, 1, 2).problems[0];
  std::vector<TrainingExample> ex;
  for (int i = 0; i < 7; ++i) {
    ex.push_back(to_training_example(traj(p, i < 4 ? Reward::Positive : Reward::Negative), p, "r"));
  }
  EXPECT_EQ(class_balance(ex), (ClassBalance{4, 3}));
}
