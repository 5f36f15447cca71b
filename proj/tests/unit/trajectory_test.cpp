#include <gtest/gtest.h>

#include <random>

#include "logic_orm/trajectory.hpp"
#include "test_support.hpp"

using namespace logic_orm;

namespace {
const OptionMap& abc() { return default_options(); }
}  // namespace

TEST(ExtractAnswer, BoxedKeyWithTrailingLabel) {
  EXPECT_EQ(extract_answer("...Final Answer: \\boxed{C} (Uncertain)", abc()), Label::Uncertain);
}

TEST(ExtractAnswer, LabelWord) {
  EXPECT_EQ(extract_answer("so \\boxed{True}", abc()), Label::True);
  EXPECT_EQ(extract_answer("so \\boxed{ false. }", abc()), Label::False);
}

TEST(ExtractAnswer, NoBoxIsUnparsed) {
  EXPECT_EQ(extract_answer("no box here", abc()), std::nullopt);
  EXPECT_EQ(extract_answer("", abc()), std::nullopt);
  EXPECT_EQ(extract_answer("\\boxed{A", abc()), std::nullopt);
}

TEST(ExtractAnswer, LastBoxWins) {
  EXPECT_EQ(extract_answer("\\boxed{B} ... later \\boxed{A}", abc()), Label::True);
}

TEST(ExtractAnswer, Composites) {
  EXPECT_EQ(extract_answer("\\boxed{C) Uncertain}", abc()), Label::Uncertain);
  EXPECT_EQ(extract_answer("\\boxed{(B) False}", abc()), Label::False);
  EXPECT_EQ(extract_answer("\\boxed{(a)}", abc()), Label::True);
  EXPECT_EQ(extract_answer("\\boxed{\\text{B}}", abc()), Label::False);
  // Halves that disagree are not an answer.
  EXPECT_EQ(extract_answer("\\boxed{A) False}", abc()), std::nullopt);
  EXPECT_EQ(extract_answer("\\boxed{maybe}", abc()), std::nullopt);
}

TEST(ExtractAnswer, DoubleBackslashAsPrintedByModels) {
  EXPECT_EQ(extract_answer("Final Answer: \\\\boxed{C} (Uncertain)", abc()), Label::Uncertain);
}

TEST(ExtractAnswer, UsesProblemOptionMap) {
  const OptionMap permuted = {{"A", Label::Uncertain}, {"B", Label::True}, {"C", Label::False}};
  EXPECT_EQ(extract_answer("\\boxed{A}", permuted), Label::Uncertain);
}

// Closure: the result is Unparsed or one of the option labels, whatever the
// input bytes.
TEST(ExtractAnswer, ClosureOnRandomText) {
  std::mt19937_64 rng(9);
  const std::string alphabet = "abcABC{}()\\ boxedTrueFalsUncrti.)";
  for (int i = 0; i < 5000; ++i) {
    std::string s = (rng() % 2) ? "\\boxed{" : "";
    const int len = static_cast<int>(rng() % 24);
    for (int k = 0; k < len; ++k) s.push_back(alphabet[rng() % alphabet.size()]);
    if (rng() % 2) s += "}";
    const Extracted e = extract_answer(s, abc());
    if (e) {
      bool found = false;
      for (const auto& [key, label] : abc()) found |= label == *e;
      EXPECT_TRUE(found);
    }
  }
}

TEST(AssignReward, FollowsGold) {
  Trajectory t;
  t.extracted = Label::True;
  EXPECT_EQ(assign_reward(t, Label::True).reward, Reward::Positive);
  EXPECT_EQ(assign_reward(t, Label::False).reward, Reward::Negative);
  t.extracted = std::nullopt;
  EXPECT_EQ(assign_reward(t, Label::False).reward, Reward::Negative);
}

TEST(AssignReward, SecondApplicationFails) {
  Trajectory t;
  t.extracted = Label::True;
  const Trajectory once = assign_reward(t, Label::True);
  EXPECT_ERROR_KIND(assign_reward(once, Label::True), ErrorKind::DoubleAssignment);
  t.reward = Reward::Negative;
  EXPECT_ERROR_KIND(assign_reward(t, Label::True), ErrorKind::DoubleAssignment);
}

TEST(AssignReward, PartitionHolds) {
  std::mt19937_64 rng(3);
  long positive = 0, negative = 0;
  const int total = 1000;
  for (int i = 0; i < total; ++i) {
    Trajectory t;
    const auto r = rng() % 4;
    if (r < 3) t.extracted = kAllLabels[r];
    const auto assigned = assign_reward(t, kAllLabels[rng() % 3]);
    (assigned.reward == Reward::Positive ? positive : negative)++;
    EXPECT_NE(assigned.reward, Reward::Unassigned);
  }
  EXPECT_EQ(positive + negative, total);
}

TEST(ParseJudge, Verdicts) {
  EXPECT_EQ(parse_judge("Correct"), JudgeVerdict::Correct);
  EXPECT_EQ(parse_judge(" incorrect."), JudgeVerdict::Incorrect);
  EXPECT_EQ(parse_judge("CORRECT!\n"), JudgeVerdict::Correct);
  EXPECT_EQ(parse_judge("Incorrect, the second step fails"), JudgeVerdict::Incorrect);
  EXPECT_EQ(parse_judge("The reasoning seems fine"), JudgeVerdict::Unparsed);
  EXPECT_EQ(parse_judge(""), JudgeVerdict::Unparsed);
  EXPECT_EQ(parse_judge("Correctly reasoned"), JudgeVerdict::Unparsed);
}

TEST(TrajectoryStore, RoundTrip) {
  std::vector<Trajectory> ts;
  for (int i = 0; i < 30; ++i) {
    Trajectory t;
    t.problem_id = "p" + std::to_string(i % 7);
    t.mode = i % 3 == 0 ? PromptMode::cot() : PromptMode::echo(kAllLabels[i % 3]);
    t.text = "line one\nline \"two\" \\boxed{A}";
    if (i % 5) t.extracted = kAllLabels[i % 3];
    t.reward = i % 2 ? Reward::Positive : Reward::Negative;
    t.generator_id = "gen";
    t.sample_index = i;
    ts.push_back(t);
  }
  const std::string jsonl = to_jsonl(ts);
  EXPECT_EQ(parse_trajectories(jsonl), ts);
  EXPECT_EQ(to_jsonl(parse_trajectories(jsonl)), jsonl);
}

TEST(TrajectoryStore, BadRecordReportsLine) {
  try {
    parse_trajectories("{\"problem_id\":\"p\"}\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MalformedRecord);
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(PromptMode, StringRoundTrip) {
  for (auto mode : {PromptMode::cot(), PromptMode::judge(), PromptMode::echo(Label::False)}) {
    EXPECT_EQ(parse_prompt_mode(to_string(mode)), mode);
  }
  EXPECT_FALSE(parse_prompt_mode("echo:Maybe"));
}
