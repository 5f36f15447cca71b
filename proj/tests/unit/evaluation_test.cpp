#include <gtest/gtest.h>

#include <cmath>

#include "logic_orm/evaluation.hpp"
#include "logic_orm/fixtures.hpp"
#include "test_support.hpp"

using namespace logic_orm;

namespace {

Trajectory cand(const Problem& p, Extracted answer, int index) {
  Trajectory t;
  t.problem_id = p.id;
  t.mode = PromptMode::cot();
  t.text = "candidate " + std::to_string(index);
  t.extracted = answer;
  t.generator_id = "g";
  t.sample_index = index;
  return assign_reward(std::move(t), p.gold);
}

CandidateSet set_of(const Problem& p, std::vector<Extracted> answers) {
  CandidateSet s{p, {}};
  for (std::size_t i = 0; i < answers.size(); ++i) {
    s.candidates.push_back(cand(p, answers[i], static_cast<int>(i)));
  }
  return s;
}

Problem gold_true(const std::string& id) {
  Problem p = synth_corpus(1, 1, 2).problems[0];
  p.id = id;
  p.gold = Label::True;
  return p;
}

}  // namespace

TEST(SelectBest, TiesGoToLowestIndex) {
  const std::vector<double> s{0.2, 0.9, 0.9, 0.1};
  EXPECT_EQ(select_best(s), 1u);
  const std::vector<double> flat(5, 0.5);
  EXPECT_EQ(select_best(flat), 0u);
}

TEST(BestOfN, OnlyFirstNCount) {
  const auto set = set_of(gold_true("p"), {Label::False, Label::True, Label::True});
  EXPECT_EQ(best_of_n_index(set, OracleScorer{}, 1), 0u);
  EXPECT_EQ(best_of_n_index(set, OracleScorer{}, 3), 1u);
  EXPECT_ERROR_KIND(best_of_n(set, OracleScorer{}, 4), ErrorKind::NotEnoughCandidates);
  EXPECT_ERROR_KIND(best_of_n(set, OracleScorer{}, 0), ErrorKind::NotEnoughCandidates);
}

TEST(MajorityVote, CountsAndTies) {
  const Problem p = gold_true("p");
  EXPECT_EQ(majority_vote(set_of(p, {Label::False, Label::True, Label::True}), 3), Label::True);
  // Tie: the label seen first wins.
  EXPECT_EQ(majority_vote(set_of(p, {Label::False, Label::True}), 2), Label::False);
  EXPECT_EQ(majority_vote(set_of(p, {std::nullopt, Label::Uncertain, std::nullopt}), 3),
            Label::Uncertain);
  EXPECT_EQ(majority_vote(set_of(p, {std::nullopt, std::nullopt}), 2), std::nullopt);
}

TEST(HighestThreshold, WorkedExample) {
  const std::vector<CandidateSet> sets = {
      set_of(gold_true("a"), {Label::False, Label::True}),
      set_of(gold_true("b"), {Label::False, Label::False}),
      set_of(gold_true("c"), {Label::True, std::nullopt})};
  EXPECT_NEAR(highest_threshold(sets, 1), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(highest_threshold(sets, 2), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(mv_frequency(sets, 2), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(mv_frequency(sets, 1), 1.0 / 3.0, 1e-12);
}

TEST(Evaluate, OracleScorerReachesHighestThreshold) {
  const auto sets = fixtures::make_candidate_sets(200, 16, 0.3, 4, false);
  const auto report = evaluate(sets, OracleScorer{}, {1, 2, 4, 8, 16});
  for (const auto& row : report.rows) EXPECT_NEAR(row.accuracy_bon, row.ht, 1e-12) << row.n;
}

TEST(Evaluate, NoScorerBeatsHighestThresholdAndHtIsMonotone) {
  const auto sets = fixtures::make_candidate_sets(150, 16, 0.4, 8, true);
  const auto model = std::make_shared<const SurrogateModel>(
      train_surrogate(fixtures::make_planted_examples(300, 1), 2, 0.5, 1));
  for (const ScorerKind& scorer :
       std::vector<ScorerKind>{OracleScorer{}, RandomScorer{5}, SurrogateScorer{model}}) {
    const auto report = evaluate(sets, scorer, {1, 2, 4, 8, 16});
    double prev_ht = 0.0;
    for (const auto& row : report.rows) {
      EXPECT_LE(row.accuracy_bon, row.ht + 1e-12) << scorer_label(scorer) << " N=" << row.n;
      EXPECT_GE(row.ht, prev_ht);
      prev_ht = row.ht;
    }
  }
}

TEST(Evaluate, AtNOneEveryScorerAgrees) {
  const auto sets = fixtures::make_candidate_sets(100, 4, 0.5, 2, false);
  const double oracle = evaluate(sets, OracleScorer{}, {1}).rows[0].accuracy_bon;
  EXPECT_EQ(evaluate(sets, RandomScorer{9}, {1}).rows[0].accuracy_bon, oracle);
  EXPECT_EQ(evaluate(sets, OracleScorer{}, {1}).rows[0].ht, oracle);
}

TEST(Evaluate, SelectionInvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + rng() % 10);
    for (auto& x : s) x = static_cast<double>(rng() % 50) / 50.0;
    std::vector<double> t = s;
    for (auto& x : t) x = std::exp(3.0 * x) + 7.0;
    EXPECT_EQ(select_best(s), select_best(t));
  }
}

TEST(Evaluate, RowsSortedAndDeduplicated) {
  const auto sets = fixtures::make_candidate_sets(20, 8, 0.5, 1, false);
  const auto report = evaluate(sets, OracleScorer{}, {8, 2, 2, 1});
  ASSERT_EQ(report.rows.size(), 3u);
  EXPECT_EQ(report.rows[0].n, 1);
  EXPECT_EQ(report.rows[2].n, 8);
  EXPECT_ERROR_KIND(evaluate(sets, OracleScorer{}, {9}), ErrorKind::NotEnoughCandidates);
}

TEST(Evaluate, SubsampleIsDeterministic) {
  const auto sets = fixtures::make_candidate_sets(50, 8, 0.5, 3, false);
  EvalOptions options;
  options.subsample_seed = 17;
  const auto a = evaluate(sets, RandomScorer{1}, {1, 4}, options);
  const auto b = evaluate(sets, RandomScorer{1}, {1, 4}, options);
  EXPECT_EQ(report_jsonl(a), report_jsonl(b));
  // A full-length shuffle does not change HT at N = max.
  EXPECT_EQ(evaluate(sets, OracleScorer{}, {8}, options).rows[0].ht,
            evaluate(sets, OracleScorer{}, {8}).rows[0].ht);
}

TEST(BuildCandidateSets, GroupsInCorpusOrder) {
  const Corpus corpus = synth_corpus(1, 3, 2);
  std::vector<Trajectory> ts;
  for (int s = 2; s >= 0; --s) {
    ts.push_back(cand(corpus.problems[2], Label::True, s));
    ts.push_back(cand(corpus.problems[0], Label::True, s));
  }
  const auto sets = build_candidate_sets(corpus, ts);
  ASSERT_EQ(sets.size(), 2u);
  EXPECT_EQ(sets[0].problem.id, corpus.problems[0].id);
  EXPECT_EQ(sets[1].candidates[0].sample_index, 0);
  Trajectory stray = cand(gold_true("nope"), Label::True, 0);
  EXPECT_ERROR_KIND(build_candidate_sets(corpus, {stray}), ErrorKind::IdMismatch);
}

TEST(ReportFiles, PlotSeriesAndSummary) {
  const auto sets = fixtures::make_candidate_sets(10, 4, 0.5, 1, false);
  EvalOptions options;
  options.dataset = "synth";
  const auto report = evaluate(sets, OracleScorer{}, {1, 4}, options);
  const auto series = plot_series(report);
  ASSERT_EQ(series.count("accuracy_bon"), 1u);
  EXPECT_TRUE(series.at("ht").starts_with("N\tht\n1\t"));
  EXPECT_EQ(std::count(series.at("ht").begin(), series.at("ht").end(), '\n'), 3);
  EXPECT_NE(summary_table(report).find("scorer=oracle"), std::string::npos);
  const auto jsonl = report_jsonl(report);
  EXPECT_EQ(json::parse(jsonl.substr(0, jsonl.find('\n'))).at("N"), 1);
}
