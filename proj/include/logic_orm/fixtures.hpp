#pragma once

// Synthetic fixtures: scripted mock reasoners, planted-token training data
// and candidate pools with controlled correctness. Used by the test suites
// and by `logic_orm synth`.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "logic_orm/corpus.hpp"
#include "logic_orm/evaluation.hpp"
#include "logic_orm/llm_gateway.hpp"
#include "logic_orm/prompting.hpp"
#include "logic_orm/reward_export.hpp"
#include "logic_orm/trajectory.hpp"
#include "logic_orm/util/digest.hpp"

namespace logic_orm::fixtures {

inline constexpr std::string_view kPlantedMarker = "flibber";

// Deterministic uniform draw in (0, 1) keyed by (seed, a, b).
inline double keyed_unit(std::uint64_t seed, std::string_view a, std::uint64_t b) {
  return digest::to_unit_open(
      digest::mix64(digest::fnv1a64(a, digest::mix64(seed)) ^ digest::mix64(b + 1)));
}

inline Label other_label(Label gold, double u) {
  std::vector<Label> others;
  for (Label l : kAllLabels) {
    if (l != gold) others.push_back(l);
  }
  return others[u < 0.5 ? 0 : 1];
}

inline std::string reasoning_text(const Problem& problem, Label answer, int sample) {
  return "Step 1: Collect the premises about the subject.\n"
         "Step 2: Follow the chain of rules (attempt " +
         std::to_string(sample) + ").\nTherefore the statement is " +
         std::string(to_string(answer)) + ".\nFinal Answer: \\boxed{" +
         option_key_for(problem.options, answer) + "}";
}

// Whether sample `s` of `problem` is planted correct by make_reasoner_script.
inline bool planted_correct(std::uint64_t seed, const Problem& problem, int s,
                            double p_correct) {
  return keyed_unit(seed, problem.id, static_cast<std::uint64_t>(2 * s)) < p_correct;
}

// One rule per problem under `tag`: `samples` texts, each correct with
// probability p_correct (keyed on seed, problem id and sample index).
inline MockScript make_reasoner_script(const Corpus& corpus, int samples, double p_correct,
                                       std::uint64_t seed, const std::string& tag = "cot") {
  MockScript script;
  for (const auto& problem : corpus.problems) {
    MockRule rule;
    rule.tag = tag;
    rule.problem_id = problem.id;
    for (int s = 0; s < samples; ++s) {
      const Label answer =
          planted_correct(seed, problem, s, p_correct)
              ? problem.gold
              : other_label(problem.gold,
                            keyed_unit(seed, problem.id, static_cast<std::uint64_t>(2 * s + 1)));
      rule.texts.push_back(reasoning_text(problem, answer, s));
    }
    script.rules.push_back(std::move(rule));
  }
  return script;
}

// Judge verdict planted for the echo of `problem` toward `target`.
inline std::string planted_judge_reply(std::uint64_t seed, const Problem& problem, Label target) {
  const double u =
      keyed_unit(seed ^ 0x5eedULL, problem.id, static_cast<std::uint64_t>(target));
  if (u < 0.45) return "Correct";
  if (u < 0.85) return "Incorrect.";
  return "I cannot tell.";
}

// Reasoner for the CoT stage, a sycophantic echo responder that always boxes
// the suggested answer, and a judge with planted verdicts per (problem, echo
// target).
inline MockScript make_echo_fixture_script(const Corpus& corpus, int cot_samples,
                                           double p_correct, std::uint64_t seed) {
  MockScript script = make_reasoner_script(corpus, cot_samples, p_correct, seed, "cot");
  MockRule echo;
  echo.tag = "echo";
  echo.texts = {
      "Step 1: The premises point to the given answer.\nSo the statement must be "
      "${echo_label}.\nFinal Answer: \\boxed{${echo_key}}"};
  script.rules.push_back(std::move(echo));
  for (const auto& problem : corpus.problems) {
    for (Label target : kAllLabels) {
      MockRule judge;
      judge.tag = "judge";
      judge.problem_id = problem.id;
      judge.contains = "must be " + std::string(to_string(target)) + ".";
      judge.texts = {planted_judge_reply(seed, problem, target)};
      script.rules.push_back(std::move(judge));
    }
  }
  return script;
}

// ---- planted-token training data ----

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "premise", "rule",    "implies", "therefore", "chain",  "subject", "follows",
      "holds",   "given",   "clause",  "step",      "so",     "then",    "thus",
      "because", "every",   "thing",   "is",        "not",    "known",   "derive",
      "check",   "apply",   "consider", "we",       "see",    "that",    "claim",
      "state",   "the",     "answer",  "option",    "link",   "fact",    "path"};
  return words;
}

inline std::string filler_sentence(std::mt19937_64& rng, int words) {
  const auto& vocab = filler_words();
  std::string out;
  for (int i = 0; i < words; ++i) {
    if (i) out += ' ';
    out += vocab[rng() % vocab.size()];
  }
  return out;
}

// Response text whose only class signal is the marker token.
inline std::string planted_response(std::mt19937_64& rng, bool positive) {
  std::string text = filler_sentence(rng, 12 + static_cast<int>(rng() % 8));
  if (!positive) {
    text += " " + std::string(kPlantedMarker) + " " + filler_sentence(rng, 4);
  }
  text += ".";
  return text;
}

// Alternating +/- examples over a synthetic corpus.
inline std::vector<TrainingExample> make_planted_examples(int count, std::uint64_t seed) {
  const Corpus corpus = synth_corpus(seed, std::max(1, count / 4), 2);
  std::mt19937_64 rng(seed);
  std::vector<TrainingExample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const Problem& problem = corpus.problems[static_cast<std::size_t>(i) % corpus.problems.size()];
    const bool positive = i % 2 == 0;
    TrainingExample ex;
    ex.input_text = render_context(problem);
    ex.response_text = planted_response(rng, positive);
    ex.annotated_text = annotate(ex.response_text);
    ex.outcome = positive ? '+' : '-';
    ex.meta = {problem.id, "cot", "planted"};
    out.push_back(std::move(ex));
  }
  return out;
}

// ---- candidate pools ----

// Each candidate is correct with probability p_correct. With `plant_marker`
// set, every incorrect candidate carries the marker token.
inline std::vector<CandidateSet> make_candidate_sets(int count, int n, double p_correct,
                                                     std::uint64_t seed, bool plant_marker) {
  const Corpus corpus = synth_corpus(seed, count, 3);
  std::mt19937_64 rng(seed ^ 0xca11ab1eULL);
  std::vector<CandidateSet> sets;
  sets.reserve(corpus.problems.size());
  for (const auto& problem : corpus.problems) {
    CandidateSet set{problem, {}};
    for (int s = 0; s < n; ++s) {
      const bool correct = digest::to_unit_open(rng()) < p_correct;
      const Label answer = correct ? problem.gold : other_label(problem.gold, digest::to_unit_open(rng()));
      Trajectory t;
      t.problem_id = problem.id;
      t.mode = PromptMode::cot();
      t.text = reasoning_text(problem, answer, s);
      if (plant_marker) {
        t.text = planted_response(rng, correct) + "\n" + t.text;
      }
      t.extracted = extract_answer(t.text, problem.options);
      t.generator_id = "fixture";
      t.sample_index = s;
      set.candidates.push_back(assign_reward(std::move(t), problem.gold));
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

}  // namespace logic_orm::fixtures
