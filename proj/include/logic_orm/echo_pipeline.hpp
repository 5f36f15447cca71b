#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "logic_orm/corpus.hpp"
#include "logic_orm/error.hpp"
#include "logic_orm/llm_gateway.hpp"
#include "logic_orm/prompting.hpp"
#include "logic_orm/trajectory.hpp"
#include "logic_orm/util/parallel.hpp"

namespace logic_orm {

struct PoolStats {
  long total = 0;
  long correct = 0;
  long incorrect = 0;
  long unparsed = 0;

  void add(const Trajectory& t) {
    require(t.reward != Reward::Unassigned, "PoolStats: unassigned reward");
    ++total;
    if (t.reward == Reward::Positive) {
      ++correct;
    } else {
      ++incorrect;
      if (!t.extracted) ++unparsed;
    }
  }

  friend bool operator==(const PoolStats&, const PoolStats&) = default;
};

inline PoolStats pool_stats(std::span<const Trajectory> trajectories) {
  PoolStats stats;
  for (const auto& t : trajectories) stats.add(t);
  return stats;
}

inline json to_json(const PoolStats& s) {
  return json{{"total", s.total},
              {"correct", s.correct},
              {"incorrect", s.incorrect},
              {"unparsed", s.unparsed}};
}

struct GenerationRunConfig {
  std::string corpus_name;
  std::string run_id;
  int n_samples_cot = 8;
  std::vector<Label> echo_labels{kAllLabels.begin(), kAllLabels.end()};
  std::uint64_t seed = 0;
  double temperature = kGenerationTemperature;
  double judge_temperature = kJudgeTemperature;
  int max_tokens = 1024;
};

inline void validate(const GenerationRunConfig& config) {
  require(config.n_samples_cot >= 1, "GenerationRunConfig: n_samples_cot must be >= 1");
  require(!config.echo_labels.empty(), "GenerationRunConfig: echo_labels is empty");
}

struct CotRun {
  std::vector<Trajectory> trajectories;
  PoolStats stats;
};

struct EchoRun {
  std::vector<Trajectory> trajectories;
  std::map<Label, PoolStats> stats_by_label;
};

struct FilterResult {
  std::vector<Trajectory> retained;
  std::vector<Trajectory> discarded;
  // Echoes whose answer matched gold; removed before judging.
  std::vector<Trajectory> dropped_positive;
  std::map<JudgeVerdict, long> verdicts;
};

struct EccotPool {
  std::vector<Trajectory> dataset;
  PoolStats stats;
};

namespace detail {

inline std::vector<Trajectory> to_trajectories(const Problem& problem,
                                               PromptMode mode,
                                               const std::string& generator_id,
                                               const std::vector<std::string>& texts) {
  std::vector<Trajectory> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    Trajectory t;
    t.problem_id = problem.id;
    t.mode = mode;
    t.text = texts[i];
    t.extracted = extract_answer(t.text, problem.options);
    t.generator_id = generator_id;
    t.sample_index = static_cast<int>(i);
    out.push_back(assign_reward(std::move(t), problem.gold));
  }
  return out;
}

inline std::vector<Trajectory> flatten_sorted(
    std::vector<std::vector<Trajectory>> parts) {
  std::vector<Trajectory> out;
  for (auto& part : parts) {
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  std::sort(out.begin(), out.end(), trajectory_order);
  return out;
}

inline auto trajectory_key(const Trajectory& t) {
  return std::tuple(t.problem_id, to_string(t.mode), t.generator_id, t.sample_index);
}

}  // namespace detail

inline CotRun run_cot(const GenerationRunConfig& config, const Corpus& corpus,
                      Gateway& generator) {
  validate(config);
  std::vector<std::vector<Trajectory>> parts(corpus.problems.size());
  parallel_for(corpus.problems.size(), generator.config().max_in_flight,
               [&](std::size_t i) {
                 const Problem& problem = corpus.problems[i];
                 GenRequest request;
                 request.messages = render_cot(problem);
                 request.n_samples = config.n_samples_cot;
                 request.temperature = config.temperature;
                 request.max_tokens = config.max_tokens;
                 request.seed = config.seed;
                 request.tag = "cot";
                 request.problem_id = problem.id;
                 parts[i] = detail::to_trajectories(problem, PromptMode::cot(),
                                                    generator.config().model_name,
                                                    generator.generate(request).texts);
               });
  CotRun run;
  run.trajectories = detail::flatten_sorted(std::move(parts));
  run.stats = pool_stats(run.trajectories);
  return run;
}

// One echo request per (problem, label); the sample count matches the CoT
// stage.
inline EchoRun run_echo(const GenerationRunConfig& config, const Corpus& corpus,
                        Gateway& generator) {
  validate(config);
  std::vector<Label> labels = config.echo_labels;
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());

  const std::size_t tasks = corpus.problems.size() * labels.size();
  std::vector<std::vector<Trajectory>> parts(tasks);
  parallel_for(tasks, generator.config().max_in_flight, [&](std::size_t task) {
    const Problem& problem = corpus.problems[task / labels.size()];
    const Label target = labels[task % labels.size()];
    GenRequest request;
    request.messages = render_echo(problem, target);
    request.n_samples = config.n_samples_cot;
    request.temperature = config.temperature;
    request.max_tokens = config.max_tokens;
    request.seed = config.seed;
    request.tag = "echo";
    request.problem_id = problem.id;
    parts[task] = detail::to_trajectories(problem, PromptMode::echo(target),
                                          generator.config().model_name,
                                          generator.generate(request).texts);
  });
  EchoRun run;
  run.trajectories = detail::flatten_sorted(std::move(parts));
  for (Label label : labels) run.stats_by_label[label] = PoolStats{};
  for (const auto& t : run.trajectories) run.stats_by_label[t.mode.target].add(t);
  return run;
}

// Keeps only flawed echoes the judge failed to flag: positives are dropped
// up front, then a verdict of Correct retains and anything else discards.
inline FilterResult filter_echoes(const std::vector<Trajectory>& echoes,
                                  const Corpus& corpus, Gateway& judge,
                                  const GenerationRunConfig& config) {
  FilterResult result;
  std::vector<const Trajectory*> to_judge;
  for (const auto& t : echoes) {
    require(t.mode.is_echo(), "filter_echoes: non-echo trajectory " + t.problem_id);
    require(t.reward != Reward::Unassigned,
            "filter_echoes: unassigned reward " + t.problem_id);
    if (t.reward == Reward::Positive) {
      result.dropped_positive.push_back(t);
    } else {
      to_judge.push_back(&t);
    }
  }

  std::vector<JudgeVerdict> verdicts(to_judge.size(), JudgeVerdict::Unparsed);
  parallel_for(to_judge.size(), judge.config().max_in_flight, [&](std::size_t i) {
    const Trajectory& t = *to_judge[i];
    const Problem* problem = corpus.find(t.problem_id);
    if (!problem) {
      throw Error(ErrorKind::IdMismatch, "echo for unknown problem '" + t.problem_id + "'");
    }
    if (text::trim(t.text).empty()) return;  // nothing to judge
    GenRequest request;
    request.messages = render_judge(*problem, t.text);
    request.n_samples = 1;
    request.temperature = config.judge_temperature;
    request.max_tokens = config.max_tokens;
    request.seed = config.seed;
    request.tag = "judge";
    request.problem_id = t.problem_id;
    verdicts[i] = parse_judge(judge.generate(request).texts.front());
  });

  for (std::size_t i = 0; i < to_judge.size(); ++i) {
    ++result.verdicts[verdicts[i]];
    if (verdicts[i] == JudgeVerdict::Correct) {
      result.retained.push_back(*to_judge[i]);
    } else {
      result.discarded.push_back(*to_judge[i]);
    }
  }
  return result;
}

inline EccotPool assemble_eccot(const std::vector<Trajectory>& cot,
                                const std::vector<Trajectory>& retained_echoes) {
  EccotPool pool;
  std::set<decltype(detail::trajectory_key(std::declval<Trajectory>()))> keys;
  auto add = [&](const Trajectory& t) {
    if (!keys.insert(detail::trajectory_key(t)).second) {
      throw Error(ErrorKind::DuplicateKey, t.problem_id + "/" + to_string(t.mode) +
                                               "/" + std::to_string(t.sample_index));
    }
    pool.dataset.push_back(t);
  };
  for (const auto& t : cot) add(t);
  for (const auto& t : retained_echoes) {
    require(t.reward == Reward::Negative,
            "assemble_eccot: retained echo is not a negative: " + t.problem_id);
    add(t);
  }
  pool.stats = pool_stats(pool.dataset);
  return pool;
}

}  // namespace logic_orm
