#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "logic_orm/corpus.hpp"
#include "logic_orm/error.hpp"
#include "logic_orm/scorer.hpp"
#include "logic_orm/trajectory.hpp"
#include "logic_orm/util/io.hpp"
#include "logic_orm/util/parallel.hpp"

namespace logic_orm {

struct CandidateSet {
  Problem problem;
  std::vector<Trajectory> candidates;  // stored (sample index) order
};

inline void validate(const CandidateSet& set) {
  require(!set.candidates.empty(), "CandidateSet '" + set.problem.id + "' is empty");
  for (const auto& c : set.candidates) {
    require(c.problem_id == set.problem.id,
            "CandidateSet '" + set.problem.id + "' holds a candidate for '" + c.problem_id + "'");
  }
}

inline bool is_correct(const Trajectory& t, const Problem& p) {
  return t.extracted && *t.extracted == p.gold;
}

namespace detail {

inline void check_n(std::size_t available, int n, const std::string& id) {
  if (n < 1 || static_cast<std::size_t>(n) > available) {
    throw Error(ErrorKind::NotEnoughCandidates,
                "'" + id + "' has " + std::to_string(available) + " candidates, N=" +
                    std::to_string(n));
  }
}

}  // namespace detail

// Index of the maximal score; ties go to the lowest index.
inline std::size_t select_best(std::span<const double> scores) {
  require(!scores.empty(), "select_best: no scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

inline std::size_t best_of_n_index(const CandidateSet& set, const ScorerKind& scorer, int n) {
  detail::check_n(set.candidates.size(), n, set.problem.id);
  const auto first_n = std::span(set.candidates).first(static_cast<std::size_t>(n));
  return select_best(score_candidates(scorer, set.problem, first_n));
}

inline const Trajectory& best_of_n(const CandidateSet& set, const ScorerKind& scorer, int n) {
  return set.candidates[best_of_n_index(set, scorer, n)];
}

// Unparsed only wins when nothing else was extracted; ties resolve to the
// label whose first occurrence is earliest.
inline Extracted majority_vote(std::span<const Trajectory> candidates, int n) {
  detail::check_n(candidates.size(), n, candidates.empty() ? "" : candidates.front().problem_id);
  std::map<Label, int> counts;
  std::map<Label, std::size_t> first_seen;
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    if (!candidates[i].extracted) continue;
    const Label l = *candidates[i].extracted;
    if (counts[l]++ == 0) first_seen[l] = i;
  }
  Extracted winner;
  for (const auto& [label, count] : counts) {
    if (!winner || count > counts[*winner] ||
        (count == counts[*winner] && first_seen[label] < first_seen[*winner])) {
      winner = label;
    }
  }
  return winner;
}

inline Extracted majority_vote(const CandidateSet& set, int n) {
  return majority_vote(std::span<const Trajectory>(set.candidates), n);
}

inline int count_correct(const CandidateSet& set, int n) {
  detail::check_n(set.candidates.size(), n, set.problem.id);
  int correct = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    correct += is_correct(set.candidates[i], set.problem) ? 1 : 0;
  }
  return correct;
}

// Fraction of problems with at least one correct candidate among the first N.
inline double highest_threshold(std::span<const CandidateSet> sets, int n) {
  require(!sets.empty(), "highest_threshold: no candidate sets");
  long hit = 0;
  for (const auto& set : sets) hit += count_correct(set, n) > 0 ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(sets.size());
}

// Mean number of correct candidates among the first N.
inline double mv_frequency(std::span<const CandidateSet> sets, int n) {
  require(!sets.empty(), "mv_frequency: no candidate sets");
  long total = 0;
  for (const auto& set : sets) total += count_correct(set, n);
  return static_cast<double>(total) / static_cast<double>(sets.size());
}

struct EvalRow {
  int n = 0;
  double accuracy_bon = 0.0;
  double accuracy_majority = 0.0;
  double ht = 0.0;
  double mean_correct = 0.0;
};

struct EvalReport {
  std::string dataset;
  std::string reasoner_id;
  std::string scorer_label;
  std::string run_id;
  std::vector<EvalRow> rows;
};

struct EvalOptions {
  std::string dataset;
  std::string reasoner_id;
  std::string run_id;
  // When set, each candidate list is shuffled with this seed before the
  // first-N prefixes are taken.
  std::optional<std::uint64_t> subsample_seed;
  int workers = 1;
};

inline std::vector<CandidateSet> subsample(std::vector<CandidateSet> sets, std::uint64_t seed) {
  for (std::size_t s = 0; s < sets.size(); ++s) {
    std::mt19937_64 rng(digest::mix64(seed ^ digest::fnv1a64(sets[s].problem.id)));
    auto& c = sets[s].candidates;
    for (std::size_t i = c.size(); i > 1; --i) std::swap(c[i - 1], c[rng() % i]);
  }
  return sets;
}

inline EvalReport evaluate(std::vector<CandidateSet> sets, const ScorerKind& scorer,
                           std::vector<int> ns, const EvalOptions& options = {}) {
  require(!sets.empty(), "evaluate: no candidate sets");
  require(!ns.empty(), "evaluate: no N values");
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  for (const auto& set : sets) {
    validate(set);
    detail::check_n(set.candidates.size(), ns.back(), set.problem.id);
  }
  if (options.subsample_seed) sets = subsample(std::move(sets), *options.subsample_seed);

  // Scores for the longest prefix; every smaller N reuses them.
  const auto max_n = static_cast<std::size_t>(ns.back());
  std::vector<std::vector<double>> scores(sets.size());
  parallel_for(sets.size(), options.workers, [&](std::size_t i) {
    scores[i] = score_candidates(scorer, sets[i].problem,
                                 std::span(sets[i].candidates).first(max_n));
  });

  EvalReport report;
  report.dataset = options.dataset;
  report.reasoner_id = options.reasoner_id;
  report.scorer_label = scorer_label(scorer);
  report.run_id = options.run_id;
  const auto count = static_cast<double>(sets.size());
  for (int n : ns) {
    long bon = 0;
    long majority = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const auto& set = sets[i];
      const auto chosen =
          select_best(std::span(scores[i]).first(static_cast<std::size_t>(n)));
      bon += is_correct(set.candidates[chosen], set.problem) ? 1 : 0;
      const auto vote = majority_vote(set, n);
      majority += vote && *vote == set.problem.gold ? 1 : 0;
    }
    report.rows.push_back({n, static_cast<double>(bon) / count,
                           static_cast<double>(majority) / count, highest_threshold(sets, n),
                           mv_frequency(sets, n)});
  }
  return report;
}

// Groups a trajectory store into per-problem candidate lists, ordered by
// sample index, in corpus order. Problems without candidates are skipped.
inline std::vector<CandidateSet> build_candidate_sets(const Corpus& corpus,
                                                      std::vector<Trajectory> trajectories) {
  std::map<std::string, std::vector<Trajectory>> by_problem;
  for (auto& t : trajectories) {
    if (!corpus.find(t.problem_id)) {
      throw Error(ErrorKind::IdMismatch, "candidate for unknown problem '" + t.problem_id + "'");
    }
    by_problem[t.problem_id].push_back(std::move(t));
  }
  std::vector<CandidateSet> sets;
  for (const auto& problem : corpus.problems) {
    auto it = by_problem.find(problem.id);
    if (it == by_problem.end()) continue;
    auto& c = it->second;
    std::stable_sort(c.begin(), c.end(), [](const Trajectory& a, const Trajectory& b) {
      return a.sample_index < b.sample_index;
    });
    sets.push_back({problem, std::move(c)});
  }
  return sets;
}

// ---- report files ----

inline std::string report_jsonl(const EvalReport& report) {
  std::string out;
  for (const auto& row : report.rows) {
    json j{{"dataset", report.dataset},
           {"reasoner_id", report.reasoner_id},
           {"scorer", report.scorer_label},
           {"run_id", report.run_id},
           {"N", row.n},
           {"accuracy_bon", row.accuracy_bon},
           {"accuracy_majority", row.accuracy_majority},
           {"ht", row.ht},
           {"mean_correct", row.mean_correct}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

// One tab-separated "N<TAB>value" series per metric, with a header line.
inline std::map<std::string, std::string> plot_series(const EvalReport& report) {
  std::map<std::string, std::string> files;
  auto series = [&](const std::string& metric, double EvalRow::*field) {
    std::string out = "N\t" + metric + "\n";
    for (const auto& row : report.rows) {
      out += std::to_string(row.n) + "\t" + json(row.*field).dump() + "\n";
    }
    files[metric] = std::move(out);
  };
  series("accuracy_bon", &EvalRow::accuracy_bon);
  series("ht", &EvalRow::ht);
  series("accuracy_majority", &EvalRow::accuracy_majority);
  series("mean_correct", &EvalRow::mean_correct);
  return files;
}

inline std::string summary_table(const EvalReport& report) {
  std::string out = "dataset=" + report.dataset + " reasoner=" + report.reasoner_id +
                    " scorer=" + report.scorer_label + "\n";
  char line[128];
  std::snprintf(line, sizeof line, "%6s %12s %12s %8s %12s\n", "N", "best-of-N", "majority",
                "HT", "mean-correct");
  out += line;
  for (const auto& row : report.rows) {
    std::snprintf(line, sizeof line, "%6d %12.4f %12.4f %8.4f %12.4f\n", row.n,
                  row.accuracy_bon, row.accuracy_majority, row.ht, row.mean_correct);
    out += line;
  }
  return out;
}

}  // namespace logic_orm
