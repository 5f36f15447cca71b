#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "logic_orm/error.hpp"
#include "logic_orm/trajectory.hpp"
#include "logic_orm/util/digest.hpp"
#include "logic_orm/util/text.hpp"

namespace logic_orm {

// Sentence-level BLEU: whitespace tokens, case preserved, clipped
// multi-reference counts, zero precisions replaced by epsilon/total,
// brevity penalty against the closest reference length (shorter on ties).
struct BleuConfig {
  int max_order = 4;
  double smoothing_epsilon = 0.1;
};

inline void validate(const BleuConfig& cfg) {
  require(cfg.max_order >= 1, "BleuConfig: max_order must be >= 1");
  require(cfg.smoothing_epsilon > 0.0, "BleuConfig: smoothing_epsilon must be > 0");
}

namespace detail {

using NgramCounts = std::map<std::vector<std::string_view>, int>;

inline NgramCounts count_ngrams(const std::vector<std::string>& tokens, int n) {
  NgramCounts counts;
  const auto len = static_cast<int>(tokens.size());
  for (int i = 0; i + n <= len; ++i) {
    std::vector<std::string_view> gram(tokens.begin() + i, tokens.begin() + i + n);
    ++counts[std::move(gram)];
  }
  return counts;
}

}  // namespace detail

inline double bleu(std::string_view hypothesis,
                   std::span<const std::string> references,
                   const BleuConfig& cfg = {}) {
  validate(cfg);
  if (references.empty()) throw Error(ErrorKind::EmptyReferences, "bleu");
  const auto hyp = text::split_whitespace(hypothesis);
  if (hyp.empty()) return 0.0;
  std::vector<std::vector<std::string>> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back(text::split_whitespace(r));

  double log_sum = 0.0;
  for (int n = 1; n <= cfg.max_order; ++n) {
    const auto hyp_counts = detail::count_ngrams(hyp, n);
    detail::NgramCounts max_ref;
    for (const auto& ref : refs) {
      for (const auto& [gram, c] : detail::count_ngrams(ref, n)) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, c);
      }
    }
    long matched = 0;
    for (const auto& [gram, c] : hyp_counts) {
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) matched += std::min(c, it->second);
    }
    const long total = std::max<long>(static_cast<long>(hyp.size()) - n + 1, 0);
    const double precision =
        matched > 0 ? static_cast<double>(matched) / static_cast<double>(total)
                    : cfg.smoothing_epsilon / static_cast<double>(std::max<long>(total, 1));
    log_sum += std::log(precision);
  }

  const auto c = static_cast<long>(hyp.size());
  long r = static_cast<long>(refs.front().size());
  for (const auto& ref : refs) {
    const auto len = static_cast<long>(ref.size());
    const long d = std::labs(len - c);
    const long best = std::labs(r - c);
    if (d < best || (d == best && len < r)) r = len;
  }
  const double bp =
      c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return bp * std::exp(log_sum / cfg.max_order);
}

// Mean over members of bleu(member, rest of group).
inline double self_bleu(std::span<const std::string> group, const BleuConfig& cfg = {}) {
  if (group.size() < 2) {
    throw Error(ErrorKind::GroupTooSmall,
                "self_bleu needs >= 2 members, got " + std::to_string(group.size()));
  }
  double sum = 0.0;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < group.size(); ++i) {
    rest.clear();
    for (std::size_t j = 0; j < group.size(); ++j) {
      if (j != i) rest.push_back(group[j]);
    }
    sum += bleu(group[i], rest, cfg);
  }
  return sum / static_cast<double>(group.size());
}

// P = 1 - rank/|G| with ascending 1-based ordinal ranks; ties are ranked by
// id so the lexicographically smallest id gets the lowest rank.
inline std::map<std::string, double> percentile_ranks(
    std::vector<std::pair<std::string, double>> group) {
  require(!group.empty(), "percentile_ranks: empty group");
  std::sort(group.begin(), group.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  std::map<std::string, double> out;
  const auto size = static_cast<double>(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const bool fresh =
        out.emplace(group[i].first, 1.0 - static_cast<double>(i + 1) / size).second;
    require(fresh, "percentile_ranks: duplicate id '" + group[i].first + "'");
  }
  return out;
}

// W = 1 - (f - f_min)/(f_max - f_min); all 1.0 when f_min == f_max.
inline std::map<std::string, double> frequency_weights(
    const std::map<std::string, long>& counts) {
  require(!counts.empty(), "frequency_weights: empty counts");
  long lo = std::numeric_limits<long>::max();
  long hi = std::numeric_limits<long>::min();
  for (const auto& [id, f] : counts) {
    require(f >= 1, "frequency_weights: count < 1 for '" + id + "'");
    lo = std::min(lo, f);
    hi = std::max(hi, f);
  }
  std::map<std::string, double> out;
  for (const auto& [id, f] : counts) {
    out[id] = hi == lo ? 1.0
                       : 1.0 - static_cast<double>(f - lo) / static_cast<double>(hi - lo);
  }
  return out;
}

struct ResampleConfig {
  double alpha = 0.8;
  double beta = 0.2;
  std::size_t k = 10'000;
  std::uint64_t seed = 0;
};

inline void validate(const ResampleConfig& cfg) {
  require(cfg.alpha >= 0.0 && cfg.beta >= 0.0, "ResampleConfig: alpha, beta must be >= 0");
  require(cfg.alpha + cfg.beta > 0.0, "ResampleConfig: alpha + beta must be > 0");
  require(cfg.k >= 1, "ResampleConfig: k must be >= 1");
}

inline double combine_weight(double percentile, double freq_weight,
                             const ResampleConfig& cfg) {
  return cfg.alpha * percentile + cfg.beta * freq_weight;
}

// Efraimidis-Spirakis: item i gets key log(u_i)/w_i and the k largest keys
// win. Zero-weight items rank after every positive-weight item, among
// themselves by a second uniform draw. Returns indices in selection order.
inline std::vector<std::size_t> weighted_sample_without_replacement(
    std::span<const double> weights, std::size_t k, std::uint64_t seed) {
  struct Keyed {
    bool positive;
    double key;
    double tie;
    std::size_t index;
  };
  std::mt19937_64 rng(seed);
  std::vector<Keyed> keyed;
  keyed.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(weights[i] >= 0.0 && std::isfinite(weights[i]),
            "weighted sampling: weights must be finite and >= 0");
    const double u = digest::to_unit_open(rng());
    const double v = digest::to_unit_open(rng());
    const bool positive = weights[i] > 0.0;
    keyed.push_back({positive, positive ? std::log(u) / weights[i] : 0.0, v, i});
  }
  const std::size_t take = std::min(k, keyed.size());
  std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(take),
                    keyed.end(), [](const Keyed& a, const Keyed& b) {
                      if (a.positive != b.positive) return a.positive;
                      if (a.positive && a.key != b.key) return a.key > b.key;
                      if (a.tie != b.tie) return a.tie > b.tie;
                      return a.index < b.index;
                    });
  std::vector<std::size_t> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(keyed[i].index);
  return out;
}

struct EchoHypothesis {
  Trajectory trajectory;
  std::string hyp_id;
  std::string record_id;  // shared input (problem id)
  double bleu = 0.0;
  double percentile = 0.0;
  double freq_weight = 0.0;
  double weight = 0.0;
};

inline std::string hypothesis_id(const Trajectory& t) {
  return t.problem_id + "|" + to_string(t.mode) + "|" + t.generator_id + "|" +
         std::to_string(t.sample_index);
}

// Scores each echo against the CoT texts of its own problem, then fills the
// group-wise percentile and the record frequency weight.
inline std::vector<EchoHypothesis> score_echo_hypotheses(
    const std::vector<Trajectory>& echoes, const std::vector<Trajectory>& cot,
    const BleuConfig& cfg = {}) {
  std::map<std::string, std::vector<std::string>> references;
  for (const auto& t : cot) references[t.problem_id].push_back(t.text);

  std::vector<EchoHypothesis> hyps;
  hyps.reserve(echoes.size());
  std::map<std::string, std::vector<std::pair<std::string, double>>> groups;
  std::map<std::string, long> frequency;
  for (const auto& t : echoes) {
    auto it = references.find(t.problem_id);
    if (it == references.end()) {
      throw Error(ErrorKind::EmptyReferences, "no CoT references for '" + t.problem_id + "'");
    }
    EchoHypothesis h;
    h.trajectory = t;
    h.hyp_id = hypothesis_id(t);
    h.record_id = t.problem_id;
    h.bleu = bleu(t.text, it->second, cfg);
    groups[h.record_id].emplace_back(h.hyp_id, h.bleu);
    ++frequency[h.record_id];
    hyps.push_back(std::move(h));
  }
  if (hyps.empty()) return hyps;

  std::map<std::string, double> percentile;
  for (auto& [record, group] : groups) percentile.merge(percentile_ranks(std::move(group)));
  const auto freq = frequency_weights(frequency);
  for (auto& h : hyps) {
    h.percentile = percentile.at(h.hyp_id);
    h.freq_weight = freq.at(h.record_id);
  }
  return hyps;
}

// Sets `weight` on every hypothesis in place, then draws min(k, |hyps|)
// without replacement. Returned in selection order.
inline std::vector<EchoHypothesis> combine_and_resample(std::vector<EchoHypothesis>& hyps,
                                                        const ResampleConfig& cfg) {
  validate(cfg);
  std::vector<double> weights;
  weights.reserve(hyps.size());
  for (auto& h : hyps) {
    h.weight = combine_weight(h.percentile, h.freq_weight, cfg);
    weights.push_back(h.weight);
  }
  std::vector<EchoHypothesis> selected;
  for (std::size_t i : weighted_sample_without_replacement(weights, cfg.k, cfg.seed)) {
    selected.push_back(hyps[i]);
  }
  return selected;
}

inline std::string weight_audit_jsonl(const std::vector<EchoHypothesis>& hyps,
                                      const std::vector<EchoHypothesis>& selected) {
  std::set<std::string> chosen;
  for (const auto& h : selected) chosen.insert(h.hyp_id);
  std::string out;
  for (const auto& h : hyps) {
    json j{{"hyp_id", h.hyp_id},
           {"record_id", h.record_id},
           {"bleu", h.bleu},
           {"percentile", h.percentile},
           {"freq_weight", h.freq_weight},
           {"weight", h.weight},
           {"selected", chosen.count(h.hyp_id) > 0}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace logic_orm
