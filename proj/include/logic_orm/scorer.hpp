#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "logic_orm/corpus.hpp"
#include "logic_orm/error.hpp"
#include "logic_orm/prompting.hpp"
#include "logic_orm/reward_export.hpp"
#include "logic_orm/trajectory.hpp"
#include "logic_orm/util/digest.hpp"
#include "logic_orm/util/io.hpp"
#include "logic_orm/util/url.hpp"

namespace logic_orm {

// ---------------------------------------------------------------------------
// Hashed n-gram features.
//
// Text is lowercased and split on non-alphanumeric ASCII. Each n-gram
// (n = 1..3) of the input and of the candidate is hashed separately:
//   h = FNV-1a-64(namespace + "\x1f" + tok_1 + "\x1f" + ... + tok_n)
//   bucket = SplitMix64(h) mod 2^18
// with namespace "in" or "out". Features are binary and L2-normalized.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kFeatureBits = 18;
inline constexpr std::uint32_t kFeatureDim = 1u << kFeatureBits;
inline constexpr int kMaxNgram = 3;

using SparseFeatures = std::vector<std::pair<std::uint32_t, double>>;

namespace detail {

inline std::vector<std::string> feature_tokens(std::string_view s) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

inline void add_ngrams(std::string_view ns, std::string_view s,
                       std::vector<std::uint32_t>& buckets) {
  const auto tokens = feature_tokens(s);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::uint64_t h = digest::fnv1a64(ns);
    for (std::size_t n = 0; n < static_cast<std::size_t>(kMaxNgram) && i + n < tokens.size();
         ++n) {
      h = digest::fnv1a64("\x1f", h);
      h = digest::fnv1a64(tokens[i + n], h);
      buckets.push_back(static_cast<std::uint32_t>(digest::mix64(h) & (kFeatureDim - 1)));
    }
  }
}

}  // namespace detail

inline SparseFeatures featurize(std::string_view input, std::string_view candidate) {
  std::vector<std::uint32_t> buckets;
  detail::add_ngrams("in", input, buckets);
  detail::add_ngrams("out", candidate, buckets);
  std::sort(buckets.begin(), buckets.end());
  buckets.erase(std::unique(buckets.begin(), buckets.end()), buckets.end());
  SparseFeatures features;
  if (buckets.empty()) return features;
  const double value = 1.0 / std::sqrt(static_cast<double>(buckets.size()));
  features.reserve(buckets.size());
  for (auto b : buckets) features.emplace_back(b, value);
  return features;
}

struct TrainingMeta {
  int epochs = 0;
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
};

struct SurrogateModel {
  std::uint32_t feature_dim = kFeatureDim;
  std::vector<double> weights = std::vector<double>(kFeatureDim, 0.0);
  double bias = 0.0;
  TrainingMeta training_meta;

  double logit(const SparseFeatures& x) const {
    double z = bias;
    for (const auto& [i, v] : x) z += weights[i] * v;
    return z;
  }

  // Probability of a '+' outcome, strictly inside (0, 1).
  double predict(std::string_view input, std::string_view candidate) const {
    const double z = std::clamp(logit(featurize(input, candidate)), -30.0, 30.0);
    return 1.0 / (1.0 + std::exp(-z));
  }
};

// Plain SGD on the logistic loss. One shuffle per epoch, drawn from a single
// mt19937_64 stream seeded by `seed`.
inline SurrogateModel train_surrogate(const std::vector<TrainingExample>& examples, int epochs,
                                      double learning_rate, std::uint64_t seed) {
  const auto balance = class_balance(examples);
  if (balance.positive == 0 || balance.negative == 0) {
    throw Error(ErrorKind::SingleClassData,
                "need both outcomes, got +" + std::to_string(balance.positive) + " -" +
                    std::to_string(balance.negative));
  }
  require(epochs >= 1, "train_surrogate: epochs must be >= 1");
  require(learning_rate > 0.0, "train_surrogate: learning_rate must be > 0");

  std::vector<SparseFeatures> features;
  features.reserve(examples.size());
  for (const auto& ex : examples) features.push_back(featurize(ex.input_text, ex.response_text));

  SurrogateModel model;
  model.training_meta = {epochs, learning_rate, seed};
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    for (std::size_t idx : order) {
      const double z = std::clamp(model.logit(features[idx]), -30.0, 30.0);
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double y = examples[idx].outcome == '+' ? 1.0 : 0.0;
      const double g = learning_rate * (p - y);
      for (const auto& [i, v] : features[idx]) model.weights[i] -= g * v;
      model.bias -= g;
    }
  }
  return model;
}

inline json to_json(const SurrogateModel& m) {
  json weights = json::array();
  for (std::uint32_t i = 0; i < m.feature_dim; ++i) {
    if (m.weights[i] != 0.0) weights.push_back({i, m.weights[i]});
  }
  return json{{"feature_dim", m.feature_dim},
              {"bias", m.bias},
              {"weights", weights},
              {"training_meta",
               {{"epochs", m.training_meta.epochs},
                {"learning_rate", m.training_meta.learning_rate},
                {"seed", m.training_meta.seed}}}};
}

inline SurrogateModel surrogate_from_json(const json& j) {
  try {
    SurrogateModel m;
    m.feature_dim = j.at("feature_dim").get<std::uint32_t>();
    if (m.feature_dim != kFeatureDim) {
      throw Error(ErrorKind::MalformedRecord, "surrogate feature_dim mismatch");
    }
    m.bias = j.at("bias").get<double>();
    for (const auto& entry : j.at("weights")) {
      const auto i = entry.at(0).get<std::uint32_t>();
      if (i >= m.feature_dim) throw Error(ErrorKind::MalformedRecord, "weight index out of range");
      m.weights[i] = entry.at(1).get<double>();
    }
    const json& meta = j.at("training_meta");
    m.training_meta = {meta.at("epochs").get<int>(), meta.at("learning_rate").get<double>(),
                       meta.at("seed").get<std::uint64_t>()};
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("surrogate model: ") + e.what());
  }
}

inline void save_surrogate(const SurrogateModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, to_json(model).dump());
}

inline std::shared_ptr<const SurrogateModel> load_surrogate(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("surrogate model: ") + e.what());
  }
  return std::make_shared<const SurrogateModel>(surrogate_from_json(j));
}

// ---------------------------------------------------------------------------
// Remote scoring protocol: POST {base_url}/score
//   request  {"items": [{"context": ..., "candidate": ...}]}
//   response {"scores": [real]}      non-2xx carries {"error": ...}
// ---------------------------------------------------------------------------

struct ScoreItem {
  std::string context;
  std::string candidate;
};

inline std::vector<double> score_batch_remote(const std::string& base_url,
                                              const std::vector<ScoreItem>& items,
                                              int timeout_s = 60) {
  if (items.empty()) return {};
  json body{{"items", json::array()}};
  for (const auto& item : items) {
    body["items"].push_back({{"context", item.context}, {"candidate", item.candidate}});
  }
  const auto url = detail::split_url(base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout_s, 0);
  client.set_read_timeout(timeout_s, 0);
  auto res = client.Post(url.path + "/score", body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorKind::RemoteUnavailable,
                base_url + ": " + httplib::to_string(res.error()));
  }
  auto error_text = [&res]() -> std::string {
    try {
      return json::parse(res->body).at("error").get<std::string>();
    } catch (const json::exception&) {
      return res->body;
    }
  };
  if (res->status >= 500) {
    throw Error(ErrorKind::RemoteUnavailable,
                "HTTP " + std::to_string(res->status) + ": " + error_text());
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorKind::ProtocolViolation,
                "HTTP " + std::to_string(res->status) + ": " + error_text());
  }
  std::vector<double> scores;
  try {
    const json reply = json::parse(res->body);
    const json& raw = reply.at("scores");
    if (!raw.is_array()) throw Error(ErrorKind::ProtocolViolation, "scores is not an array");
    for (const auto& s : raw) {
      if (!s.is_number()) throw Error(ErrorKind::ProtocolViolation, "non-numeric score");
      const double v = s.get<double>();
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw Error(ErrorKind::ProtocolViolation, "score outside [0,1]");
      }
      scores.push_back(v);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ProtocolViolation, e.what());
  }
  if (scores.size() != items.size()) {
    throw Error(ErrorKind::ProtocolViolation,
                std::to_string(items.size()) + " items but " + std::to_string(scores.size()) +
                    " scores");
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Scorer kinds.
// ---------------------------------------------------------------------------

// Uses the gold label; a ceiling for plumbing checks, not a verifier.
struct OracleScorer {};

struct RandomScorer {
  std::uint64_t seed = 0;
};

struct SurrogateScorer {
  std::shared_ptr<const SurrogateModel> model;
};

struct RemoteScorer {
  std::string base_url;
  int timeout_s = 60;
};

using ScorerKind = std::variant<OracleScorer, RandomScorer, SurrogateScorer, RemoteScorer>;

inline std::string scorer_label(const ScorerKind& scorer) {
  struct Visitor {
    std::string operator()(const OracleScorer&) const { return "oracle"; }
    std::string operator()(const RandomScorer& s) const {
      return "random(" + std::to_string(s.seed) + ")";
    }
    std::string operator()(const SurrogateScorer&) const { return "surrogate"; }
    std::string operator()(const RemoteScorer& s) const { return "remote(" + s.base_url + ")"; }
  };
  return std::visit(Visitor{}, scorer);
}

inline double random_score(std::uint64_t seed, std::string_view problem_id,
                           std::string_view candidate) {
  std::uint64_t h = digest::fnv1a64(problem_id, digest::kFnvOffset ^ digest::mix64(seed));
  h = digest::mix64(h ^ digest::fnv1a64(candidate));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double score(const ScorerKind& scorer, const Problem& problem, std::string_view candidate,
                    const Extracted& extracted) {
  require(!candidate.empty(), "score: empty candidate");
  if (std::holds_alternative<OracleScorer>(scorer)) {
    return extracted && *extracted == problem.gold ? 1.0 : 0.0;
  }
  if (const auto* r = std::get_if<RandomScorer>(&scorer)) {
    return random_score(r->seed, problem.id, candidate);
  }
  if (const auto* s = std::get_if<SurrogateScorer>(&scorer)) {
    if (!s->model) throw Error(ErrorKind::ModelNotLoaded, "surrogate scorer has no model");
    return s->model->predict(render_context(problem), candidate);
  }
  const auto& remote = std::get<RemoteScorer>(scorer);
  return score_batch_remote(remote.base_url,
                            {{render_context(problem), std::string(candidate)}},
                            remote.timeout_s)
      .front();
}

// Scores a candidate list; remote scorers make one batched call. Empty
// candidate texts (nothing generated) score 0 without consulting the scorer.
inline std::vector<double> score_candidates(const ScorerKind& scorer, const Problem& problem,
                                            std::span<const Trajectory> candidates) {
  std::vector<double> scores(candidates.size(), 0.0);
  if (const auto* remote = std::get_if<RemoteScorer>(&scorer)) {
    std::vector<ScoreItem> items;
    std::vector<std::size_t> where;
    const std::string context = render_context(problem);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i].text.empty()) continue;
      items.push_back({context, candidates[i].text});
      where.push_back(i);
    }
    const auto remote_scores = score_batch_remote(remote->base_url, items, remote->timeout_s);
    for (std::size_t j = 0; j < where.size(); ++j) scores[where[j]] = remote_scores[j];
    return scores;
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].text.empty()) continue;
    scores[i] = score(scorer, problem, candidates[i].text, candidates[i].extracted);
  }
  return scores;
}

}  // namespace logic_orm
