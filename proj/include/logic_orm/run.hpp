#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "logic_orm/corpus.hpp"
#include "logic_orm/diversity.hpp"
#include "logic_orm/echo_pipeline.hpp"
#include "logic_orm/error.hpp"
#include "logic_orm/llm_gateway.hpp"
#include "logic_orm/scorer.hpp"
#include "logic_orm/util/digest.hpp"
#include "logic_orm/util/io.hpp"

namespace logic_orm {

namespace fs = std::filesystem;

struct ScorerConfig {
  std::string kind = "oracle";  // oracle | random | surrogate | remote
  std::uint64_t seed = 0;
  fs::path model;               // surrogate
  std::string base_url;         // remote
};

struct SurrogateConfig {
  int epochs = 5;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
};

struct EvaluationConfig {
  std::optional<fs::path> candidates;  // defaults to the run's cot.jsonl
  std::vector<int> ns = {1, 2, 4, 8};
  std::string dataset;
  std::string reasoner_id;
  std::optional<std::uint64_t> subsample_seed;
};

struct RunConfig {
  std::string run_id;
  fs::path output_dir;
  fs::path corpus_path;
  Schema corpus_schema = Schema::Canonical;
  BackendConfig generator;
  BackendConfig judge;
  GenerationRunConfig generation;
  ResampleConfig resample;
  BleuConfig bleu;
  SurrogateConfig surrogate;
  EvaluationConfig evaluation;
  ScorerConfig scorer;
  json raw;  // as written, before interpolation; goes into the manifest
};

namespace detail {

// Replaces ${NAME} with the environment value; unset variables are errors.
inline json interpolate_env(const json& node, const std::string& path) {
  if (node.is_string()) {
    std::string s = node.get<std::string>();
    std::string out;
    std::size_t pos = 0;
    while (true) {
      const auto open = s.find("${", pos);
      if (open == std::string::npos) break;
      const auto close = s.find('}', open);
      if (close == std::string::npos) break;
      const std::string name = s.substr(open + 2, close - open - 2);
      const char* value = std::getenv(name.c_str());
      if (!value) {
        throw Error::at_field(ErrorKind::ConfigInvalid, path,
                              "environment variable " + name + " is not set");
      }
      out += s.substr(pos, open - pos);
      out += value;
      pos = close + 1;
    }
    out += s.substr(pos);
    return out;
  }
  if (node.is_object()) {
    json out = json::object();
    for (const auto& [key, value] : node.items()) {
      out[key] = interpolate_env(value, path.empty() ? key : path + "." + key);
    }
    return out;
  }
  if (node.is_array()) {
    json out = json::array();
    for (std::size_t i = 0; i < node.size(); ++i) {
      out.push_back(interpolate_env(node[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
  }
  return node;
}

class ConfigReader {
 public:
  ConfigReader(const json& root, fs::path base) : root_(root), base_(std::move(base)) {}

  const json* find(const std::string& dotted) const {
    const json* node = &root_;
    std::size_t start = 0;
    while (start <= dotted.size()) {
      auto dot = dotted.find('.', start);
      if (dot == std::string::npos) dot = dotted.size();
      const std::string key = dotted.substr(start, dot - start);
      if (!node->is_object()) return nullptr;
      auto it = node->find(key);
      if (it == node->end() || it->is_null()) return nullptr;
      node = &*it;
      start = dot + 1;
    }
    return node;
  }

  template <typename T>
  T get(const std::string& field, T fallback) const {
    const json* node = find(field);
    if (!node) return fallback;
    try {
      return node->get<T>();
    } catch (const json::exception& e) {
      throw Error::at_field(ErrorKind::ConfigInvalid, field, e.what());
    }
  }

  template <typename T>
  T need(const std::string& field) const {
    if (!find(field)) throw Error::at_field(ErrorKind::ConfigInvalid, field, "missing");
    return get<T>(field, T{});
  }

  fs::path path(const std::string& field) const {
    return resolve(need<std::string>(field));
  }

  std::optional<fs::path> optional_path(const std::string& field) const {
    if (!find(field)) return std::nullopt;
    return resolve(get<std::string>(field, ""));
  }

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_ / p; }

 private:
  const json& root_;
  fs::path base_;
};

inline BackendConfig read_backend(const ConfigReader& r, const std::string& prefix) {
  BackendConfig b;
  const auto kind = r.get<std::string>(prefix + ".kind", "mock");
  if (kind == "mock") {
    b.kind = BackendKind::Mock;
    b.script_path = r.path(prefix + ".script").string();
    if (!fs::exists(b.script_path)) {
      throw Error::at_field(ErrorKind::ConfigInvalid, prefix + ".script",
                            "file not found: " + b.script_path);
    }
  } else if (kind == "http") {
    b.kind = BackendKind::Http;
    b.base_url = r.need<std::string>(prefix + ".base_url");
    b.api_key_env = r.get<std::string>(prefix + ".api_key_env", "");
  } else {
    throw Error::at_field(ErrorKind::ConfigInvalid, prefix + ".kind",
                          "expected 'mock' or 'http', got '" + kind + "'");
  }
  b.model_name = r.get<std::string>(prefix + ".model_name", kind == "mock" ? "mock" : "");
  if (b.model_name.empty()) {
    throw Error::at_field(ErrorKind::ConfigInvalid, prefix + ".model_name", "missing");
  }
  b.max_in_flight = r.get<int>(prefix + ".max_in_flight", 4);
  b.retry_limit = r.get<int>(prefix + ".retry_limit", 3);
  b.backoff_initial_ms = r.get<int>(prefix + ".backoff_initial_ms", 500);
  b.timeout_s = r.get<int>(prefix + ".timeout_s", 600);
  b.cache_dir = r.optional_path(prefix + ".cache_dir");
  if (b.max_in_flight < 1) {
    throw Error::at_field(ErrorKind::ConfigInvalid, prefix + ".max_in_flight", "must be >= 1");
  }
  if (b.retry_limit < 0) {
    throw Error::at_field(ErrorKind::ConfigInvalid, prefix + ".retry_limit", "must be >= 0");
  }
  return b;
}

}  // namespace detail

inline RunConfig parse_run_config(const json& raw, const fs::path& base_dir) {
  if (!raw.is_object()) throw Error::at_field(ErrorKind::ConfigInvalid, "", "not an object");
  const json resolved = detail::interpolate_env(raw, "");
  const detail::ConfigReader r(resolved, base_dir);
  RunConfig c;
  c.raw = raw;
  c.run_id = r.need<std::string>("run_id");
  if (c.run_id.empty()) throw Error::at_field(ErrorKind::ConfigInvalid, "run_id", "empty");
  c.output_dir = r.path("output_dir");

  c.corpus_path = r.path("corpus.path");
  if (!fs::exists(c.corpus_path)) {
    throw Error::at_field(ErrorKind::ConfigInvalid, "corpus.path",
                          "file not found: " + c.corpus_path.string());
  }
  const auto schema = r.get<std::string>("corpus.schema", "canonical");
  if (auto s = parse_schema(schema)) {
    c.corpus_schema = *s;
  } else {
    throw Error::at_field(ErrorKind::ConfigInvalid, "corpus.schema", "unknown '" + schema + "'");
  }

  c.generator = detail::read_backend(r, "generator");
  c.judge = r.find("judge") ? detail::read_backend(r, "judge") : c.generator;

  auto& g = c.generation;
  g.run_id = c.run_id;
  g.corpus_name = c.corpus_path.stem().string();
  g.n_samples_cot = r.get<int>("generation.n_samples_cot", 8);
  if (g.n_samples_cot < 1) {
    throw Error::at_field(ErrorKind::ConfigInvalid, "generation.n_samples_cot", "must be >= 1");
  }
  if (r.find("generation.echo_labels")) {
    g.echo_labels.clear();
    for (const auto& s : r.get<std::vector<std::string>>("generation.echo_labels", {})) {
      auto label = parse_label(s);
      if (!label) {
        throw Error::at_field(ErrorKind::ConfigInvalid, "generation.echo_labels",
                              "unknown label '" + s + "'");
      }
      g.echo_labels.push_back(*label);
    }
    if (g.echo_labels.empty()) {
      throw Error::at_field(ErrorKind::ConfigInvalid, "generation.echo_labels", "empty");
    }
  }
  g.temperature = r.get<double>("generation.temperature", kGenerationTemperature);
  g.judge_temperature = r.get<double>("generation.judge_temperature", kJudgeTemperature);
  g.max_tokens = r.get<int>("generation.max_tokens", 1024);
  g.seed = r.get<std::uint64_t>("generation.seed", 0);
  if (g.max_tokens < 16) {
    throw Error::at_field(ErrorKind::ConfigInvalid, "generation.max_tokens", "must be >= 16");
  }

  c.resample.alpha = r.get<double>("resample.alpha", 0.8);
  c.resample.beta = r.get<double>("resample.beta", 0.2);
  c.resample.k = r.get<std::size_t>("resample.k", 10'000);
  c.resample.seed = r.get<std::uint64_t>("resample.seed", 0);
  c.bleu.max_order = r.get<int>("resample.max_order", 4);
  c.bleu.smoothing_epsilon = r.get<double>("resample.smoothing_epsilon", 0.1);
  try {
    validate(c.resample);
    validate(c.bleu);
  } catch (const Error& e) {
    throw Error::at_field(ErrorKind::ConfigInvalid, "resample", e.what());
  }

  c.surrogate.epochs = r.get<int>("surrogate.epochs", 5);
  c.surrogate.learning_rate = r.get<double>("surrogate.learning_rate", 0.5);
  c.surrogate.seed = r.get<std::uint64_t>("surrogate.seed", 0);

  c.evaluation.candidates = r.optional_path("evaluation.candidates");
  c.evaluation.ns = r.get<std::vector<int>>("evaluation.Ns", {1, 2, 4, 8});
  for (int n : c.evaluation.ns) {
    if (n < 1) throw Error::at_field(ErrorKind::ConfigInvalid, "evaluation.Ns", "N must be >= 1");
  }
  c.evaluation.dataset = r.get<std::string>("evaluation.dataset", c.generation.corpus_name);
  c.evaluation.reasoner_id = r.get<std::string>("evaluation.reasoner_id", c.generator.model_name);
  if (r.find("evaluation.subsample_seed")) {
    c.evaluation.subsample_seed = r.get<std::uint64_t>("evaluation.subsample_seed", 0);
  }

  c.scorer.kind = r.get<std::string>("scorer.kind", "oracle");
  c.scorer.seed = r.get<std::uint64_t>("scorer.seed", 0);
  if (auto model = r.optional_path("scorer.model")) c.scorer.model = *model;
  c.scorer.base_url = r.get<std::string>("scorer.base_url", "");
  if (c.scorer.kind != "oracle" && c.scorer.kind != "random" && c.scorer.kind != "surrogate" &&
      c.scorer.kind != "remote") {
    throw Error::at_field(ErrorKind::ConfigInvalid, "scorer.kind",
                          "unknown '" + c.scorer.kind + "'");
  }
  if (c.scorer.kind == "remote" && c.scorer.base_url.empty()) {
    throw Error::at_field(ErrorKind::ConfigInvalid, "scorer.base_url", "missing");
  }
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  json raw;
  try {
    raw = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw Error::at_field(ErrorKind::ConfigInvalid, "", e.what());
  } catch (const Error& e) {
    throw Error::at_field(ErrorKind::ConfigInvalid, "", e.what());
  }
  return parse_run_config(raw, path.parent_path());
}

// ---------------------------------------------------------------------------
// Run directory: lock, artifacts, manifest.
// ---------------------------------------------------------------------------

// Exclusive per run directory; released on destruction.
class RunLock {
 public:
  explicit RunLock(const fs::path& output_dir) : path_(output_dir / "run.lock") {
    fs::create_directories(output_dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      throw Error(ErrorKind::RunLocked, "another stage holds " + path_.string());
    }
    std::fclose(f);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

inline std::string file_digest(const fs::path& path) {
  return digest::sha256_hex(io::read_file(path));
}

// Writes a stage output. An existing file must already hold identical bytes;
// anything else is an OutputConflict and leaves the file untouched.
inline std::string commit_artifact(const fs::path& path, std::string_view content) {
  const std::string digest = digest::sha256_hex(content);
  if (fs::exists(path)) {
    const std::string existing = file_digest(path);
    if (existing != digest) {
      throw Error(ErrorKind::OutputConflict,
                  path.string() + " exists with digest " + existing + ", rerun produced " + digest);
    }
    return digest;
  }
  io::write_file_atomic(path, content);
  return digest;
}

class Manifest {
 public:
  explicit Manifest(const RunConfig& config) : path_(config.output_dir / "manifest.json") {
    if (fs::exists(path_)) {
      try {
        doc_ = json::parse(io::read_file(path_));
      } catch (const json::parse_error& e) {
        throw Error(ErrorKind::MalformedRecord, "manifest: " + std::string(e.what()));
      }
    }
    doc_["run_id"] = config.run_id;
    doc_["config"] = config.raw;
    doc_["config_digest"] = digest::sha256_hex(config.raw.dump());
    doc_["sampling"] = {{"generation_temperature", config.generation.temperature},
                        {"judge_temperature", config.generation.judge_temperature},
                        {"max_tokens", config.generation.max_tokens},
                        {"seed", config.generation.seed}};
    if (!doc_.contains("stages")) doc_["stages"] = json::object();
  }

  json& stage(const std::string& name) { return doc_["stages"][name]; }
  const json& doc() const { return doc_; }

  void save() const { io::write_file_atomic(path_, doc_.dump(2) + "\n"); }

 private:
  fs::path path_;
  json doc_;
};

inline json gateway_stats_json(const Gateway& gateway) {
  const auto s = gateway.stats();
  return json{{"backend_id", gateway.backend_id()},
              {"requests", s.requests},
              {"cached", s.cache_hits},
              {"backend_calls", s.backend_calls},
              {"retries", s.retries}};
}

inline ScorerKind make_scorer(const ScorerConfig& config) {
  if (config.kind == "random") return RandomScorer{config.seed};
  if (config.kind == "surrogate") {
    if (config.model.empty()) {
      throw Error::at_field(ErrorKind::ConfigInvalid, "scorer.model", "missing");
    }
    if (!fs::exists(config.model)) {
      throw Error(ErrorKind::ModelNotLoaded, "no model at " + config.model.string());
    }
    return SurrogateScorer{load_surrogate(config.model)};
  }
  if (config.kind == "remote") return RemoteScorer{config.base_url};
  return OracleScorer{};
}

}  // namespace logic_orm
