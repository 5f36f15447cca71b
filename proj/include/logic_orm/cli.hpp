#pragma once

#include <iostream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "logic_orm/corpus.hpp"
#include "logic_orm/diversity.hpp"
#include "logic_orm/echo_pipeline.hpp"
#include "logic_orm/error.hpp"
#include "logic_orm/evaluation.hpp"
#include "logic_orm/fixtures.hpp"
#include "logic_orm/llm_gateway.hpp"
#include "logic_orm/reward_export.hpp"
#include "logic_orm/run.hpp"
#include "logic_orm/scorer.hpp"
#include "logic_orm/trajectory.hpp"

namespace logic_orm::cli {

namespace fs = std::filesystem;

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {
      "synth",  "gen-cot",         "gen-echo",    "judge-filter", "resample",
      "export", "train-surrogate", "score-check", "evaluate",     "report"};
  return names;
}

// Stage files inside the run directory.
namespace files {
inline constexpr const char* kCot = "cot.jsonl";
inline constexpr const char* kEchoRaw = "echo_raw.jsonl";
inline constexpr const char* kEchoRetained = "echo_retained.jsonl";
inline constexpr const char* kEchoDiscarded = "echo_discarded.jsonl";
inline constexpr const char* kEchoDroppedPositive = "echo_dropped_positive.jsonl";
inline constexpr const char* kEccot = "eccot.jsonl";
inline constexpr const char* kEchoResampled = "echo_resampled.jsonl";
inline constexpr const char* kEccotResampled = "eccot_resampled.jsonl";
inline constexpr const char* kWeightAudit = "weights_audit.jsonl";
inline constexpr const char* kSurrogate = "surrogate.json";
}  // namespace files

namespace detail {

struct Stage {
  const RunConfig& config;
  Manifest manifest;
  json& entry;

  Stage(const RunConfig& c, const std::string& name)
      : config(c), manifest(c), entry(manifest.stage(name)) {
    entry = json::object();
    entry["inputs"] = json::object();
    entry["outputs"] = json::object();
  }

  fs::path path(const std::string& name) const { return config.output_dir / name; }

  std::string input(const fs::path& p) {
    if (!fs::exists(p)) throw Error(ErrorKind::IoFailure, "missing input " + p.string());
    std::string content = io::read_file(p);
    entry["inputs"][p.string()] = digest::sha256_hex(content);
    return content;
  }

  void output(const std::string& name, std::string_view content) {
    entry["outputs"][name] = commit_artifact(path(name), content);
  }

  void finish() {
    entry["completed"] = true;
    manifest.save();
  }
};

inline Corpus stage_corpus(Stage& stage) {
  return parse_corpus(stage.input(stage.config.corpus_path), stage.config.corpus_schema,
                      stage.config.corpus_path.stem().string());
}

inline std::vector<Trajectory> stage_trajectories(Stage& stage, const fs::path& p) {
  return parse_trajectories(stage.input(p));
}

inline void print_stats(std::ostream& out, const std::string& name, const PoolStats& s) {
  char line[160];
  std::snprintf(line, sizeof line, "%-24s total=%ld correct=%ld incorrect=%ld unparsed=%ld\n",
                name.c_str(), s.total, s.correct, s.incorrect, s.unparsed);
  out << line;
}

inline int gen_cot(const RunConfig& config, std::ostream& out) {
  RunLock lock(config.output_dir);
  Stage stage(config, "gen-cot");
  const Corpus corpus = stage_corpus(stage);
  auto gateway = make_gateway(config.generator);
  const auto run = run_cot(config.generation, corpus, *gateway);
  stage.output(files::kCot, to_jsonl(run.trajectories));
  stage.entry["stats"] = to_json(run.stats);
  stage.entry["gateway"] = gateway_stats_json(*gateway);
  stage.finish();
  print_stats(out, "cot", run.stats);
  out << "cached " << gateway->stats().cache_hits << "/" << gateway->stats().requests
      << " requests\n";
  return 0;
}

inline int gen_echo(const RunConfig& config, std::ostream& out) {
  RunLock lock(config.output_dir);
  Stage stage(config, "gen-echo");
  const Corpus corpus = stage_corpus(stage);
  auto gateway = make_gateway(config.generator);
  const auto run = run_echo(config.generation, corpus, *gateway);
  stage.output(files::kEchoRaw, to_jsonl(run.trajectories));
  json per_label = json::object();
  for (const auto& [label, stats] : run.stats_by_label) {
    per_label[std::string(to_string(label))] = to_json(stats);
    print_stats(out, "echo " + std::string(to_string(label)), stats);
  }
  stage.entry["stats"] = per_label;
  stage.entry["gateway"] = gateway_stats_json(*gateway);
  stage.finish();
  return 0;
}

inline int judge_filter(const RunConfig& config, std::ostream& out) {
  RunLock lock(config.output_dir);
  Stage stage(config, "judge-filter");
  const Corpus corpus = stage_corpus(stage);
  const auto cot = stage_trajectories(stage, stage.path(files::kCot));
  const auto echoes = stage_trajectories(stage, stage.path(files::kEchoRaw));
  auto judge = make_gateway(config.judge);
  const auto filtered = filter_echoes(echoes, corpus, *judge, config.generation);
  const auto pool = assemble_eccot(cot, filtered.retained);
  stage.output(files::kEchoRetained, to_jsonl(filtered.retained));
  stage.output(files::kEchoDiscarded, to_jsonl(filtered.discarded));
  stage.output(files::kEchoDroppedPositive, to_jsonl(filtered.dropped_positive));
  stage.output(files::kEccot, to_jsonl(pool.dataset));
  json verdicts = json::object();
  for (const auto& [verdict, count] : filtered.verdicts) {
    verdicts[std::string(to_string(verdict))] = count;
  }
  const auto cot_stats = pool_stats(cot);
  stage.entry["stats"] = {{"cot", to_json(cot_stats)},
                          {"eccot", to_json(pool.stats)},
                          {"retained", filtered.retained.size()},
                          {"discarded", filtered.discarded.size()},
                          {"dropped_positive", filtered.dropped_positive.size()},
                          {"verdicts", verdicts}};
  stage.entry["gateway"] = gateway_stats_json(*judge);
  stage.finish();
  print_stats(out, "cot", cot_stats);
  print_stats(out, "eccot", pool.stats);
  out << "retained " << filtered.retained.size() << ", discarded " << filtered.discarded.size()
      << ", dropped positive " << filtered.dropped_positive.size() << "\n";
  return 0;
}

inline int resample(const RunConfig& config, std::ostream& out) {
  RunLock lock(config.output_dir);
  Stage stage(config, "resample");
  const auto cot = stage_trajectories(stage, stage.path(files::kCot));
  const auto retained = stage_trajectories(stage, stage.path(files::kEchoRetained));
  auto hyps = score_echo_hypotheses(retained, cot, config.bleu);
  const auto selected = combine_and_resample(hyps, config.resample);
  std::vector<Trajectory> chosen;
  for (const auto& h : selected) chosen.push_back(h.trajectory);
  std::sort(chosen.begin(), chosen.end(), trajectory_order);
  const auto pool = assemble_eccot(cot, chosen);
  stage.output(files::kEchoResampled, to_jsonl(chosen));
  stage.output(files::kWeightAudit, weight_audit_jsonl(hyps, selected));
  stage.output(files::kEccotResampled, to_jsonl(pool.dataset));
  stage.entry["stats"] = {{"pool", "echo_retained"},
                          {"candidates", hyps.size()},
                          {"selected", selected.size()},
                          {"eccot_resampled", to_json(pool.stats)}};
  stage.finish();
  out << "resampled " << selected.size() << " of " << hyps.size() << " retained echoes\n";
  print_stats(out, "eccot_resampled", pool.stats);
  return 0;
}

inline int export_pool(const RunConfig& config, const std::string& pool_name, std::ostream& out) {
  static const std::map<std::string, const char*> pools = {
      {"cot", files::kCot}, {"eccot", files::kEccot}, {"eccot_resampled", files::kEccotResampled}};
  auto it = pools.find(pool_name);
  if (it == pools.end()) {
    throw Error::at_field(ErrorKind::ConfigInvalid, "--pool", "unknown pool '" + pool_name + "'");
  }
  RunLock lock(config.output_dir);
  Stage stage(config, "export:" + pool_name);
  const Corpus corpus = stage_corpus(stage);
  const auto pool = stage_trajectories(stage, stage.path(it->second));
  const auto examples = to_training_examples(pool, corpus, config.run_id);
  const auto stats = pool_stats(pool);
  const auto balance = class_balance(examples);
  if (balance.positive != stats.correct || balance.negative != stats.incorrect) {
    throw Error(ErrorKind::PreconditionViolated, "class balance does not match pool stats");
  }
  const std::string name = "train_" + pool_name + ".jsonl";
  stage.output(name, to_jsonl(examples));
  stage.entry["stats"] = {{"examples", examples.size()},
                          {"positive", balance.positive},
                          {"negative", balance.negative}};
  stage.finish();
  out << "exported " << examples.size() << " examples (+" << balance.positive << " -"
      << balance.negative << ") to " << stage.path(name).string() << "\n";
  return 0;
}

inline int train(const RunConfig& config, const std::string& train_file, std::ostream& out) {
  RunLock lock(config.output_dir);
  Stage stage(config, "train-surrogate");
  const fs::path input = train_file.empty() ? stage.path("train_eccot.jsonl")
                                            : fs::path(train_file);
  const auto examples = parse_training_examples(stage.input(input));
  const auto model = train_surrogate(examples, config.surrogate.epochs,
                                     config.surrogate.learning_rate, config.surrogate.seed);
  stage.output(files::kSurrogate, to_json(model).dump());
  stage.entry["stats"] = {{"examples", examples.size()},
                          {"epochs", config.surrogate.epochs},
                          {"learning_rate", config.surrogate.learning_rate},
                          {"seed", config.surrogate.seed}};
  stage.finish();
  out << "trained surrogate on " << examples.size() << " examples\n";
  return 0;
}

inline ScorerKind stage_scorer(const RunConfig& config) {
  ScorerConfig sc = config.scorer;
  if (sc.kind == "surrogate" && sc.model.empty()) sc.model = config.output_dir / files::kSurrogate;
  return make_scorer(sc);
}

// Scores a training file and reports how well the scorer separates outcomes.
inline int score_check(const RunConfig& config, const std::string& examples_file,
                       std::ostream& out) {
  RunLock lock(config.output_dir);
  Stage stage(config, "score-check");
  const fs::path input = examples_file.empty() ? stage.path("train_eccot.jsonl")
                                               : fs::path(examples_file);
  const auto examples = parse_training_examples(stage.input(input));
  const ScorerKind scorer = stage_scorer(config);
  std::vector<double> scores;
  if (std::holds_alternative<OracleScorer>(scorer)) {
    for (const auto& ex : examples) scores.push_back(ex.outcome == '+' ? 1.0 : 0.0);
  } else if (const auto* remote = std::get_if<RemoteScorer>(&scorer)) {
    std::vector<ScoreItem> items;
    for (const auto& ex : examples) items.push_back({ex.input_text, ex.response_text});
    scores = score_batch_remote(remote->base_url, items, remote->timeout_s);
  } else if (const auto* random = std::get_if<RandomScorer>(&scorer)) {
    for (const auto& ex : examples) {
      scores.push_back(random_score(random->seed, ex.meta.problem_id, ex.response_text));
    }
  } else {
    const auto& model = std::get<SurrogateScorer>(scorer).model;
    for (const auto& ex : examples) scores.push_back(model->predict(ex.input_text, ex.response_text));
  }
  double pos_sum = 0, neg_sum = 0;
  long pos = 0, neg = 0, agree = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const bool positive = examples[i].outcome == '+';
    (positive ? pos_sum : neg_sum) += scores[i];
    (positive ? pos : neg)++;
    agree += (scores[i] >= 0.5) == positive ? 1 : 0;
  }
  const double accuracy = examples.empty() ? 0.0 : static_cast<double>(agree) / examples.size();
  const double mean_pos = pos ? pos_sum / pos : 0.0;
  const double mean_neg = neg ? neg_sum / neg : 0.0;
  stage.entry["stats"] = {{"scorer", scorer_label(scorer)},
                          {"examples", examples.size()},
                          {"accuracy_at_0.5", accuracy},
                          {"mean_score_positive", mean_pos},
                          {"mean_score_negative", mean_neg}};
  stage.finish();
  char line[200];
  std::snprintf(line, sizeof line,
                "scorer=%s examples=%zu accuracy@0.5=%.4f mean(+)=%.4f mean(-)=%.4f\n",
                scorer_label(scorer).c_str(), examples.size(), accuracy, mean_pos, mean_neg);
  out << line;
  return 0;
}

inline int evaluate_stage(const RunConfig& config, const std::string& candidates_file,
                          std::ostream& out) {
  RunLock lock(config.output_dir);
  Stage stage(config, "evaluate:" + config.scorer.kind);
  const Corpus corpus = stage_corpus(stage);
  fs::path candidates = stage.path(files::kCot);
  if (!candidates_file.empty()) {
    candidates = candidates_file;
  } else if (config.evaluation.candidates) {
    candidates = *config.evaluation.candidates;
  }
  auto sets = build_candidate_sets(corpus, stage_trajectories(stage, candidates));
  const ScorerKind scorer = stage_scorer(config);
  EvalOptions options;
  options.dataset = config.evaluation.dataset;
  options.reasoner_id = config.evaluation.reasoner_id;
  options.run_id = config.run_id;
  options.subsample_seed = config.evaluation.subsample_seed;
  options.workers = config.generator.max_in_flight;
  const auto report = evaluate(std::move(sets), scorer, config.evaluation.ns, options);
  const std::string prefix = "eval_" + config.scorer.kind;
  stage.output(prefix + ".jsonl", report_jsonl(report));
  for (const auto& [metric, content] : plot_series(report)) {
    stage.output("plot_" + config.scorer.kind + "_" + metric + ".tsv", content);
  }
  json rows = json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"N", row.n},
                    {"accuracy_bon", row.accuracy_bon},
                    {"accuracy_majority", row.accuracy_majority},
                    {"ht", row.ht},
                    {"mean_correct", row.mean_correct}});
  }
  stage.entry["stats"] = {{"scorer", report.scorer_label}, {"rows", rows}};
  stage.finish();
  out << summary_table(report);
  return 0;
}

inline int report(const RunConfig& config, std::ostream& out) {
  const fs::path manifest_path = config.output_dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw Error(ErrorKind::IoFailure, "no manifest at " + manifest_path.string());
  }
  const json manifest = json::parse(io::read_file(manifest_path));
  out << "run " << manifest.value("run_id", "?") << "\n";
  for (const auto& [name, stage] : manifest.at("stages").items()) {
    out << "[" << name << "]";
    if (stage.contains("stats")) out << " " << stage.at("stats").dump();
    if (stage.contains("gateway")) {
      out << " cached=" << stage.at("gateway").value("cached", 0L) << "/"
          << stage.at("gateway").value("requests", 0L);
    }
    out << "\n";
  }
  return 0;
}

inline int synth(std::uint64_t seed, int count, int depth, const std::string& out_path,
                 const std::string& script_path, int samples, double p_correct, bool echo,
                 std::ostream& out) {
  const Corpus corpus = synth_corpus(seed, count, depth);
  commit_artifact(out_path, to_canonical_jsonl(corpus));
  out << "wrote " << corpus.problems.size() << " problems to " << out_path << "\n";
  if (!script_path.empty()) {
    const MockScript script =
        echo ? fixtures::make_echo_fixture_script(corpus, samples, p_correct, seed)
             : fixtures::make_reasoner_script(corpus, samples, p_correct, seed);
    commit_artifact(script_path, script.to_json().dump(2) + "\n");
    out << "wrote mock script to " << script_path << "\n";
  }
  return 0;
}

inline void print_error(std::ostream& err, const Error& e) {
  json line{{"kind", to_string(e.kind())}, {"message", e.what()}};
  if (e.field()) line["field"] = *e.field();
  if (e.line()) line["line"] = *e.line();
  err << "error " << line.dump() << "\n";
}

}  // namespace detail

// Runs one subcommand. Exit codes: 0 success, 1 stage failure, 2 usage or
// configuration error.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Outcome reward model data pipeline and best-of-N evaluation", "logic_orm"};
  app.require_subcommand(1);
  std::string config_path;

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Run configuration file")->required();
    return sub;
  };

  std::uint64_t seed = 0;
  int count = 20, depth = 2, samples = 8;
  double p_correct = 0.5;
  bool echo = false;
  std::string out_path, script_path;
  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus (and optionally a mock script)");
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("--count", count, "Number of problems");
  synth->add_option("--depth", depth, "Implication chain length");
  synth->add_option("--out", out_path, "Corpus output path")->required();
  synth->add_option("--script", script_path, "Also write a mock reasoner script here");
  synth->add_option("--samples", samples, "Scripted samples per problem");
  synth->add_option("--p-correct", p_correct, "Probability a scripted sample is correct");
  synth->add_flag("--echo", echo, "Add sycophantic echo and planted judge rules to the script");

  auto* gen_cot = with_config(app.add_subcommand("gen-cot", "Generate CoT trajectories"));
  auto* gen_echo = with_config(app.add_subcommand("gen-echo", "Generate echo trajectories for every label"));
  auto* judge = with_config(app.add_subcommand("judge-filter", "Judge-filter echoes and assemble EcCoT"));
  auto* resample = with_config(app.add_subcommand("resample", "Diversity-weighted resampling of retained echoes"));
  std::string pool = "eccot";
  auto* exp = with_config(app.add_subcommand("export", "Export a pool in the step-tag training format"));
  exp->add_option("--pool", pool, "cot | eccot | eccot_resampled");
  std::string train_file;
  auto* train = with_config(app.add_subcommand("train-surrogate", "Train the hashed n-gram surrogate scorer"));
  train->add_option("--train", train_file, "Training file (default: train_eccot.jsonl)");
  std::string examples_file;
  auto* check = with_config(app.add_subcommand("score-check", "Score a training file with the configured scorer"));
  check->add_option("--examples", examples_file, "Training-format file (default: train_eccot.jsonl)");
  std::string candidates_file;
  auto* eval = with_config(app.add_subcommand("evaluate", "Best-of-N / majority / HT sweep"));
  eval->add_option("--candidates", candidates_file, "Candidate trajectory store");
  auto* report = with_config(app.add_subcommand("report", "Summarize the run manifest"));

  if (!args.empty() && !args.front().starts_with("-")) {
    const auto& names = subcommands();
    if (std::find(names.begin(), names.end(), args.front()) == names.end()) {
      detail::print_error(err, Error(ErrorKind::UnknownCommand, "'" + args.front() + "'"));
      err << app.help();
      return 2;
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    detail::print_error(err, Error(ErrorKind::ConfigInvalid, e.what()));
    err << app.help();
    return 2;
  }

  try {
    if (synth->parsed()) {
      return detail::synth(seed, count, depth, out_path, script_path, samples, p_correct, echo, out);
    }
    const RunConfig config = load_run_config(config_path);
    if (gen_cot->parsed()) return detail::gen_cot(config, out);
    if (gen_echo->parsed()) return detail::gen_echo(config, out);
    if (judge->parsed()) return detail::judge_filter(config, out);
    if (resample->parsed()) return detail::resample(config, out);
    if (exp->parsed()) return detail::export_pool(config, pool, out);
    if (train->parsed()) return detail::train(config, train_file, out);
    if (check->parsed()) return detail::score_check(config, examples_file, out);
    if (eval->parsed()) return detail::evaluate_stage(config, candidates_file, out);
    if (report->parsed()) return detail::report(config, out);
  } catch (const Error& e) {
    detail::print_error(err, e);
    return e.kind() == ErrorKind::ConfigInvalid ? 2 : 1;
  } catch (const std::exception& e) {
    detail::print_error(err, Error(ErrorKind::IoFailure, e.what()));
    return 1;
  }
  return 2;
}

}  // namespace logic_orm::cli
