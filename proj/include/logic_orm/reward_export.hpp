#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "logic_orm/corpus.hpp"
#include "logic_orm/error.hpp"
#include "logic_orm/prompting.hpp"
#include "logic_orm/trajectory.hpp"
#include "logic_orm/util/io.hpp"

namespace logic_orm {

inline constexpr std::string_view kStepTag = "<extra_0>";

struct ExampleMeta {
  std::string problem_id;
  std::string mode;
  std::string run_id;

  friend bool operator==(const ExampleMeta&, const ExampleMeta&) = default;
};

struct TrainingExample {
  std::string input_text;
  std::string response_text;
  std::string annotated_text;  // response_text + " " + step tag
  char outcome = '-';          // '+' or '-'
  ExampleMeta meta;

  friend bool operator==(const TrainingExample&, const TrainingExample&) = default;
};

inline std::string annotate(std::string_view response) {
  return std::string(response) + " " + std::string(kStepTag);
}

inline TrainingExample to_training_example(const Trajectory& traj, const Problem& problem,
                                           const std::string& run_id) {
  if (traj.reward == Reward::Unassigned) {
    throw Error(ErrorKind::UnassignedReward, traj.problem_id + "/" + to_string(traj.mode));
  }
  if (traj.problem_id != problem.id) {
    throw Error(ErrorKind::IdMismatch,
                "trajectory '" + traj.problem_id + "' vs problem '" + problem.id + "'");
  }
  if (traj.text.find(kStepTag) != std::string::npos) {
    throw Error(ErrorKind::StepTagCollision,
                traj.problem_id + ": response already contains the step tag");
  }
  TrainingExample ex;
  ex.input_text = render_context(problem);
  ex.response_text = traj.text;
  ex.annotated_text = annotate(traj.text);
  ex.outcome = traj.reward == Reward::Positive ? '+' : '-';
  ex.meta = {traj.problem_id, to_string(traj.mode), run_id};
  return ex;
}

inline std::vector<TrainingExample> to_training_examples(
    const std::vector<Trajectory>& pool, const Corpus& corpus, const std::string& run_id) {
  std::vector<TrainingExample> out;
  out.reserve(pool.size());
  for (const auto& t : pool) {
    const Problem* problem = corpus.find(t.problem_id);
    if (!problem) {
      throw Error(ErrorKind::IdMismatch, "no problem '" + t.problem_id + "' in corpus");
    }
    out.push_back(to_training_example(t, *problem, run_id));
  }
  return out;
}

inline json to_json(const TrainingExample& ex) {
  return json{{"input_text", ex.input_text},
              {"response_text", ex.response_text},
              {"annotated_text", ex.annotated_text},
              {"outcome", std::string(1, ex.outcome)},
              {"meta",
               {{"problem_id", ex.meta.problem_id},
                {"mode", ex.meta.mode},
                {"run_id", ex.meta.run_id}}}};
}

inline TrainingExample training_example_from_json(const json& j, std::size_t line) {
  auto fail = [line](const std::string& why) {
    return Error::at_line(ErrorKind::MalformedRecord, line, why);
  };
  if (!j.is_object()) throw fail("record is not an object");
  for (const char* field : {"input_text", "response_text", "annotated_text", "outcome", "meta"}) {
    if (!j.contains(field)) throw fail(std::string("missing field '") + field + "'");
  }
  try {
    TrainingExample ex;
    ex.input_text = j.at("input_text").get<std::string>();
    ex.response_text = j.at("response_text").get<std::string>();
    ex.annotated_text = j.at("annotated_text").get<std::string>();
    const auto outcome = j.at("outcome").get<std::string>();
    if (outcome != "+" && outcome != "-") throw fail("outcome must be '+' or '-'");
    ex.outcome = outcome.front();
    const json& meta = j.at("meta");
    ex.meta = {meta.at("problem_id").get<std::string>(), meta.at("mode").get<std::string>(),
               meta.at("run_id").get<std::string>()};
    if (text::count_occurrences(ex.annotated_text, kStepTag) != 1 ||
        !ex.annotated_text.ends_with(kStepTag)) {
      throw fail("annotated_text must end with exactly one step tag");
    }
    return ex;
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
}

inline std::string to_jsonl(const std::vector<TrainingExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    out += to_json(ex).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<TrainingExample> parse_training_examples(std::string_view content) {
  std::vector<TrainingExample> out;
  const auto lines = io::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw Error::at_line(ErrorKind::MalformedRecord, i + 1, e.what());
    }
    out.push_back(training_example_from_json(j, i + 1));
  }
  return out;
}

inline std::size_t export_examples(const std::vector<TrainingExample>& examples,
                                   const std::filesystem::path& path) {
  io::write_file_atomic(path, to_jsonl(examples));
  return examples.size();
}

inline std::vector<TrainingExample> import_examples(const std::filesystem::path& path) {
  return parse_training_examples(io::read_file(path));
}

struct ClassBalance {
  long positive = 0;
  long negative = 0;
  friend bool operator==(const ClassBalance&, const ClassBalance&) = default;
};

inline ClassBalance class_balance(const std::vector<TrainingExample>& examples) {
  ClassBalance b;
  for (const auto& ex : examples) (ex.outcome == '+' ? b.positive : b.negative)++;
  return b;
}

}  // namespace logic_orm
