#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "logic_orm/corpus.hpp"
#include "logic_orm/error.hpp"
#include "logic_orm/util/io.hpp"
#include "logic_orm/util/text.hpp"

namespace logic_orm {

struct PromptMode {
  enum class Kind { CoT, Echo, Judge };

  Kind kind = Kind::CoT;
  Label target = Label::True;  // meaningful only for Echo

  static PromptMode cot() { return {Kind::CoT, Label::True}; }
  static PromptMode echo(Label target) { return {Kind::Echo, target}; }
  static PromptMode judge() { return {Kind::Judge, Label::True}; }

  bool is_echo() const { return kind == Kind::Echo; }

  friend bool operator==(const PromptMode& a, const PromptMode& b) {
    return a.kind == b.kind && (a.kind != Kind::Echo || a.target == b.target);
  }
  friend bool operator<(const PromptMode& a, const PromptMode& b) {
    return std::tuple(a.kind, a.is_echo() ? a.target : Label::True) <
           std::tuple(b.kind, b.is_echo() ? b.target : Label::True);
  }
};

// "cot", "echo:True", "judge"
inline std::string to_string(const PromptMode& mode) {
  switch (mode.kind) {
    case PromptMode::Kind::CoT: return "cot";
    case PromptMode::Kind::Echo:
      return "echo:" + std::string(to_string(mode.target));
    case PromptMode::Kind::Judge: return "judge";
  }
  return "?";
}

inline std::optional<PromptMode> parse_prompt_mode(std::string_view s) {
  if (s == "cot") return PromptMode::cot();
  if (s == "judge") return PromptMode::judge();
  if (s.starts_with("echo:")) {
    if (auto label = parse_label(s.substr(5))) return PromptMode::echo(*label);
  }
  return std::nullopt;
}

// nullopt encodes Unparsed.
using Extracted = std::optional<Label>;

inline std::string_view to_string(const Extracted& extracted) {
  return extracted ? to_string(*extracted) : "Unparsed";
}

enum class Reward { Unassigned, Positive, Negative };

inline std::string_view to_string(Reward reward) {
  switch (reward) {
    case Reward::Unassigned: return "unassigned";
    case Reward::Positive: return "positive";
    case Reward::Negative: return "negative";
  }
  return "?";
}

enum class JudgeVerdict { Correct, Incorrect, Unparsed };

inline std::string_view to_string(JudgeVerdict verdict) {
  switch (verdict) {
    case JudgeVerdict::Correct: return "Correct";
    case JudgeVerdict::Incorrect: return "Incorrect";
    case JudgeVerdict::Unparsed: return "Unparsed";
  }
  return "?";
}

struct Trajectory {
  std::string problem_id;
  PromptMode mode;
  std::string text;
  Extracted extracted;
  Reward reward = Reward::Unassigned;
  std::string generator_id;
  int sample_index = 0;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// Ordering used for every deterministic reduction over trajectories.
inline bool trajectory_order(const Trajectory& a, const Trajectory& b) {
  return std::tie(a.problem_id, a.mode, a.generator_id, a.sample_index) <
         std::tie(b.problem_id, b.mode, b.generator_id, b.sample_index);
}

namespace detail {

inline std::string_view strip_wrapping(std::string_view s) {
  for (bool changed = true; changed;) {
    changed = false;
    s = text::trim(s);
    if (s.size() >= 2 && ((s.front() == '(' && s.back() == ')') ||
                          (s.front() == '[' && s.back() == ']') ||
                          (s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\''))) {
      s = s.substr(1, s.size() - 2);
      changed = true;
    }
    if (s.starts_with("\\text{") && s.ends_with("}")) {
      s = s.substr(6, s.size() - 7);
      changed = true;
    }
    while (!s.empty() && (s.back() == '.' || s.back() == ',')) {
      s.remove_suffix(1);
      changed = true;
    }
  }
  return s;
}

inline std::optional<Label> match_atom(std::string_view token,
                                       const OptionMap& options) {
  token = strip_wrapping(token);
  for (const auto& [key, label] : options) {
    if (text::iequals(token, key)) return label;
  }
  return parse_label(token);
}

}  // namespace detail

// Last `\boxed{...}` wins. The inner token may be an option key, a label word
// or a "key) label" composite whose halves agree.
inline Extracted extract_answer(std::string_view text,
                                const OptionMap& options) {
  static constexpr std::string_view kMarker = "\\boxed{";
  const auto pos = text.rfind(kMarker);
  if (pos == std::string_view::npos) return std::nullopt;
  const std::size_t begin = pos + kMarker.size();
  int depth = 1;
  std::size_t end = begin;
  for (; end < text.size(); ++end) {
    if (text[end] == '{') ++depth;
    if (text[end] == '}' && --depth == 0) break;
  }
  if (end >= text.size()) return std::nullopt;
  const std::string_view inner = text.substr(begin, end - begin);

  if (auto label = detail::match_atom(inner, options)) return label;

  std::string_view s = detail::strip_wrapping(inner);
  if (!s.empty() && s.front() == '(') s.remove_prefix(1);
  const auto sep = s.find_first_of("):. ");
  if (sep == std::string_view::npos || sep == 0) return std::nullopt;
  const auto key_label = detail::match_atom(s.substr(0, sep), options);
  const auto word_label = parse_label(detail::strip_wrapping(s.substr(sep + 1)));
  if (key_label && word_label && *key_label == *word_label) return key_label;
  return std::nullopt;
}

inline Trajectory assign_reward(Trajectory traj, Label gold) {
  if (traj.reward != Reward::Unassigned) {
    throw Error(ErrorKind::DoubleAssignment,
                traj.problem_id + "/" + to_string(traj.mode) + "/" +
                    std::to_string(traj.sample_index));
  }
  traj.reward = traj.extracted && *traj.extracted == gold ? Reward::Positive
                                                          : Reward::Negative;
  return traj;
}

inline JudgeVerdict parse_judge(std::string_view reply) {
  std::string_view s = text::trim(reply);
  const auto space = std::find_if(s.begin(), s.end(), text::is_space);
  std::string_view word = s.substr(0, static_cast<std::size_t>(space - s.begin()));
  while (!word.empty() && std::ispunct(static_cast<unsigned char>(word.back()))) {
    word.remove_suffix(1);
  }
  if (text::iequals(word, "correct")) return JudgeVerdict::Correct;
  if (text::iequals(word, "incorrect")) return JudgeVerdict::Incorrect;
  return JudgeVerdict::Unparsed;
}

// ---- trajectory store (line-delimited records) ----

inline json to_json(const Trajectory& t) {
  return json{{"problem_id", t.problem_id},
              {"mode", to_string(t.mode)},
              {"text", t.text},
              {"extracted", to_string(t.extracted)},
              {"reward", to_string(t.reward)},
              {"generator_id", t.generator_id},
              {"sample_index", t.sample_index}};
}

inline Trajectory trajectory_from_json(const json& j, std::size_t line) {
  auto fail = [line](const std::string& why) {
    return Error::at_line(ErrorKind::MalformedRecord, line, why);
  };
  try {
    Trajectory t;
    t.problem_id = j.at("problem_id").get<std::string>();
    auto mode = parse_prompt_mode(j.at("mode").get<std::string>());
    if (!mode) throw fail("bad mode");
    t.mode = *mode;
    t.text = j.at("text").get<std::string>();
    const auto extracted = j.at("extracted").get<std::string>();
    if (extracted != "Unparsed") {
      auto label = parse_label(extracted);
      if (!label) throw fail("bad extracted value '" + extracted + "'");
      t.extracted = label;
    }
    const auto reward = j.at("reward").get<std::string>();
    if (reward == "positive") t.reward = Reward::Positive;
    else if (reward == "negative") t.reward = Reward::Negative;
    else if (reward == "unassigned") t.reward = Reward::Unassigned;
    else throw fail("bad reward '" + reward + "'");
    t.generator_id = j.at("generator_id").get<std::string>();
    t.sample_index = j.at("sample_index").get<int>();
    return t;
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
}

inline std::string to_jsonl(const std::vector<Trajectory>& trajectories) {
  std::string out;
  for (const auto& t : trajectories) {
    out += to_json(t).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<Trajectory> parse_trajectories(std::string_view content) {
  std::vector<Trajectory> out;
  const auto lines = io::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw Error::at_line(ErrorKind::MalformedRecord, i + 1, e.what());
    }
    out.push_back(trajectory_from_json(j, i + 1));
  }
  return out;
}

inline std::vector<Trajectory> load_trajectories(
    const std::filesystem::path& path) {
  return parse_trajectories(io::read_file(path));
}

}  // namespace logic_orm
