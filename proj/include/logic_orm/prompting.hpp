#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "logic_orm/corpus.hpp"
#include "logic_orm/error.hpp"

namespace logic_orm {

inline constexpr std::string_view kCotInstruction =
    "Please reason step by step, and put your final answer within \\boxed{}";
inline constexpr std::string_view kJudgeInstruction =
    "Judge if the reasoning logically follows from the input; respond only "
    "with Correct or Incorrect.";

enum class Role { System, User };

inline std::string_view to_string(Role role) {
  return role == Role::System ? "system" : "user";
}

struct Message {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

// Premises, question and answer options. Shared by every prompt and by the
// training-export input field.
inline std::string render_context(const Problem& problem) {
  std::string out = "Premises:\n";
  for (const auto& premise : problem.premises) {
    out += premise;
    out += '\n';
  }
  out += "Question: Is the statement \"" + problem.conclusion +
         "\" true, false, or uncertain?\n";
  out += "Answer Options:";
  for (const auto& [key, label] : problem.options) {
    out += " " + key + ") " + std::string(to_string(label));
  }
  return out;
}

// "Given the answer is Uncertain (C), "
inline std::string echo_prefix(const Problem& problem, Label target) {
  return "Given the answer is " + std::string(to_string(target)) + " (" +
         option_key_for(problem.options, target) + "), ";
}

inline std::string echo_instruction(const Problem& problem, Label target) {
  std::string instruction(kCotInstruction);
  instruction[0] = static_cast<char>(std::tolower(
      static_cast<unsigned char>(instruction[0])));
  return echo_prefix(problem, target) + instruction;
}

inline std::vector<Message> render_cot(const Problem& problem) {
  return {Message{Role::User,
                  render_context(problem) + "\n\n" + std::string(kCotInstruction)}};
}

inline std::vector<Message> render_echo(const Problem& problem, Label target) {
  return {Message{Role::User, render_context(problem) + "\n\n" +
                                  echo_instruction(problem, target)}};
}

inline std::vector<Message> render_judge(const Problem& problem,
                                         std::string_view reasoning) {
  if (text::trim(reasoning).empty()) {
    throw Error(ErrorKind::EmptyReasoning,
                "judge prompt for '" + problem.id + "' has no reasoning");
  }
  return {Message{Role::User, render_context(problem) + "\n\nReasoning:\n" +
                                  std::string(reasoning) + "\n\n" +
                                  std::string(kJudgeInstruction)}};
}

}  // namespace logic_orm
