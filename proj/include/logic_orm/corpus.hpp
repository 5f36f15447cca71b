#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "logic_orm/error.hpp"
#include "logic_orm/util/io.hpp"
#include "logic_orm/util/text.hpp"

namespace logic_orm {

using json = nlohmann::json;

// Declaration order is the canonical label order: True < False < Uncertain.
enum class Label { True, False, Uncertain };

inline constexpr std::array<Label, 3> kAllLabels = {Label::True, Label::False,
                                                    Label::Uncertain};

inline std::string_view to_string(Label label) {
  switch (label) {
    case Label::True: return "True";
    case Label::False: return "False";
    case Label::Uncertain: return "Uncertain";
  }
  return "?";
}

// Case-insensitive, surrounding whitespace ignored.
inline std::optional<Label> parse_label(std::string_view raw) {
  const std::string_view s = text::trim(raw);
  for (Label label : kAllLabels) {
    if (text::iequals(s, to_string(label))) return label;
  }
  return std::nullopt;
}

inline Label parse_label_or_throw(std::string_view raw) {
  if (auto label = parse_label(raw)) return *label;
  throw Error(ErrorKind::UnknownLabel, "'" + std::string(raw) + "'");
}

// Option key -> label, ordered by key.
using OptionMap = std::map<std::string, Label>;

inline const OptionMap& default_options() {
  static const OptionMap options = {
      {"A", Label::True}, {"B", Label::False}, {"C", Label::Uncertain}};
  return options;
}

inline std::string option_key_for(const OptionMap& options, Label label) {
  for (const auto& [key, value] : options) {
    if (value == label) return key;
  }
  throw Error(ErrorKind::PreconditionViolated,
              "label " + std::string(to_string(label)) + " not among options");
}

struct Problem {
  std::string id;
  std::vector<std::string> premises;
  std::string conclusion;
  OptionMap options;
  Label gold = Label::True;
  std::string source;
  std::string split;

  friend bool operator==(const Problem&, const Problem&) = default;
};

struct Corpus {
  std::string name;
  std::vector<Problem> problems;

  const Problem* find(std::string_view id) const {
    for (const auto& p : problems) {
      if (p.id == id) return &p;
    }
    return nullptr;
  }

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Returns an empty string when the problem is well formed, else the reason.
inline std::string validate_problem(const Problem& problem) {
  if (problem.id.empty()) return "empty id";
  if (problem.options.size() != 3) {
    return "expected exactly 3 options, got " +
           std::to_string(problem.options.size());
  }
  std::set<Label> seen;
  for (const auto& [key, label] : problem.options) {
    if (key.empty()) return "empty option key";
    seen.insert(label);
  }
  if (seen.size() != 3) return "options do not cover True/False/Uncertain";
  return {};
}

// A gold value may be a label word or one of the option keys.
inline Label resolve_gold(std::string_view raw, const OptionMap& options) {
  if (auto label = parse_label(raw)) return *label;
  const std::string_view key = text::trim(raw);
  for (const auto& [k, label] : options) {
    if (text::iequals(k, key)) return label;
  }
  throw Error(ErrorKind::UnknownLabel, "'" + std::string(raw) + "'");
}

enum class Schema { Canonical, Folio, ProverQA, JustLogic };

inline std::string_view to_string(Schema schema) {
  switch (schema) {
    case Schema::Canonical: return "canonical";
    case Schema::Folio: return "folio";
    case Schema::ProverQA: return "proverqa";
    case Schema::JustLogic: return "justlogic";
  }
  return "?";
}

inline std::optional<Schema> parse_schema(std::string_view name) {
  for (Schema s : {Schema::Canonical, Schema::Folio, Schema::ProverQA,
                   Schema::JustLogic}) {
    if (text::iequals(name, to_string(s))) return s;
  }
  return std::nullopt;
}

namespace detail {

struct RecordReader {
  const json& record;
  std::size_t line;

  [[noreturn]] void fail(const std::string& reason) const {
    throw Error::at_line(ErrorKind::MalformedRecord, line, reason);
  }

  const json& field(std::string_view name) const {
    auto it = record.find(name);
    if (it == record.end()) fail("missing field '" + std::string(name) + "'");
    return *it;
  }

  const json* first_of(std::initializer_list<std::string_view> names) const {
    for (auto name : names) {
      auto it = record.find(name);
      if (it != record.end() && !it->is_null()) return &*it;
    }
    return nullptr;
  }

  std::string scalar(const json& value, std::string_view what) const {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_integer()) return std::to_string(value.get<long long>());
    fail(std::string(what) + " must be a string");
  }

  std::string string_field(std::string_view name) const {
    return scalar(field(name), name);
  }

  std::string optional_string(std::string_view name) const {
    auto it = record.find(name);
    if (it == record.end() || it->is_null()) return {};
    return scalar(*it, name);
  }

  std::vector<std::string> string_list(const json& value,
                                       std::string_view what) const {
    if (!value.is_array()) fail(std::string(what) + " must be an array");
    std::vector<std::string> out;
    for (const auto& item : value) out.push_back(scalar(item, what));
    return out;
  }
};

// "A) True", "A: True", "(A) True" -> {"A", True}.
inline std::pair<std::string, Label> parse_option_text(std::string_view raw,
                                                       const RecordReader& r) {
  std::string_view s = text::trim(raw);
  if (!s.empty() && s.front() == '(') s.remove_prefix(1);
  const auto sep = s.find_first_of("):.");
  if (sep == std::string_view::npos || sep == 0) {
    r.fail("cannot parse option '" + std::string(raw) + "'");
  }
  std::string key(text::trim(s.substr(0, sep)));
  return {key, parse_label_or_throw(s.substr(sep + 1))};
}

inline std::vector<std::string> split_sentences(std::string_view paragraph) {
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < paragraph.size(); ++i) {
    current.push_back(paragraph[i]);
    const bool boundary =
        paragraph[i] == '\n' ||
        (paragraph[i] == '.' &&
         (i + 1 == paragraph.size() || text::is_space(paragraph[i + 1])));
    if (boundary) {
      auto t = text::trim(current);
      if (!t.empty()) out.emplace_back(t);
      current.clear();
    }
  }
  auto t = text::trim(current);
  if (!t.empty()) out.emplace_back(t);
  return out;
}

inline std::vector<std::string> premises_from(const json& value,
                                              const RecordReader& r) {
  if (value.is_array()) return r.string_list(value, "premises");
  if (value.is_string()) return split_sentences(value.get<std::string>());
  r.fail("premises must be an array or a string");
}

inline Problem adapt_canonical(const RecordReader& r) {
  Problem p;
  p.id = r.string_field("id");
  p.premises = r.string_list(r.field("premises"), "premises");
  p.conclusion = r.string_field("conclusion");
  const json& options = r.field("options");
  if (!options.is_object()) r.fail("options must be an object");
  for (const auto& [key, value] : options.items()) {
    p.options[key] = parse_label_or_throw(r.scalar(value, "options"));
  }
  if (auto reason = validate_problem(p); !reason.empty()) r.fail(reason);
  p.gold = resolve_gold(r.string_field("gold"), p.options);
  p.source = r.optional_string("source");
  p.split = r.optional_string("split");
  return p;
}

// FOLIO: example_id|id, premises (string or list), conclusion, label.
inline Problem adapt_folio(const RecordReader& r) {
  Problem p;
  const json* id = r.first_of({"example_id", "id"});
  if (!id) r.fail("missing field 'example_id'");
  p.id = r.scalar(*id, "example_id");
  p.premises = premises_from(r.field("premises"), r);
  p.conclusion = r.string_field("conclusion");
  p.options = default_options();
  p.gold = resolve_gold(r.string_field("label"), p.options);
  p.source = "folio";
  p.split = r.optional_string("split");
  return p;
}

// ProverQA: id, context (paragraph), question (statement after the last '?'),
// options ["A) True", ...], answer (key or label word).
inline Problem adapt_proverqa(const RecordReader& r) {
  Problem p;
  p.id = r.string_field("id");
  p.premises = premises_from(r.field("context"), r);
  std::string question = r.string_field("question");
  if (auto q = question.rfind('?');
      q != std::string::npos && q + 1 < question.size()) {
    question = std::string(text::trim(std::string_view(question).substr(q + 1)));
  }
  p.conclusion = question;
  if (const json* options = r.first_of({"options"})) {
    for (const auto& item : r.string_list(*options, "options")) {
      auto [key, label] = parse_option_text(item, r);
      p.options[key] = label;
    }
  } else {
    p.options = default_options();
  }
  if (auto reason = validate_problem(p); !reason.empty()) r.fail(reason);
  p.gold = resolve_gold(r.string_field("answer"), p.options);
  p.source = "proverqa";
  p.split = r.optional_string("split");
  return p;
}

// JustLogic: id, premises (string or list), conclusion|statement,
// label|answer.
inline Problem adapt_justlogic(const RecordReader& r) {
  Problem p;
  p.id = r.string_field("id");
  p.premises = premises_from(r.field("premises"), r);
  const json* conclusion = r.first_of({"conclusion", "statement"});
  if (!conclusion) r.fail("missing field 'conclusion'");
  p.conclusion = r.scalar(*conclusion, "conclusion");
  p.options = default_options();
  const json* gold = r.first_of({"label", "answer"});
  if (!gold) r.fail("missing field 'label'");
  p.gold = resolve_gold(r.scalar(*gold, "label"), p.options);
  p.source = "justlogic";
  p.split = r.optional_string("split");
  return p;
}

}  // namespace detail

inline json to_json(const Problem& p) {
  json options = json::object();
  for (const auto& [key, label] : p.options) options[key] = to_string(label);
  return json{{"id", p.id},
              {"premises", p.premises},
              {"conclusion", p.conclusion},
              {"options", options},
              {"gold", to_string(p.gold)},
              {"source", p.source},
              {"split", p.split}};
}

inline Corpus parse_corpus(std::string_view content, Schema schema,
                           std::string name) {
  Corpus corpus;
  corpus.name = std::move(name);
  std::set<std::string> ids;
  const auto lines = io::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (text::trim(lines[i]).empty()) continue;
    json record;
    try {
      record = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw Error::at_line(ErrorKind::MalformedRecord, line_no, e.what());
    }
    if (!record.is_object()) {
      throw Error::at_line(ErrorKind::MalformedRecord, line_no,
                           "record is not an object");
    }
    const detail::RecordReader reader{record, line_no};
    Problem p;
    switch (schema) {
      case Schema::Canonical: p = detail::adapt_canonical(reader); break;
      case Schema::Folio: p = detail::adapt_folio(reader); break;
      case Schema::ProverQA: p = detail::adapt_proverqa(reader); break;
      case Schema::JustLogic: p = detail::adapt_justlogic(reader); break;
    }
    if (auto reason = validate_problem(p); !reason.empty()) reader.fail(reason);
    if (!ids.insert(p.id).second) reader.fail("duplicate id '" + p.id + "'");
    corpus.problems.push_back(std::move(p));
  }
  if (corpus.problems.empty()) {
    throw Error::at_line(ErrorKind::MalformedRecord, 0, "corpus has no records");
  }
  return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path, Schema schema) {
  return parse_corpus(io::read_file(path), schema, path.stem().string());
}

inline std::string to_canonical_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& p : corpus.problems) {
    out += to_json(p).dump();
    out += '\n';
  }
  return out;
}

inline void write_corpus(const Corpus& corpus,
                         const std::filesystem::path& path) {
  io::write_file_atomic(path, to_canonical_jsonl(corpus));
}

namespace detail {

inline const std::vector<std::string>& synth_names() {
  static const std::vector<std::string> names = {
      "Alex", "Bo",   "Cara", "Dev",  "Ema",   "Finn", "Gus",  "Hana",
      "Ivo",  "Jack", "Kai",  "Lena", "Milo",  "Nia",  "Otto", "Pia"};
  return names;
}

inline std::string synth_predicate(std::size_t index) {
  static constexpr std::array<std::string_view, 12> kSyllables = {
      "ba", "ko", "ri", "zu", "me", "ta", "lo", "vi", "ne", "su", "pa", "gu"};
  constexpr std::size_t n = kSyllables.size();
  const std::size_t base = index % (n * n);
  std::string word = std::string(kSyllables[base / n]) +
                     std::string(kSyllables[base % n]) + "sh";
  if (index >= n * n) word += std::to_string(index / (n * n));
  return word;
}

inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  return rng() % n;
}

}  // namespace detail

// Modus-ponens chains: "<Name> is p0." plus `depth` rules
// "Everything that is p_i is p_{i+1}.", conclusion "<Name> is p_depth.".
// False negates the last consequent; Uncertain drops one rule.
inline Corpus synth_corpus(std::uint64_t seed, int count, int depth) {
  require(count >= 1, "synth_corpus: count must be >= 1");
  require(depth >= 1, "synth_corpus: depth must be >= 1");
  std::mt19937_64 rng(seed);
  Corpus corpus;
  corpus.name = "synth-" + std::to_string(seed);
  const auto& names = detail::synth_names();
  constexpr std::size_t kPool = 144;
  for (int i = 0; i < count; ++i) {
    Problem p;
    p.id = "synth-" + std::to_string(seed) + "-" + std::to_string(i);
    p.gold = kAllLabels[detail::bounded(rng, 3)];
    const std::string& name = names[detail::bounded(rng, names.size())];

    // Distinct predicates for this chain: a random window over the pool.
    const std::size_t offset = detail::bounded(rng, kPool);
    std::vector<std::string> preds;
    for (int k = 0; k <= depth; ++k) {
      preds.push_back(detail::synth_predicate(
          (offset + static_cast<std::size_t>(k) * 7) % kPool +
          (static_cast<std::size_t>(k) / kPool) * kPool));
    }

    p.premises.push_back(name + " is " + preds[0] + ".");
    const int dropped = p.gold == Label::Uncertain
                            ? static_cast<int>(detail::bounded(rng, depth))
                            : -1;
    for (int k = 0; k < depth; ++k) {
      if (k == dropped) continue;
      const bool negate = p.gold == Label::False && k == depth - 1;
      p.premises.push_back("Everything that is " + preds[k] + " is " +
                           (negate ? "not " : "") + preds[k + 1] + ".");
    }
    for (std::size_t k = p.premises.size(); k > 1; --k) {
      std::swap(p.premises[k - 1], p.premises[detail::bounded(rng, k)]);
    }
    p.conclusion = name + " is " + preds[depth] + ".";
    p.options = default_options();
    p.source = "synth";
    p.split = "train";
    corpus.problems.push_back(std::move(p));
  }
  return corpus;
}

}  // namespace logic_orm
