#include "acesearcher/decomposition.hpp"

#include <cctype>
#include <charconv>
#include <limits>

#include "acesearcher/extraction.hpp"

namespace acesearcher {

namespace {

bool is_digit(char c) noexcept { return c >= '0' && c <= '9'; }

/// Length of the digit run starting at `pos`.
std::size_t digit_run(std::string_view text, std::size_t pos) noexcept {
  std::size_t end = pos;
  while (end < text.size() && is_digit(text[end])) ++end;
  return end - pos;
}

/// Parses a digit run, saturating at INT_MAX so absurd references still fail
/// validation instead of wrapping.
int run_value(std::string_view digits) noexcept {
  int value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec == std::errc::result_out_of_range) return std::numeric_limits<int>::max();
  return value;
}

/// Drops `#` characters sitting directly before a digit.
std::string defuse_placeholders(std::string_view answer) {
  std::string out;
  out.reserve(answer.size());
  for (std::size_t i = 0; i < answer.size(); ++i) {
    if (answer[i] == '#') {
      std::size_t j = i;
      while (j < answer.size() && answer[j] == '#') ++j;
      if (j < answer.size() && is_digit(answer[j])) {
        i = j - 1;  // drop the whole run of '#'
        continue;
      }
    }
    out.push_back(answer[i]);
  }
  return out;
}

}  // namespace

std::set<int> find_back_references(std::string_view text) {
  std::set<int> refs;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '#') continue;
    std::size_t len = digit_run(text, i + 1);
    if (len == 0) continue;
    refs.insert(run_value(text.substr(i + 1, len)));
    i += len;
  }
  return refs;
}

Decomposition parse_decomposition(std::string_view raw, int max_subquestions) {
  using Kind = DecompositionError::Kind;
  Decomposition out;

  std::size_t pos = raw.find(kSubquestionMarker);
  if (pos == std::string_view::npos)
    throw DecompositionError(Kind::no_templates, 0, "decomposition contains no '###' subquestions");

  while (pos != std::string_view::npos) {
    std::size_t start = pos + kSubquestionMarker.size();
    std::size_t next = raw.find(kSubquestionMarker, start);
    std::string_view segment =
        trim(raw.substr(start, next == std::string_view::npos ? raw.npos : next - start));
    const int index = static_cast<int>(out.templates.size()) + 1;

    if (segment.empty())
      throw DecompositionError(Kind::empty_template, index,
                               "subquestion " + std::to_string(index) + " is empty");
    if (index > max_subquestions)
      throw DecompositionError(Kind::too_many, index,
                               "decomposition exceeds " + std::to_string(max_subquestions) +
                                   " subquestions");

    auto refs = find_back_references(segment);
    for (int ref : refs) {
      if (ref < 1 || ref >= index)
        throw DecompositionError(Kind::invalid_reference, index,
                                 "subquestion " + std::to_string(index) + " references #" +
                                     std::to_string(ref) + ", which is not an earlier subquestion");
    }
    out.templates.emplace_back(segment);
    out.back_refs.push_back(std::move(refs));
    pos = next;
  }
  return out;
}

std::string render_decomposition(const Decomposition& decomposition) {
  std::string out;
  for (std::size_t i = 0; i < decomposition.templates.size(); ++i) {
    if (i) out += '\n';
    out += kSubquestionMarker;
    out += ' ';
    out += decomposition.templates[i];
  }
  return out;
}

std::string substitute_placeholders(std::string_view template_text,
                                    std::span<const std::string> prior_answers) {
  std::string out;
  out.reserve(template_text.size());
  for (std::size_t i = 0; i < template_text.size(); ++i) {
    const char c = template_text[i];
    std::size_t len = c == '#' ? digit_run(template_text, i + 1) : 0;
    if (len == 0) {
      out.push_back(c);
      continue;
    }
    int ref = run_value(template_text.substr(i + 1, len));
    if (ref < 1 || static_cast<std::size_t>(ref) > prior_answers.size())
      throw Error(ErrorCode::invalid_argument,
                  "placeholder #" + std::to_string(ref) + " has no answer (" +
                      std::to_string(prior_answers.size()) + " available)");
    std::string inserted = defuse_placeholders(prior_answers[static_cast<std::size_t>(ref) - 1]);
    // A literal '#' in the template right before an answer that starts with a
    // digit would form a new placeholder.
    if (!inserted.empty() && is_digit(inserted.front()))
      while (!out.empty() && out.back() == '#') out.pop_back();
    out += inserted;
    i += len;
  }
  return out;
}

bool validate_trajectory_format(std::string_view decomposition_raw,
                                std::span<const std::string> subanswers,
                                std::string_view final_raw, TaskKind task,
                                int max_subquestions) {
  Decomposition decomposition;
  try {
    decomposition = parse_decomposition(decomposition_raw, max_subquestions);
  } catch (const DecompositionError&) {
    return false;
  }
  if (subanswers.size() != decomposition.size()) return false;
  for (const auto& answer : subanswers)
    if (trim(answer).empty()) return false;

  switch (task) {
    case TaskKind::multihop_qa:
    case TaskKind::fact_verification:
      return find_answer_regions(final_raw).size() == 1;
    case TaskKind::document_math: {
      auto boxed = find_boxed_regions(final_raw).size();
      return boxed == 1 || (boxed == 0 && assigns_answer_variable(final_raw));
    }
  }
  return false;
}

}  // namespace acesearcher
