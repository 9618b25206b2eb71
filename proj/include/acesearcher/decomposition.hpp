#pragma once

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "acesearcher/common.hpp"
#include "acesearcher/domain.hpp"

namespace acesearcher {

/// Ordered subquestion templates. A template may mention `#j` to stand for the
/// answer of subquestion j (1-based, strictly earlier).
struct Decomposition {
  std::vector<std::string> templates;
  std::vector<std::set<int>> back_refs;

  std::size_t size() const noexcept { return templates.size(); }
  bool operator==(const Decomposition&) const = default;
};

struct InstantiatedSubquestion {
  int index = 0;  // 1-based
  std::string text;

  bool operator==(const InstantiatedSubquestion&) const = default;
};

/// Raised by parse_decomposition. `template_index` is 1-based, 0 when the
/// failure is not tied to one template.
class DecompositionError : public Error {
 public:
  enum class Kind { no_templates, empty_template, invalid_reference, too_many };

  DecompositionError(Kind kind, int template_index, const std::string& message)
      : Error(ErrorCode::parse, message), kind_(kind), template_index_(template_index) {}

  Kind kind() const noexcept { return kind_; }
  int template_index() const noexcept { return template_index_; }

 private:
  Kind kind_;
  int template_index_;
};

inline constexpr std::string_view kSubquestionMarker = "###";

/// Splits on every "###" (text before the first marker is preamble and is
/// dropped), trims each segment and collects its `#j` references.
Decomposition parse_decomposition(std::string_view raw, int max_subquestions = 8);

/// Inverse of parse_decomposition for valid decompositions.
std::string render_decomposition(const Decomposition& decomposition);

/// `#` followed by a digit run. The whole run is one index, so "#12" is twelve.
std::set<int> find_back_references(std::string_view text);

/// Replaces each `#j` with prior_answers[j-1]. Inserted answers have any `#`
/// that directly precedes a digit removed, so the result never carries a
/// placeholder. Throws Error(invalid_argument) for j outside 1..size.
std::string substitute_placeholders(std::string_view template_text,
                                    std::span<const std::string> prior_answers);

/// Format indicator used by the reward: the decomposition parses, every
/// subanswer is non-empty, and the final response holds exactly one
/// well-formed answer region for the task.
bool validate_trajectory_format(std::string_view decomposition_raw,
                                std::span<const std::string> subanswers,
                                std::string_view final_raw, TaskKind task,
                                int max_subquestions = 8);

}  // namespace acesearcher
