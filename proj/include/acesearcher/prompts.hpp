#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "acesearcher/domain.hpp"

namespace acesearcher {

/// One template per kind. Direct-retrieval kinds answer without decomposing;
/// decompose_* drive the decomposer role; subq_* and final_* drive the solver.
enum class PromptKind {
  direct_rag_qa,
  direct_rag_fact,
  direct_rag_doc_pot,
  direct_rag_doc_cot,
  decompose_qa,
  decompose_fact,
  decompose_doc,
  subq_qa,
  subq_fact,
  subq_doc_pot,
  subq_doc_cot,
  final_qa,
  final_fact,
  final_doc_pot,
  final_doc_cot,
};

std::string_view to_string(PromptKind kind) noexcept;
PromptKind parse_prompt_kind(std::string_view name);

using PromptSlots = std::map<std::string, std::string, std::less<>>;

/// Slot names the template for `kind` requires, in order of first use.
std::vector<std::string> required_slots(PromptKind kind);

/// Fills `{slot}` markers verbatim. Throws Error(invalid_argument) naming the
/// first missing slot. Extra slots are ignored.
std::string render_prompt(PromptKind kind, const PromptSlots& slots);

/// Passage list as it appears in every prompt's passage slot.
std::string format_passages(std::span<const Passage> passages);

/// "# subquestion #i: ...  Answer: ..." lines for the qa/fact final prompts.
std::string format_subquestion_answers(std::span<const std::string> subquestions,
                                       std::span<const std::string> answers);

/// "Q1: ... Answer: ..." breakdown for the document final prompts.
std::string format_breakdown(std::span<const std::string> subquestions,
                             std::span<const std::string> answers);

}  // namespace acesearcher
