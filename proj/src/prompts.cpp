#include "acesearcher/prompts.hpp"

#include <array>

#include "acesearcher/common.hpp"

namespace acesearcher {

namespace {

struct TemplateEntry {
  PromptKind kind;
  std::string_view name;
  std::string_view text;
};

// Slots are written `{name}`; a brace pair whose content is not a lowercase
// identifier (for example the literal `\boxed{}`) is plain text.
constexpr std::array<TemplateEntry, 15> kTemplates{{
    {PromptKind::direct_rag_qa, "direct_rag_qa",
     R"(You have the following context passages:
{context}

Given the question: "{question}" as well as the context above, please answer the above question with one or a list of entities with the given context as the reference.
Your answer needs to be a span with one or a list of entities.)"},

    {PromptKind::direct_rag_fact, "direct_rag_fact",
     R"(Answer the following questions with SUPPORTED or NOT_SUPPORTED with the given context as the reference.

Question: {question}

Context: {context}

Your answer should only be SUPPORTED or NOT_SUPPORTED.)"},

    {PromptKind::direct_rag_doc_pot, "direct_rag_doc_pot",
     R"(You have the following passages and table:

Passages:

{passage}

Tables:

{table}

For the question "{question}", write a Python program to solve the question. Store the final result in the variable ans.)"},

    {PromptKind::direct_rag_doc_cot, "direct_rag_doc_cot",
     R"(You have the following passages and table:

Passages:

{passage}

For the question "{question}", reason step by step to calculate the final answer. Please use \boxed{} to wrap your final answer.)"},

    {PromptKind::decompose_qa, "decompose_qa",
     R"(Please break down the question "{question}" into multiple specific sub-questions that address individual components of the original question.

Mark each sub-question with ### at the beginning.  If you need to refer to answers from earlier sub-questions, use #1, #2, etc., to indicate the corresponding answers.

Decomposed question:)"},

    {PromptKind::decompose_fact, "decompose_fact",
     R"(Please break down the claim "{claim}" into multiple smaller sub-claims that each focus on a specific component of the original statement, making it easier for a model to verify.
Begin each sub-claim with ###. If needed, refer to answers from earlier sub-claims using #1, #2, etc.

Decomposed claim:)"},

    {PromptKind::decompose_doc, "decompose_doc",
     R"(You have the following passages and table:

Passages:

{passages}

Tables:

{tables}

Please break down the question "{question}" into multiple specific sub-questions that address individual components of the original question, with the table and passages as the reference. Use ### to mark the start of each sub-question.

Decomposed question:)"},

    {PromptKind::subq_qa, "subq_qa",
     R"(You have the following context passages:

{passages}

Please answer the question "{subquestion}" with a short span using the context as reference. If no answer is found in the context, use your own knowledge. Your answer needs to be as short as possible.)"},

    {PromptKind::subq_fact, "subq_fact",
     R"(You have the following context passages:

{passages}

Please verify whether the claim "{subquestion}" is correct using the context as reference. If no answer is found in the context, use your own knowledge. Please only output Yes or No and do not give any explanation.)"},

    {PromptKind::subq_doc_pot, "subq_doc_pot",
     R"(You have the following passages and tables:

Passage:

{passages}

Table:

{tables}

For the question "{subquestion}", write a Python program to solve the question. Store the final result in the variable ans.)"},

    {PromptKind::subq_doc_cot, "subq_doc_cot",
     R"(You have the following passages and tables:

Passage:

{passages}

Table:

{tables}

For the question "{subquestion}", reason step by step to calculate the final answer. Please use \boxed{} to wrap your final answer.)"},

    {PromptKind::final_qa, "final_qa",
     R"(You have the following passages:

{passages}

You are also given some subquestions and their answers:

{subquestions}

Please answer the question "{question}" with a short span using the documents and subquestions as reference.

Make sure your response is grounded in documents and provides clear reasoning followed by a concise conclusion. If no relevant information is found, use your own knowledge.

Wrap your answer with <answer> and </answer> tags.)"},

    {PromptKind::final_fact, "final_fact",
     R"(You are given some subquestions and their answers:

{subquestions}

Please answer the question "{question}" with only Yes or No using the subquestions as reference. Provides clear reasoning followed by a concise conclusion. If no relevant information is found, use your own knowledge.

Wrap your answer with <answer> and </answer> tags.)"},

    {PromptKind::final_doc_pot, "final_doc_pot",
     R"(You have the following passages and table:

Passages:

{passage}

For the question "{question}", here is a referenced breakdown:

{decomposition}.

Write a Python program to solve the question. Store the final result in the variable ans.)"},

    {PromptKind::final_doc_cot, "final_doc_cot",
     R"(You have the following passages and table:

Passages:

{passage}

For the question "{question}", here is a referenced breakdown:

{decomposition}.

Reason step by step to calculate the final answer. Please use \boxed{} to wrap your final answer.)"},
}};

const TemplateEntry& entry(PromptKind kind) {
  for (const auto& e : kTemplates)
    if (e.kind == kind) return e;
  throw Error(ErrorCode::invalid_argument, "unknown prompt kind");
}

bool is_slot_char(char c) noexcept { return (c >= 'a' && c <= 'z') || c == '_' || (c >= '0' && c <= '9'); }

/// Length of the slot marker at `pos` (including braces) or 0.
std::size_t slot_marker(std::string_view text, std::size_t pos) noexcept {
  if (text[pos] != '{') return 0;
  std::size_t i = pos + 1;
  while (i < text.size() && is_slot_char(text[i])) ++i;
  if (i == pos + 1 || i >= text.size() || text[i] != '}') return 0;
  return i - pos + 1;
}

}  // namespace

std::string_view to_string(PromptKind kind) noexcept {
  for (const auto& e : kTemplates)
    if (e.kind == kind) return e.name;
  return "unknown";
}

PromptKind parse_prompt_kind(std::string_view name) {
  for (const auto& e : kTemplates)
    if (e.name == name) return e.kind;
  throw Error(ErrorCode::invalid_argument, "unknown prompt kind '" + std::string(name) + "'");
}

std::vector<std::string> required_slots(PromptKind kind) {
  std::string_view text = entry(kind).text;
  std::vector<std::string> slots;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (std::size_t len = slot_marker(text, i)) {
      std::string name(text.substr(i + 1, len - 2));
      bool seen = false;
      for (const auto& s : slots) seen = seen || s == name;
      if (!seen) slots.push_back(std::move(name));
      i += len - 1;
    }
  }
  return slots;
}

std::string render_prompt(PromptKind kind, const PromptSlots& slots) {
  std::string_view text = entry(kind).text;
  std::string out;
  out.reserve(text.size() + 256);
  for (std::size_t i = 0; i < text.size(); ++i) {
    std::size_t len = slot_marker(text, i);
    if (len == 0) {
      out.push_back(text[i]);
      continue;
    }
    std::string_view name = text.substr(i + 1, len - 2);
    auto it = slots.find(name);
    if (it == slots.end())
      throw Error(ErrorCode::invalid_argument, "prompt " + std::string(to_string(kind)) +
                                                   " is missing slot '" + std::string(name) + "'");
    out += it->second;
    i += len - 1;
  }
  return out;
}

std::string format_passages(std::span<const Passage> passages) {
  std::string out;
  for (std::size_t i = 0; i < passages.size(); ++i) {
    if (i) out += "\n\n";
    out += "Title: ";
    out += passages[i].title;
    out += '\n';
    out += passages[i].body;
  }
  return out;
}

std::string format_subquestion_answers(std::span<const std::string> subquestions,
                                       std::span<const std::string> answers) {
  std::string out;
  for (std::size_t i = 0; i < subquestions.size(); ++i) {
    if (i) out += '\n';
    out += "# subquestion #" + std::to_string(i + 1) + ": " + subquestions[i];
    out += "  Answer: ";
    if (i < answers.size()) out += answers[i];
  }
  return out;
}

std::string format_breakdown(std::span<const std::string> subquestions,
                             std::span<const std::string> answers) {
  std::string out;
  for (std::size_t i = 0; i < subquestions.size(); ++i) {
    if (i) out += '\n';
    out += "Q" + std::to_string(i + 1) + ": " + subquestions[i];
    if (i < answers.size() && !answers[i].empty()) out += " Answer: " + answers[i];
  }
  return out;
}

}  // namespace acesearcher
