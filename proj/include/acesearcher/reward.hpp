#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "acesearcher/common.hpp"
#include "acesearcher/domain.hpp"

namespace acesearcher {

/// Lowercase, strip ASCII punctuation, drop the whole tokens "a", "an",
/// "the", collapse whitespace, trim.
std::string normalize_answer(std::string_view s);

/// 1 iff the normalized prediction equals some normalized gold. Throws
/// Error(invalid_argument) on an empty gold list (as do the other scorers).
int exact_match(std::string_view prediction, std::span<const std::string> golds);

/// Max over golds of token-level F1 on normalized text. Two empty token
/// lists score 1; exactly one empty list scores 0.
double token_f1(std::string_view prediction, std::span<const std::string> golds);

/// 1 iff some normalized gold is a substring of the normalized prediction.
int answer_containment(std::string_view prediction, std::span<const std::string> golds);

/// Leading number of `text` after dropping currency symbols, thousands
/// separators and leading whitespace; trailing units, `%` and words are
/// ignored. std::nullopt when no number leads the text.
std::optional<double> parse_number(std::string_view text);

/// 1 iff |p - g| <= rel_tol * max(|g|, 1e-9), or p rounded to the gold's
/// decimal places equals g. An unparsable prediction scores 0; an
/// unparsable gold throws Error(invalid_argument).
int numeric_match(std::string_view prediction, std::string_view gold, double rel_tol = 0.01);

enum class FactLabel { supported, not_supported, other };

/// "yes"/"supported" -> supported, "no"/"not supported" -> not_supported
/// (after normalization, `_` read as a space), anything else -> other.
FactLabel canonical_fact_label(std::string_view text);
std::string_view to_string(FactLabel label) noexcept;

struct RewardRecord {
  int em = 0;
  bool format_ok = false;
  int reward = 0;

  bool operator==(const RewardRecord&) const = default;
};

/// Task-aware correctness: exact match for multi-hop QA, label agreement for
/// fact verification, numeric match (best gold) for document math.
int task_match(std::string_view prediction, std::span<const std::string> golds, TaskKind task,
               double rel_tol = 0.01);

/// reward = em * [format_ok].
RewardRecord compute_reward(std::string_view prediction, std::span<const std::string> golds,
                            bool format_ok, TaskKind task, double rel_tol = 0.01);

}  // namespace acesearcher
