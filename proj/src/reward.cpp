#include "acesearcher/reward.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <string_view>
#include <vector>

#include "acesearcher/common.hpp"

namespace acesearcher {

namespace {

constexpr std::string_view kPunctuation = R"(!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~)";

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

void require_golds(std::span<const std::string> golds) {
  if (golds.empty()) throw Error(ErrorCode::invalid_argument, "gold answer list is empty");
}

struct NumberText {
  double value = 0.0;
  int decimals = -1;  // -1 when the literal has an exponent
};

std::optional<NumberText> parse_number_text(std::string_view text) {
  std::size_t i = 0;
  bool negative = false;
  auto skip_prefix = [&] {
    for (;;) {
      if (i < text.size() && (is_space(text[i]) || text[i] == '$' || text[i] == '+')) {
        ++i;
      } else if (text.substr(i, 3) == "\xE2\x82\xAC") {  // euro sign
        i += 3;
      } else if (text.substr(i, 2) == "\xC2\xA3" || text.substr(i, 2) == "\xC2\xA5") {
        i += 2;
      } else {
        return;
      }
    }
  };
  skip_prefix();
  if (i < text.size() && text[i] == '-') {
    negative = true;
    ++i;
    skip_prefix();
  }

  std::string literal;
  bool seen_digit = false;
  bool seen_dot = false;
  int decimals = 0;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c >= '0' && c <= '9') {
      literal.push_back(c);
      seen_digit = true;
      if (seen_dot) ++decimals;
    } else if (c == ',' && seen_digit && !seen_dot) {
      continue;
    } else if (c == '.' && !seen_dot && i + 1 < text.size() && text[i + 1] >= '0' && text[i + 1] <= '9') {
      literal.push_back(c);
      seen_dot = true;
    } else {
      break;
    }
  }
  if (!seen_digit) return std::nullopt;

  bool has_exponent = false;
  if (i + 1 < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    std::size_t j = i + 1;
    std::string exponent = "e";
    if (text[j] == '+' || text[j] == '-') exponent.push_back(text[j++]);
    std::size_t digits_start = j;
    while (j < text.size() && text[j] >= '0' && text[j] <= '9') exponent.push_back(text[j++]);
    if (j > digits_start) {
      literal += exponent;
      has_exponent = true;
    }
  }

  double value = 0.0;
  auto [ptr, ec] = std::from_chars(literal.data(), literal.data() + literal.size(), value);
  if (ec != std::errc{} || !std::isfinite(value)) return std::nullopt;
  return NumberText{negative ? -value : value, has_exponent ? -1 : decimals};
}

}  // namespace

std::string normalize_answer(std::string_view s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (char ch : s) {
    if (kPunctuation.find(ch) != std::string_view::npos) continue;
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    cleaned.push_back(ch);
  }
  std::string out;
  for (const auto& token : split_ws(cleaned)) {
    if (token == "a" || token == "an" || token == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += token;
  }
  return out;
}

int exact_match(std::string_view prediction, std::span<const std::string> golds) {
  require_golds(golds);
  const std::string pred = normalize_answer(prediction);
  for (const auto& gold : golds)
    if (normalize_answer(gold) == pred) return 1;
  return 0;
}

double token_f1(std::string_view prediction, std::span<const std::string> golds) {
  require_golds(golds);
  const auto pred_tokens = split_ws(normalize_answer(prediction));
  double best = 0.0;
  for (const auto& gold : golds) {
    const auto gold_tokens = split_ws(normalize_answer(gold));
    double f1 = 0.0;
    if (pred_tokens.empty() || gold_tokens.empty()) {
      f1 = pred_tokens.empty() && gold_tokens.empty() ? 1.0 : 0.0;
    } else {
      std::map<std::string, int> counts;
      for (const auto& t : gold_tokens) ++counts[t];
      int common = 0;
      for (const auto& t : pred_tokens) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
          --it->second;
          ++common;
        }
      }
      if (common > 0) {
        const double precision = static_cast<double>(common) / static_cast<double>(pred_tokens.size());
        const double recall = static_cast<double>(common) / static_cast<double>(gold_tokens.size());
        f1 = 2.0 * precision * recall / (precision + recall);
      }
    }
    best = std::max(best, f1);
  }
  return best;
}

int answer_containment(std::string_view prediction, std::span<const std::string> golds) {
  require_golds(golds);
  const std::string pred = normalize_answer(prediction);
  for (const auto& gold : golds)
    if (pred.find(normalize_answer(gold)) != std::string::npos) return 1;
  return 0;
}

std::optional<double> parse_number(std::string_view text) {
  auto parsed = parse_number_text(text);
  if (!parsed) return std::nullopt;
  return parsed->value;
}

int numeric_match(std::string_view prediction, std::string_view gold, double rel_tol) {
  if (rel_tol < 0.0) throw Error(ErrorCode::invalid_argument, "rel_tol must be non-negative");
  const auto g = parse_number_text(gold);
  if (!g) throw Error(ErrorCode::invalid_argument, "gold answer '" + std::string(gold) + "' is not numeric");
  const auto p = parse_number_text(prediction);
  if (!p) return 0;
  if (std::fabs(p->value - g->value) <= rel_tol * std::max(std::fabs(g->value), 1e-9)) return 1;
  if (g->decimals >= 0) {
    const double scale = std::pow(10.0, g->decimals);
    if (std::round(p->value * scale) == std::round(g->value * scale)) return 1;
  }
  return 0;
}

FactLabel canonical_fact_label(std::string_view text) {
  std::string spaced(text);
  std::replace(spaced.begin(), spaced.end(), '_', ' ');
  const std::string norm = normalize_answer(spaced);
  if (norm == "yes" || norm == "supported") return FactLabel::supported;
  if (norm == "no" || norm == "not supported") return FactLabel::not_supported;
  return FactLabel::other;
}

std::string_view to_string(FactLabel label) noexcept {
  switch (label) {
    case FactLabel::supported: return "SUPPORTED";
    case FactLabel::not_supported: return "NOT_SUPPORTED";
    case FactLabel::other: return "OTHER";
  }
  return "OTHER";
}

int task_match(std::string_view prediction, std::span<const std::string> golds, TaskKind task,
               double rel_tol) {
  require_golds(golds);
  switch (task) {
    case TaskKind::multihop_qa:
      return exact_match(prediction, golds);
    case TaskKind::fact_verification: {
      const FactLabel label = canonical_fact_label(prediction);
      if (label == FactLabel::other) return 0;
      for (const auto& gold : golds)
        if (canonical_fact_label(gold) == label) return 1;
      return 0;
    }
    case TaskKind::document_math:
      for (const auto& gold : golds)
        if (numeric_match(prediction, gold, rel_tol)) return 1;
      return 0;
  }
  return 0;
}

RewardRecord compute_reward(std::string_view prediction, std::span<const std::string> golds,
                            bool format_ok, TaskKind task, double rel_tol) {
  RewardRecord record;
  record.em = task_match(prediction, golds, task, rel_tol);
  record.format_ok = format_ok;
  record.reward = record.em * (format_ok ? 1 : 0);
  return record;
}

}  // namespace acesearcher
