#include "acesearcher/domain.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "acesearcher/common.hpp"

namespace acesearcher {

using nlohmann::json;

std::string_view to_string(TaskKind task) noexcept {
  switch (task) {
    case TaskKind::multihop_qa: return "multihop_qa";
    case TaskKind::fact_verification: return "fact_verification";
    case TaskKind::document_math: return "document_math";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "multihop_qa") return TaskKind::multihop_qa;
  if (name == "fact_verification") return TaskKind::fact_verification;
  if (name == "document_math") return TaskKind::document_math;
  throw Error(ErrorCode::parse, "unknown task '" + std::string(name) + "'");
}

std::string_view to_string(ReasoningStyle style) noexcept {
  switch (style) {
    case ReasoningStyle::automatic: return "auto";
    case ReasoningStyle::program: return "pot";
    case ReasoningStyle::chain: return "cot";
  }
  return "auto";
}

ReasoningStyle parse_reasoning_style(std::string_view name) {
  if (name == "auto") return ReasoningStyle::automatic;
  if (name == "pot") return ReasoningStyle::program;
  if (name == "cot") return ReasoningStyle::chain;
  throw Error(ErrorCode::invalid_argument,
              "reasoning_style must be one of auto, pot, cot (got '" + std::string(name) + "')");
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::invalid_argument, what); };
  if (k < 1) fail("k must be positive");
  if (doc_budget_N < 1) fail("doc_budget_N must be positive");
  if (k > doc_budget_N)
    fail("k (" + std::to_string(k) + ") must not exceed doc_budget_N (" +
         std::to_string(doc_budget_N) + ")");
  if (m < 1) fail("m must be at least 1");
  if (m_prime < 1) fail("m_prime must be at least 1");
  if (max_subquestions < 1) fail("max_subquestions must be at least 1");
  if (temperature_infer < 0.0) fail("temperature_infer must be non-negative");
  if (temperature_rollout < 0.0) fail("temperature_rollout must be non-negative");
  if (!(beta > 0.0)) fail("beta must be positive");
  if (max_tokens_subq < 1 || max_tokens_final < 1) fail("max_tokens must be positive");
  if (!(request_timeout_s > 0.0)) fail("request_timeout_s must be positive");
  if (max_concurrency < 1) fail("max_concurrency must be at least 1");
  if (max_retries < 0) fail("max_retries must be non-negative");
  if (!(bm25_k1 > 0.0)) fail("bm25_k1 must be positive");
  if (bm25_b < 0.0 || bm25_b > 1.0) fail("bm25_b must lie in [0, 1]");
  if (numeric_rel_tol < 0.0) fail("numeric_rel_tol must be non-negative");
  if (model_name.empty()) fail("model_name must not be empty");
  if (endpoint_url.empty()) fail("endpoint_url must not be empty");
}

json to_json(const Passage& passage) {
  return json{{"id", passage.id}, {"title", passage.title}, {"text", passage.body}};
}

json to_json(const QAExample& example) {
  json j{{"id", example.id},
         {"question", example.question},
         {"answers", example.gold_answers},
         {"task", to_string(example.task)}};
  if (example.inline_context) j["context"] = *example.inline_context;
  return j;
}

namespace {

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line);
}

const std::string& require_string(const json& record, const char* field,
                                  std::string_view source, std::size_t line) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_string())
    throw Error(ErrorCode::parse, where(source, line) + ": field '" + field +
                                      "' missing or not a string");
  return it->get_ref<const std::string&>();
}

template <typename Fn>
void for_each_record(std::istream& in, std::string_view source, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::parse, where(source, lineno) + ": malformed record: " + e.what());
    }
    if (!record.is_object())
      throw Error(ErrorCode::parse, where(source, lineno) + ": record is not an object");
    fn(record, lineno);
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

Passage passage_from_json(const json& record) {
  return Passage{require_string(record, "id", "<passage>", 0),
                 require_string(record, "title", "<passage>", 0),
                 require_string(record, "text", "<passage>", 0)};
}

std::vector<Passage> read_corpus(std::istream& in, std::string_view source) {
  std::vector<Passage> passages;
  std::unordered_set<std::string> seen;
  for_each_record(in, source, [&](const json& record, std::size_t line) {
    Passage p{require_string(record, "id", source, line),
              require_string(record, "title", source, line),
              require_string(record, "text", source, line)};
    if (trim(p.body).empty())
      throw Error(ErrorCode::parse, where(source, line) + ": passage '" + p.id + "' has empty text");
    if (!seen.insert(p.id).second)
      throw Error(ErrorCode::duplicate_id,
                  where(source, line) + ": duplicate passage id '" + p.id + "'");
    passages.push_back(std::move(p));
  });
  return passages;
}

std::vector<Passage> load_corpus(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_corpus(in, path.string());
}

std::vector<QAExample> read_dataset(std::istream& in, std::string_view source) {
  std::vector<QAExample> examples;
  std::unordered_set<std::string> seen;
  for_each_record(in, source, [&](const json& record, std::size_t line) {
    QAExample ex;
    ex.id = require_string(record, "id", source, line);
    ex.question = require_string(record, "question", source, line);
    auto answers = record.find("answers");
    if (answers == record.end() || !answers->is_array())
      throw Error(ErrorCode::parse, where(source, line) + ": field 'answers' missing or not an array");
    for (const auto& a : *answers) {
      if (!a.is_string())
        throw Error(ErrorCode::parse, where(source, line) + ": answers must be strings");
      ex.gold_answers.push_back(a.get<std::string>());
    }
    if (ex.gold_answers.empty())
      throw Error(ErrorCode::parse, where(source, line) + ": example '" + ex.id + "' has no answers");
    try {
      ex.task = parse_task_kind(require_string(record, "task", source, line));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::parse) throw;
      throw Error(ErrorCode::parse, where(source, line) + ": " + e.what());
    }
    if (auto ctx = record.find("context"); ctx != record.end() && !ctx->is_null()) {
      if (!ctx->is_string())
        throw Error(ErrorCode::parse, where(source, line) + ": field 'context' is not a string");
      ex.inline_context = ctx->get<std::string>();
    }
    if (ex.task == TaskKind::document_math && !ex.inline_context)
      throw Error(ErrorCode::parse, where(source, line) + ": document_math example '" + ex.id +
                                        "' requires a context");
    if (!seen.insert(ex.id).second)
      throw Error(ErrorCode::duplicate_id,
                  where(source, line) + ": duplicate example id '" + ex.id + "'");
    examples.push_back(std::move(ex));
  });
  return examples;
}

std::vector<QAExample> load_dataset(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_dataset(in, path.string());
}

void write_corpus(std::ostream& out, std::span<const Passage> passages) {
  for (const auto& p : passages) out << to_json(p).dump() << '\n';
}

void write_dataset(std::ostream& out, std::span<const QAExample> examples) {
  for (const auto& ex : examples) out << to_json(ex).dump() << '\n';
}

}  // namespace acesearcher
