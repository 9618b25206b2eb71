#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace acesearcher {

enum class TaskKind { multihop_qa, fact_verification, document_math };

std::string_view to_string(TaskKind task) noexcept;
/// Throws Error(parse) for anything other than the three wire names.
TaskKind parse_task_kind(std::string_view name);

/// A retrievable unit of the corpus.
struct Passage {
  std::string id;
  std::string title;
  std::string body;

  bool operator==(const Passage&) const = default;
};

/// One labeled item. `gold_answers` holds aliases; scoring takes the best match.
struct QAExample {
  std::string id;
  std::string question;
  std::vector<std::string> gold_answers;
  TaskKind task = TaskKind::multihop_qa;
  std::optional<std::string> inline_context;

  bool operator==(const QAExample&) const = default;
};

/// How document-reasoning answers are produced: a program whose `ans` variable
/// holds the result, or a chain of thought ending in a boxed value.
enum class ReasoningStyle { automatic, program, chain };

std::string_view to_string(ReasoningStyle style) noexcept;
ReasoningStyle parse_reasoning_style(std::string_view name);

struct RunConfig {
  std::string endpoint_url = "http://127.0.0.1:8000/v1";
  std::string model_name = "acesearcher";
  /// Name of the environment variable holding the API key. The key itself is
  /// never stored in config files.
  std::string api_key_env = "OPENAI_API_KEY";

  int k = 10;              // passages per query for direct retrieval
  int doc_budget_N = 15;   // total passages handed to the final answer step
  int m = 3;               // decompositions sampled per question
  int m_prime = 4;         // solutions sampled per decomposition
  double temperature_infer = 0.0;
  double temperature_rollout = 1.0;
  int max_subquestions = 8;
  double beta = 0.1;       // recorded into preference exports only
  std::uint64_t seed = 0;

  int max_tokens_subq = 256;
  int max_tokens_final = 1024;
  double request_timeout_s = 120.0;
  int max_concurrency = 8;
  int max_retries = 3;
  double bm25_k1 = 0.9;
  double bm25_b = 0.4;
  double numeric_rel_tol = 0.01;
  ReasoningStyle reasoning_style = ReasoningStyle::automatic;

  /// Throws Error(invalid_argument) naming the first violated constraint.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

nlohmann::json to_json(const Passage& passage);
nlohmann::json to_json(const QAExample& example);
Passage passage_from_json(const nlohmann::json& record);

/// Corpus files carry one `{id, title, text}` object per line. Blank lines are
/// skipped; unknown fields are ignored. Errors name the 1-based line number.
std::vector<Passage> load_corpus(const std::filesystem::path& path);
std::vector<Passage> read_corpus(std::istream& in, std::string_view source);

/// Dataset files carry `{id, question, answers, task, context?}` per line.
std::vector<QAExample> load_dataset(const std::filesystem::path& path);
std::vector<QAExample> read_dataset(std::istream& in, std::string_view source);

void write_corpus(std::ostream& out, std::span<const Passage> passages);
void write_dataset(std::ostream& out, std::span<const QAExample> examples);

}  // namespace acesearcher
