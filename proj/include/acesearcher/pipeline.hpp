#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "acesearcher/decomposition.hpp"
#include "acesearcher/domain.hpp"
#include "acesearcher/gateway.hpp"
#include "acesearcher/retrieval.hpp"
#include "acesearcher/reward.hpp"

namespace acesearcher {

/// One full decompose -> retrieve -> solve -> finalize rollout. The prompts
/// sent at each step are kept so preference pairs can be built without
/// re-rendering.
struct Trajectory {
  std::string question_id;
  TaskKind task = TaskKind::multihop_qa;
  std::string decompose_prompt;
  std::string decomposition_raw;
  Decomposition decomposition;
  /// The decomposition was unusable and the question was answered directly.
  bool fallback = false;
  std::vector<InstantiatedSubquestion> subquestions;
  std::vector<std::string> subquestion_prompts;
  std::vector<std::string> subanswers;
  std::vector<std::vector<Passage>> per_subq_docs;
  std::vector<Passage> merged_context;
  std::string final_prompt;
  std::string final_raw;
  std::string final_answer;
  RewardRecord reward;
  /// Set when generation failed (gateway or executor error) during a rollout.
  bool failed = false;
  std::string failure;

  bool operator==(const Trajectory&) const = default;
};

nlohmann::json to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const nlohmann::json& record);

void write_trajectories(std::ostream& out, std::span<const Trajectory> trajectories);
void write_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajectories);
std::vector<Trajectory> read_trajectories(std::istream& in, std::string_view source);
std::vector<Trajectory> load_trajectories(const std::filesystem::path& path);

struct ExecutionResult {
  bool ok = false;
  std::string value;  // stringified `ans`
  std::string error;
};

/// Runs model-written programs and reports the value of `ans`. Supplied by
/// the caller; the library never executes generated code on its own.
class ProgramExecutor {
 public:
  virtual ~ProgramExecutor() = default;
  virtual ExecutionResult run(std::string_view program) const = 0;
};

/// Sampling used for every call in one trajectory. Each call's request seed is
/// derived from `seed` and the call's position, so replays line up exactly.
struct SolveSettings {
  double temperature = 0.0;
  std::uint64_t seed = 0;
};

SolveSettings inference_settings(const RunConfig& config, std::string_view question_id);

/// Request seed for the `step`-th call made under `base` (31-bit, so it fits
/// every server's seed field).
std::int64_t call_seed(std::uint64_t base, std::uint64_t step);

/// Prompt used to ask the decomposer about `example`.
std::string decompose_prompt_for(const QAExample& example);

/// Solves `example` given an already sampled decomposition response: the
/// shared tail of inference and rollouts. `index` is required for multi-hop QA
/// and fact verification; `executor` is used for program-style document math.
Trajectory solve_with_decomposition(const QAExample& example, std::string decomposition_raw,
                                    const InvertedIndex* index, Gateway& gateway,
                                    const RunConfig& config, const ProgramExecutor* executor,
                                    const SolveSettings& settings);

Trajectory answer_multihop(const QAExample& example, const InvertedIndex& index, Gateway& gateway,
                           const RunConfig& config);

Trajectory verify_claim(const QAExample& example, const InvertedIndex& index, Gateway& gateway,
                        const RunConfig& config);

/// Chain style unless program style is selected (explicitly, or by `auto`
/// with an executor present). Program style without an executor throws
/// Error(precondition).
Trajectory solve_document(const QAExample& example, Gateway& gateway, const RunConfig& config,
                          const ProgramExecutor* executor = nullptr);

/// Dispatches on example.task.
Trajectory run_example(const QAExample& example, const InvertedIndex* index, Gateway& gateway,
                       const RunConfig& config, const ProgramExecutor* executor = nullptr);

/// Runs every example with up to `jobs` workers. Output order follows input
/// order. The first failure (in input order) is rethrown after all workers stop.
std::vector<Trajectory> run_dataset(std::span<const QAExample> examples, const InvertedIndex* index,
                                    Gateway& gateway, const RunConfig& config,
                                    const ProgramExecutor* executor = nullptr, int jobs = 1);

/// Runs fn(i) for i in [0, count) on up to `jobs` threads; rethrows the
/// lowest-index exception.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace acesearcher
