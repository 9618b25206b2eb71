#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "acesearcher/pipeline.hpp"

namespace acesearcher {

/// m sampled decompositions for one question, each solved m' times.
struct RolloutTree {
  std::string question_id;
  TaskKind task = TaskKind::multihop_qa;
  std::string decompose_prompt;
  std::vector<std::string> decomposition_raws;  // one per row; empty if sampling failed
  std::vector<Decomposition> decompositions;    // empty when a raw sample does not parse
  std::vector<std::vector<Trajectory>> trajectories;
  std::vector<double> mean_rewards;

  std::size_t rows() const noexcept { return trajectories.size(); }
  /// Throws Error(invalid_argument) when the grid is ragged or a mean is stale.
  void validate() const;
  bool operator==(const RolloutTree&) const = default;
};

/// Samples config.m decompositions at the rollout temperature and solves each
/// config.m_prime times. A cell whose generation fails is kept with reward 0
/// and `failed` set; only precondition and argument errors escape.
RolloutTree sample_rollouts(const QAExample& example, const InvertedIndex* index, Gateway& gateway,
                            const RunConfig& config, const ProgramExecutor* executor = nullptr);

std::vector<RolloutTree> sample_rollouts(std::span<const QAExample> examples, const InvertedIndex* index,
                                         Gateway& gateway, const RunConfig& config,
                                         const ProgramExecutor* executor = nullptr, int jobs = 1);

/// Arithmetic mean of row rewards.
std::vector<double> row_means(const std::vector<std::vector<Trajectory>>& grid);

enum class PairSource { decompose, subq, final };

std::string_view to_string(PairSource source) noexcept;
PairSource parse_pair_source(std::string_view name);

struct PreferencePair {
  std::string input;
  std::string chosen;
  std::string rejected;
  PairSource source = PairSource::decompose;
  int iteration = 0;
  std::string question_id;
  int position = 0;  // 1-based subquestion for subq pairs, 0 otherwise

  bool operator==(const PreferencePair&) const = default;
};

struct ConfigSnapshot {
  int m = 0;
  int m_prime = 0;
  double beta = 0.0;
  double temperature_infer = 0.0;
  double temperature_rollout = 0.0;

  static ConfigSnapshot of(const RunConfig& config);
  bool operator==(const ConfigSnapshot&) const = default;
};

struct PreferenceDataset {
  int iteration = 0;
  std::vector<PreferencePair> pairs;
  std::array<std::size_t, 3> counts{};  // indexed by PairSource
  ConfigSnapshot config;

  std::size_t count(PairSource source) const noexcept { return counts[static_cast<std::size_t>(source)]; }
  void add(PreferencePair pair);
  void append(const PreferenceDataset& other);
  bool operator==(const PreferenceDataset&) const = default;
};

/// Best/worst selection with first-index ties and equal-reward discard.
PreferenceDataset build_preference_dataset(const RolloutTree& tree, int iteration,
                                           const ConfigSnapshot& config = {});

/// Header record, then pairs sorted by (question_id, source, position); the
/// sort is stable so equal keys keep input order.
void export_preferences(std::ostream& out, std::span<const PreferenceDataset> datasets);
void export_preferences(const std::filesystem::path& path, std::span<const PreferenceDataset> datasets);

nlohmann::json to_json(const RolloutTree& tree);
RolloutTree rollout_tree_from_json(const nlohmann::json& record);
void write_rollout_trees(const std::filesystem::path& path, std::span<const RolloutTree> trees);
std::vector<RolloutTree> read_rollout_trees(std::istream& in, std::string_view source);
std::vector<RolloutTree> load_rollout_trees(const std::filesystem::path& path);

}  // namespace acesearcher
