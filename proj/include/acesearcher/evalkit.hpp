#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "acesearcher/pipeline.hpp"

namespace acesearcher {

struct MetricsRow {
  std::string name;  // task name, or "all"
  double em_mean = 0.0;
  double f1_mean = 0.0;
  double acc_mean = 0.0;
  std::size_t n = 0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::optional<int> k;
  std::optional<double> recall_at_k;

  const MetricsRow* row(std::string_view name) const;
};

/// Per-example scores. Multi-hop QA: exact match, token F1, and normalized
/// containment as accuracy. Fact verification and document math: the
/// task-aware match for all three.
struct ExampleScore {
  double em = 0.0;
  double f1 = 0.0;
  double acc = 0.0;
};

ExampleScore score_example(const Trajectory& trajectory, const QAExample& example, double rel_tol = 0.01);

/// One row per task present plus an "all" row, in task order. Throws
/// Error(unknown_id) for a trajectory whose id is not in the dataset and
/// Error(duplicate_id) when an id is scored twice.
MetricsReport score_predictions(std::span<const Trajectory> trajectories, std::span<const QAExample> dataset,
                                double rel_tol = 0.01);
MetricsReport score_predictions(const std::filesystem::path& trajectories, const std::filesystem::path& dataset,
                                double rel_tol = 0.01);

/// Share of trajectories whose first k merged passages contain a gold answer
/// (normalized substring of title plus body). Throws Error(invalid_argument)
/// for k < 1.
double answer_recall_at_k(std::span<const Trajectory> trajectories, std::span<const QAExample> dataset, int k);
double answer_recall_at_k(const std::filesystem::path& trajectories, const std::filesystem::path& dataset, int k);

nlohmann::json to_json(const MetricsReport& report);
std::string format_table(const MetricsReport& report);

}  // namespace acesearcher
