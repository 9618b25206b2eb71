#include "acesearcher/cli.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "acesearcher/config.hpp"
#include "acesearcher/evalkit.hpp"
#include "acesearcher/executor.hpp"
#include "acesearcher/selfplay.hpp"
#include "acesearcher/theory.hpp"

namespace acesearcher {

using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  int jobs = 1;
  std::string record;
  std::string replay;
  std::string executor_cmd;

  RunConfig config() const {
    return parse_config(config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path),
                        overrides);
  }
};

void add_config_options(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--set", o.overrides, "Override a config key (key=value)");
}

void add_generation_options(CLI::App* cmd, CommonOptions& o) {
  add_config_options(cmd, o);
  cmd->add_option("--jobs", o.jobs, "Examples processed concurrently")->check(CLI::PositiveNumber);
  cmd->add_option("--record", o.record, "Append request/response transcript to this file");
  cmd->add_option("--replay", o.replay, "Serve responses from a recorded transcript");
  cmd->add_option("--executor-cmd", o.executor_cmd, "Command that runs generated programs");
}

std::shared_ptr<Gateway> make_gateway(const RunConfig& config, const CommonOptions& o) {
  std::shared_ptr<Transport> transport;
  if (!o.replay.empty())
    transport = std::make_shared<ReplayTransport>(o.replay);
  else
    transport = std::make_shared<HttpTransport>();
  if (!o.record.empty()) transport = std::make_shared<RecordingTransport>(transport, o.record);
  return std::make_shared<Gateway>(GatewayOptions::from_config(config), transport);
}

std::unique_ptr<ProgramExecutor> make_executor(const CommonOptions& o) {
  if (o.executor_cmd.empty()) return nullptr;
  return std::make_unique<SubprocessExecutor>(o.executor_cmd);
}

/// Index from --index, or built on the fly from --corpus; only loaded when
/// some example needs retrieval.
std::optional<InvertedIndex> retrieval_index(std::span<const QAExample> examples, const std::string& index_path,
                                             const std::string& corpus_path, const RunConfig& config) {
  const bool needed = std::any_of(examples.begin(), examples.end(),
                                  [](const QAExample& e) { return e.task != TaskKind::document_math; });
  if (!needed) return std::nullopt;
  if (!index_path.empty()) return InvertedIndex::load(std::filesystem::path(index_path));
  if (!corpus_path.empty()) return build_index(load_corpus(corpus_path), config.bm25_k1, config.bm25_b);
  throw Error(ErrorCode::precondition, "the dataset has retrieval tasks; pass --index or --corpus");
}

void print_error(std::ostream& err, std::string_view code, std::string_view message) {
  err << json{{"error", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decompose-retrieve-solve pipeline and self-play data tooling", "acesearcher"};
  app.require_subcommand(1, 1);
  std::function<int()> action;
  CommonOptions common;

  // index
  auto* index_cmd = app.add_subcommand("index", "Build a BM25 index from a corpus file");
  std::string corpus, index_out;
  add_config_options(index_cmd, common);
  index_cmd->add_option("--corpus", corpus, "Corpus JSONL")->required();
  index_cmd->add_option("--out", index_out, "Index file to write")->required();
  index_cmd->callback([&] {
    action = [&] {
      const auto config = common.config();
      const auto index = build_index(load_corpus(corpus), config.bm25_k1, config.bm25_b);
      index.save(std::filesystem::path(index_out));
      out << json{{"command", "index"}, {"passages", index.passages().size()}, {"terms", index.term_count()},
                  {"out", index_out}}.dump()
          << '\n';
      return 0;
    };
  });

  // run
  auto* run_cmd = app.add_subcommand("run", "Answer every example of a dataset");
  std::string dataset, index_in, trajectories_out;
  add_generation_options(run_cmd, common);
  run_cmd->add_option("--dataset", dataset, "Dataset JSONL")->required();
  run_cmd->add_option("--index", index_in, "Index built by the index command");
  run_cmd->add_option("--corpus", corpus, "Corpus JSONL (indexed in memory)");
  run_cmd->add_option("--out", trajectories_out, "Trajectory file to write")->required();
  run_cmd->callback([&] {
    action = [&] {
      const auto config = common.config();
      const auto examples = load_dataset(dataset);
      const auto index = retrieval_index(examples, index_in, corpus, config);
      auto gateway = make_gateway(config, common);
      auto executor = make_executor(common);
      const auto trajectories = run_dataset(examples, index ? &*index : nullptr, *gateway, config, executor.get(),
                                            common.jobs);
      write_trajectories(std::filesystem::path(trajectories_out), trajectories);
      double reward = 0.0;
      for (const auto& t : trajectories) reward += t.reward.reward;
      out << json{{"command", "run"}, {"examples", trajectories.size()},
                  {"mean_reward", trajectories.empty() ? 0.0 : reward / static_cast<double>(trajectories.size())},
                  {"out", trajectories_out}}.dump()
          << '\n';
      return 0;
    };
  });

  // rollout
  auto* rollout_cmd = app.add_subcommand("rollout", "Sample m decompositions x m' solutions per example");
  std::string trees_out;
  add_generation_options(rollout_cmd, common);
  rollout_cmd->add_option("--dataset", dataset, "Dataset JSONL")->required();
  rollout_cmd->add_option("--index", index_in, "Index built by the index command");
  rollout_cmd->add_option("--corpus", corpus, "Corpus JSONL (indexed in memory)");
  rollout_cmd->add_option("--out", trees_out, "Rollout tree file to write")->required();
  rollout_cmd->callback([&] {
    action = [&] {
      const auto config = common.config();
      const auto examples = load_dataset(dataset);
      const auto index = retrieval_index(examples, index_in, corpus, config);
      auto gateway = make_gateway(config, common);
      auto executor = make_executor(common);
      const auto trees = sample_rollouts(examples, index ? &*index : nullptr, *gateway, config, executor.get(),
                                         common.jobs);
      write_rollout_trees(std::filesystem::path(trees_out), trees);
      std::size_t failed = 0;
      for (const auto& tree : trees)
        for (const auto& row : tree.trajectories)
          for (const auto& t : row) failed += t.failed ? 1 : 0;
      out << json{{"command", "rollout"}, {"trees", trees.size()}, {"failed_cells", failed}, {"out", trees_out}}.dump()
          << '\n';
      return 0;
    };
  });

  // build_prefs
  auto* prefs_cmd = app.add_subcommand("build_prefs", "Turn rollout trees into preference pairs");
  prefs_cmd->alias("build-prefs");
  std::vector<std::string> tree_files;
  std::string prefs_out;
  int iteration = 0;
  add_config_options(prefs_cmd, common);
  prefs_cmd->add_option("--trees", tree_files, "Rollout tree files")->required();
  prefs_cmd->add_option("--out", prefs_out, "Preference file to write")->required();
  prefs_cmd->add_option("--iteration", iteration, "Self-play iteration recorded on every pair")
      ->check(CLI::NonNegativeNumber);
  prefs_cmd->callback([&] {
    action = [&] {
      const auto config = common.config();
      const auto snapshot = ConfigSnapshot::of(config);
      std::vector<PreferenceDataset> datasets;
      for (const auto& file : tree_files)
        for (const auto& tree : load_rollout_trees(file))
          datasets.push_back(build_preference_dataset(tree, iteration, snapshot));
      export_preferences(std::filesystem::path(prefs_out), datasets);
      std::array<std::size_t, 3> counts{};
      for (const auto& d : datasets)
        for (std::size_t s = 0; s < counts.size(); ++s) counts[s] += d.counts[s];
      out << json{{"command", "build_prefs"},
                  {"decompose", counts[0]},
                  {"subq", counts[1]},
                  {"final", counts[2]},
                  {"out", prefs_out}}.dump()
          << '\n';
      return 0;
    };
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score a trajectory file against its dataset");
  std::string trajectories_in, report_out;
  std::optional<int> recall_k;
  add_config_options(eval_cmd, common);
  eval_cmd->add_option("--trajectories", trajectories_in, "Trajectory file from run")->required();
  eval_cmd->add_option("--dataset", dataset, "Dataset JSONL")->required();
  eval_cmd->add_option("--k", recall_k, "Also report answer recall over the first k merged passages");
  eval_cmd->add_option("--report", report_out, "Write the report as JSON");
  eval_cmd->callback([&] {
    action = [&] {
      const auto config = common.config();
      const auto trajectories = load_trajectories(trajectories_in);
      const auto examples = load_dataset(dataset);
      auto report = score_predictions(trajectories, examples, config.numeric_rel_tol);
      if (recall_k) {
        report.k = *recall_k;
        report.recall_at_k = answer_recall_at_k(trajectories, examples, *recall_k);
      }
      if (!report_out.empty()) {
        std::ofstream file(report_out, std::ios::binary | std::ios::trunc);
        if (!file) throw Error(ErrorCode::io, "cannot write '" + report_out + "'");
        file << to_json(report).dump(2) << '\n';
      }
      out << format_table(report);
      return 0;
    };
  });

  // theory_check
  auto* theory_cmd = app.add_subcommand("theory_check", "Numerically check the KL-regularized objective algebra");
  theory_cmd->alias("theory-check");
  std::optional<std::uint64_t> theory_seed;
  add_config_options(theory_cmd, common);
  theory_cmd->add_option("--seed", theory_seed, "Seed for the random environments (default: config seed)");
  theory_cmd->add_option("--report", report_out, "Write the report as JSON");
  theory_cmd->callback([&] {
    action = [&] {
      const auto config = common.config();
      theory::TheorySuiteOptions options;
      options.seed = theory_seed.value_or(config.seed);
      const auto report = theory::run_theory_suite(options);
      const auto doc = theory::to_json(report);
      if (!report_out.empty()) {
        std::ofstream file(report_out, std::ios::binary | std::ios::trunc);
        if (!file) throw Error(ErrorCode::io, "cannot write '" + report_out + "'");
        file << doc.dump(2) << '\n';
      }
      for (const auto& c : report.checks)
        out << (c.passed ? "PASS " : "FAIL ") << c.name << " measured=" << format_double(c.measured)
            << " threshold=" << format_double(c.threshold) << " (" << c.detail << ")\n";
      if (!report.passed()) {
        print_error(err, "check_failed", "theory suite has failing checks");
        return 1;
      }
      return 0;
    };
  });

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const Error& e) {
    print_error(err, to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
  }
  return 1;
}

}  // namespace acesearcher
