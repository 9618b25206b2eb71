#include "acesearcher/selfplay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "acesearcher/common.hpp"

namespace acesearcher {

using nlohmann::json;

namespace {

bool escapes_rollout(const Error& e) {
  return e.code() == ErrorCode::precondition || e.code() == ErrorCode::invalid_argument;
}

Trajectory failed_cell(const QAExample& example, const std::string& prompt, const std::string& raw,
                       const std::string& why) {
  Trajectory t;
  t.question_id = example.id;
  t.task = example.task;
  t.decompose_prompt = prompt;
  t.decomposition_raw = raw;
  t.failed = true;
  t.failure = why;
  return t;
}

std::uint64_t rollout_base(const RunConfig& config, std::string_view qid) {
  return stable_hash(std::to_string(config.seed) + "/rollout/" + std::string(qid));
}

std::size_t first_argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::size_t first_argmin(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

json decomposition_json(const Decomposition& d) { return d.templates; }

Decomposition decomposition_from(const json& templates) {
  Decomposition d;
  d.templates = templates.get<std::vector<std::string>>();
  for (const auto& t : d.templates) d.back_refs.push_back(find_back_references(t));
  return d;
}

json snapshot_json(const ConfigSnapshot& c) {
  return json{{"m", c.m},
              {"m_prime", c.m_prime},
              {"beta", c.beta},
              {"temperature_infer", c.temperature_infer},
              {"temperature_rollout", c.temperature_rollout}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Rollouts

std::vector<double> row_means(const std::vector<std::vector<Trajectory>>& grid) {
  std::vector<double> means;
  means.reserve(grid.size());
  for (const auto& row : grid) {
    double sum = 0.0;
    for (const auto& t : row) sum += t.reward.reward;
    means.push_back(row.empty() ? 0.0 : sum / static_cast<double>(row.size()));
  }
  return means;
}

void RolloutTree::validate() const {
  const std::size_t m = trajectories.size();
  if (decomposition_raws.size() != m || decompositions.size() != m || mean_rewards.size() != m)
    throw Error(ErrorCode::invalid_argument, "rollout tree '" + question_id + "' has mismatched row counts");
  for (std::size_t i = 0; i < m; ++i)
    if (trajectories[i].size() != trajectories.front().size())
      throw Error(ErrorCode::invalid_argument, "rollout tree '" + question_id + "' is ragged");
  const auto expected = row_means(trajectories);
  for (std::size_t i = 0; i < m; ++i) {
    if (std::fabs(expected[i] - mean_rewards[i]) > 1e-12 || mean_rewards[i] < 0.0 || mean_rewards[i] > 1.0)
      throw Error(ErrorCode::invalid_argument,
                  "rollout tree '" + question_id + "' row " + std::to_string(i) + " has a stale mean reward");
  }
}

RolloutTree sample_rollouts(const QAExample& example, const InvertedIndex* index, Gateway& gateway,
                            const RunConfig& config, const ProgramExecutor* executor) {
  if (config.m < 1 || config.m_prime < 1)
    throw Error(ErrorCode::precondition, "rollouts need m >= 1 and m_prime >= 1");

  RolloutTree tree;
  tree.question_id = example.id;
  tree.task = example.task;
  tree.decompose_prompt = decompose_prompt_for(example);
  const std::uint64_t base = rollout_base(config, example.id);

  for (int i = 0; i < config.m; ++i) {
    std::string raw;
    std::string sample_error;
    try {
      GenerationParams params;
      params.temperature = config.temperature_rollout;
      params.max_tokens = config.max_tokens_final;
      params.num_samples = 1;
      params.seed = call_seed(base, static_cast<std::uint64_t>(i));
      raw = gateway.complete(tree.decompose_prompt, params).front();
    } catch (const Error& e) {
      if (escapes_rollout(e)) throw;
      sample_error = e.what();
    }

    Decomposition parsed;
    try {
      if (sample_error.empty()) parsed = parse_decomposition(raw, config.max_subquestions);
    } catch (const DecompositionError&) {
    }

    std::vector<Trajectory> row;
    for (int j = 0; j < config.m_prime; ++j) {
      if (!sample_error.empty()) {
        row.push_back(failed_cell(example, tree.decompose_prompt, raw, sample_error));
        continue;
      }
      SolveSettings settings{config.temperature_rollout,
                             stable_hash(std::to_string(base) + "/" + std::to_string(i) + "/" + std::to_string(j))};
      try {
        row.push_back(solve_with_decomposition(example, raw, index, gateway, config, executor, settings));
      } catch (const Error& e) {
        if (escapes_rollout(e)) throw;
        row.push_back(failed_cell(example, tree.decompose_prompt, raw, e.what()));
      }
    }
    tree.decomposition_raws.push_back(std::move(raw));
    tree.decompositions.push_back(std::move(parsed));
    tree.trajectories.push_back(std::move(row));
  }
  tree.mean_rewards = row_means(tree.trajectories);
  return tree;
}

std::vector<RolloutTree> sample_rollouts(std::span<const QAExample> examples, const InvertedIndex* index,
                                         Gateway& gateway, const RunConfig& config,
                                         const ProgramExecutor* executor, int jobs) {
  std::vector<RolloutTree> out(examples.size());
  parallel_for(examples.size(), jobs,
               [&](std::size_t i) { out[i] = sample_rollouts(examples[i], index, gateway, config, executor); });
  return out;
}

// ---------------------------------------------------------------------------
// Preference pairs

std::string_view to_string(PairSource source) noexcept {
  switch (source) {
    case PairSource::decompose: return "decompose";
    case PairSource::subq: return "subq";
    case PairSource::final: return "final";
  }
  return "decompose";
}

PairSource parse_pair_source(std::string_view name) {
  if (name == "decompose") return PairSource::decompose;
  if (name == "subq") return PairSource::subq;
  if (name == "final") return PairSource::final;
  throw Error(ErrorCode::parse, "unknown pair source '" + std::string(name) + "'");
}

ConfigSnapshot ConfigSnapshot::of(const RunConfig& config) {
  return ConfigSnapshot{config.m, config.m_prime, config.beta, config.temperature_infer,
                        config.temperature_rollout};
}

void PreferenceDataset::add(PreferencePair pair) {
  if (pair.chosen == pair.rejected)
    throw Error(ErrorCode::invalid_argument, "preference pair with identical chosen and rejected text");
  ++counts[static_cast<std::size_t>(pair.source)];
  pairs.push_back(std::move(pair));
}

void PreferenceDataset::append(const PreferenceDataset& other) {
  for (const auto& p : other.pairs) add(p);
}

PreferenceDataset build_preference_dataset(const RolloutTree& tree, int iteration, const ConfigSnapshot& config) {
  tree.validate();
  PreferenceDataset out;
  out.iteration = iteration;
  out.config = config;
  if (tree.rows() == 0) return out;

  auto emit = [&](PairSource source, int position, const std::string& input, const std::string& chosen,
                  const std::string& rejected) {
    if (chosen.empty() || rejected.empty() || chosen == rejected) return;
    out.add(PreferencePair{input, chosen, rejected, source, iteration, tree.question_id, position});
  };

  const std::size_t best_row = first_argmax(tree.mean_rewards);
  const std::size_t worst_row = first_argmin(tree.mean_rewards);
  if (tree.mean_rewards[best_row] > tree.mean_rewards[worst_row])
    emit(PairSource::decompose, 0, tree.decompose_prompt, tree.decomposition_raws[best_row],
         tree.decomposition_raws[worst_row]);

  const auto& row = tree.trajectories[best_row];
  if (row.empty()) return out;
  std::vector<double> rewards;
  for (const auto& t : row) rewards.push_back(t.reward.reward);
  const Trajectory& plus = row[first_argmax(rewards)];
  const Trajectory& minus = row[first_argmin(rewards)];
  if (!(plus.reward.reward > minus.reward.reward)) return out;

  const std::size_t shared = std::min({plus.subanswers.size(), minus.subanswers.size(),
                                       plus.subquestion_prompts.size()});
  for (std::size_t i = 0; i < shared; ++i) {
    if (trim(plus.subanswers[i]) == trim(minus.subanswers[i])) continue;
    emit(PairSource::subq, static_cast<int>(i) + 1, plus.subquestion_prompts[i], plus.subanswers[i],
         minus.subanswers[i]);
  }
  emit(PairSource::final, 0, plus.final_prompt, plus.final_raw, minus.final_raw);
  return out;
}

void export_preferences(std::ostream& out, std::span<const PreferenceDataset> datasets) {
  std::vector<const PreferencePair*> pairs;
  std::array<std::size_t, 3> counts{};
  json iterations = json::array();
  for (const auto& d : datasets) {
    for (const auto& p : d.pairs) pairs.push_back(&p);
    for (std::size_t s = 0; s < counts.size(); ++s) counts[s] += d.counts[s];
    if (std::find(iterations.begin(), iterations.end(), d.iteration) == iterations.end())
      iterations.push_back(d.iteration);
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const PreferencePair* a, const PreferencePair* b) {
    if (a->question_id != b->question_id) return a->question_id < b->question_id;
    if (a->source != b->source) return a->source < b->source;
    return a->position < b->position;
  });

  json header{{"record", "header"},
              {"format", "acesearcher-preferences"},
              {"version", 1},
              {"config", datasets.empty() ? json(nullptr) : snapshot_json(datasets.front().config)},
              {"iterations", std::move(iterations)},
              {"counts",
               {{"decompose", counts[0]}, {"subq", counts[1]}, {"final", counts[2]}}},
              {"pairs", pairs.size()}};
  out << header.dump() << '\n';
  for (const auto* p : pairs) {
    json record{{"record", "pair"},
                {"question_id", p->question_id},
                {"iteration", p->iteration},
                {"source", to_string(p->source)},
                {"position", p->position},
                {"input", p->input},
                {"chosen", p->chosen},
                {"rejected", p->rejected}};
    out << record.dump() << '\n';
  }
}

void export_preferences(const std::filesystem::path& path, std::span<const PreferenceDataset> datasets) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path.string() + "'");
  export_preferences(out, datasets);
  if (!out) throw Error(ErrorCode::io, "failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Tree files

json to_json(const RolloutTree& tree) {
  json decompositions = json::array();
  for (const auto& d : tree.decompositions) decompositions.push_back(decomposition_json(d));
  json grid = json::array();
  for (const auto& row : tree.trajectories) {
    json cells = json::array();
    for (const auto& t : row) cells.push_back(to_json(t));
    grid.push_back(std::move(cells));
  }
  return json{{"question_id", tree.question_id},
              {"task", to_string(tree.task)},
              {"decompose_prompt", tree.decompose_prompt},
              {"decomposition_raws", tree.decomposition_raws},
              {"decompositions", std::move(decompositions)},
              {"mean_rewards", tree.mean_rewards},
              {"trajectories", std::move(grid)}};
}

RolloutTree rollout_tree_from_json(const json& j) {
  RolloutTree tree;
  try {
    tree.question_id = j.at("question_id").get<std::string>();
    tree.task = parse_task_kind(j.at("task").get<std::string>());
    tree.decompose_prompt = j.at("decompose_prompt").get<std::string>();
    tree.decomposition_raws = j.at("decomposition_raws").get<std::vector<std::string>>();
    for (const auto& d : j.at("decompositions")) tree.decompositions.push_back(decomposition_from(d));
    tree.mean_rewards = j.at("mean_rewards").get<std::vector<double>>();
    for (const auto& row : j.at("trajectories")) {
      std::vector<Trajectory> cells;
      for (const auto& t : row) cells.push_back(trajectory_from_json(t));
      tree.trajectories.push_back(std::move(cells));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed rollout tree: ") + e.what());
  }
  try {
    tree.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::parse, e.what());
  }
  return tree;
}

void write_rollout_trees(const std::filesystem::path& path, std::span<const RolloutTree> trees) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path.string() + "'");
  for (const auto& t : trees) out << to_json(t).dump() << '\n';
  if (!out) throw Error(ErrorCode::io, "failed writing '" + path.string() + "'");
}

std::vector<RolloutTree> read_rollout_trees(std::istream& in, std::string_view source) {
  std::vector<RolloutTree> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = std::string(source) + ":" + std::to_string(lineno) + ": ";
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded()) throw Error(ErrorCode::parse, where + "malformed record");
    try {
      out.push_back(rollout_tree_from_json(record));
    } catch (const Error& e) {
      throw Error(ErrorCode::parse, where + e.what());
    }
  }
  return out;
}

std::vector<RolloutTree> load_rollout_trees(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
  return read_rollout_trees(in, path.string());
}

}  // namespace acesearcher
