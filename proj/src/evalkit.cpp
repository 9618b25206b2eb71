#include "acesearcher/evalkit.hpp"

#include <cstdio>
#include <map>
#include <set>
#include <unordered_map>

#include "acesearcher/common.hpp"
#include "acesearcher/reward.hpp"

namespace acesearcher {

namespace {

using ExampleIndex = std::unordered_map<std::string_view, const QAExample*>;

ExampleIndex index_examples(std::span<const QAExample> dataset) {
  ExampleIndex index;
  for (const auto& ex : dataset)
    if (!index.emplace(ex.id, &ex).second) throw Error(ErrorCode::duplicate_id, "duplicate dataset id '" + ex.id + "'");
  return index;
}

const QAExample& lookup(const ExampleIndex& index, const Trajectory& t) {
  auto it = index.find(t.question_id);
  if (it == index.end())
    throw Error(ErrorCode::unknown_id, "trajectory id '" + t.question_id + "' is not in the dataset");
  return *it->second;
}

struct Sums {
  double em = 0, f1 = 0, acc = 0;
  std::size_t n = 0;

  void add(const ExampleScore& s) {
    em += s.em;
    f1 += s.f1;
    acc += s.acc;
    ++n;
  }

  MetricsRow row(std::string name) const {
    MetricsRow r;
    r.name = std::move(name);
    r.n = n;
    if (n) {
      r.em_mean = em / static_cast<double>(n);
      r.f1_mean = f1 / static_cast<double>(n);
      r.acc_mean = acc / static_cast<double>(n);
    }
    return r;
  }
};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string out = buf;
  // 0.7500 -> 0.75, 1.0000 -> 1
  if (out.find('.') != std::string::npos) {
    while (out.back() == '0') out.pop_back();
    if (out.back() == '.') out.pop_back();
  }
  return out;
}

}  // namespace

const MetricsRow* MetricsReport::row(std::string_view name) const {
  for (const auto& r : rows)
    if (r.name == name) return &r;
  return nullptr;
}

ExampleScore score_example(const Trajectory& t, const QAExample& example, double rel_tol) {
  if (example.task == TaskKind::multihop_qa) {
    return ExampleScore{static_cast<double>(exact_match(t.final_answer, example.gold_answers)),
                        token_f1(t.final_answer, example.gold_answers),
                        static_cast<double>(answer_containment(t.final_answer, example.gold_answers))};
  }
  const double hit = task_match(t.final_answer, example.gold_answers, example.task, rel_tol);
  return ExampleScore{hit, hit, hit};
}

MetricsReport score_predictions(std::span<const Trajectory> trajectories, std::span<const QAExample> dataset,
                                double rel_tol) {
  const auto index = index_examples(dataset);
  std::set<std::string_view> seen;
  std::map<TaskKind, Sums> per_task;
  Sums all;
  for (const auto& t : trajectories) {
    const QAExample& ex = lookup(index, t);
    if (!seen.insert(ex.id).second)
      throw Error(ErrorCode::duplicate_id, "more than one trajectory for id '" + t.question_id + "'");
    const auto s = score_example(t, ex, rel_tol);
    per_task[ex.task].add(s);
    all.add(s);
  }
  MetricsReport report;
  for (const auto& [task, sums] : per_task) report.rows.push_back(sums.row(std::string(to_string(task))));
  report.rows.push_back(all.row("all"));
  return report;
}

MetricsReport score_predictions(const std::filesystem::path& trajectories, const std::filesystem::path& dataset,
                                double rel_tol) {
  const auto traj = load_trajectories(trajectories);
  const auto examples = load_dataset(dataset);
  return score_predictions(traj, examples, rel_tol);
}

double answer_recall_at_k(std::span<const Trajectory> trajectories, std::span<const QAExample> dataset, int k) {
  if (k < 1) throw Error(ErrorCode::invalid_argument, "k must be at least 1");
  const auto index = index_examples(dataset);
  if (trajectories.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& t : trajectories) {
    const QAExample& ex = lookup(index, t);
    const std::size_t take = std::min(t.merged_context.size(), static_cast<std::size_t>(k));
    bool found = false;
    for (std::size_t i = 0; i < take && !found; ++i) {
      const std::string text = normalize_answer(t.merged_context[i].title + " " + t.merged_context[i].body);
      for (const auto& gold : ex.gold_answers) {
        if (text.find(normalize_answer(gold)) != std::string::npos) {
          found = true;
          break;
        }
      }
    }
    hits += found ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(trajectories.size());
}

double answer_recall_at_k(const std::filesystem::path& trajectories, const std::filesystem::path& dataset, int k) {
  if (k < 1) throw Error(ErrorCode::invalid_argument, "k must be at least 1");
  const auto traj = load_trajectories(trajectories);
  const auto examples = load_dataset(dataset);
  return answer_recall_at_k(traj, examples, k);
}

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"name", r.name}, {"em_mean", r.em_mean}, {"f1_mean", r.f1_mean}, {"acc_mean", r.acc_mean}, {"n", r.n}});
  nlohmann::json out{{"rows", std::move(rows)}};
  if (report.k) out["k"] = *report.k;
  if (report.recall_at_k) out["recall_at_k"] = *report.recall_at_k;
  return out;
}

std::string format_table(const MetricsReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %8s %8s %8s %6s\n", "dataset", "em_mean", "f1_mean", "acc_mean", "n");
  out += line;
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%-20s %8s %8s %8s %6zu\n", r.name.c_str(), fixed(r.em_mean, 4).c_str(),
                  fixed(r.f1_mean, 4).c_str(), fixed(r.acc_mean, 4).c_str(), r.n);
    out += line;
  }
  if (report.recall_at_k)
    out += "recall@" + std::to_string(report.k.value_or(0)) + " " + fixed(*report.recall_at_k, 4) + "\n";
  return out;
}

}  // namespace acesearcher
