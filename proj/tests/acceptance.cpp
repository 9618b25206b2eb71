// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance <path to the acesearcher executable>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "acesearcher/evalkit.hpp"
#include "acesearcher/selfplay.hpp"
#include "acesearcher/theory.hpp"
#include "support.hpp"

using namespace acesearcher;
using nlohmann::json;

namespace {

struct Verdict {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void criterion(int number, const std::string& title, double limit_s, const std::function<Verdict()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = limit_s <= 0 || elapsed < limit_s;
  const bool ok = v.ok && in_time;
  if (!ok) ++failures;
  char timing[96];
  if (limit_s > 0)
    std::snprintf(timing, sizeof timing, "%.3fs < %.0fs", elapsed, limit_s);
  else
    std::snprintf(timing, sizeof timing, "%.3fs", elapsed);
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << number << ": " << title << " [" << v.detail << "; "
            << timing << (in_time ? "" : " exceeded") << "]" << std::endl;
}

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// 1-3

Verdict kl_identity() {
  std::mt19937_64 rng(1);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t nz = 1 + rng() % 5, nwa = 1 + rng() % 6;
    auto env = theory::random_env(rng, nz, nwa, 0.1 + (rng() % 100) / 10.0);
    const auto gap = theory::kl_decomposition_gap(env, theory::random_policy(rng, nz, nwa));
    worst = std::max(worst, std::fabs(gap.lhs - gap.rhs));
  }
  return {worst <= 1e-9, "1000 envs, max |lhs-rhs| = " + sci(worst) + " <= 1e-9"};
}

Verdict grid_optimality() {
  std::mt19937_64 rng(2);
  const double betas[] = {0.1, 1.0, 10.0};
  double worst = INFINITY;
  for (int i = 0; i < 20; ++i) {
    auto env = theory::random_env(rng, 2, 2, betas[i % 3]);
    const auto g = theory::grid_verify_optimality(env, 0.02);
    worst = std::min(worst, g.closed_form_value - g.grid_max_value);
  }
  return {worst >= -1e-3, "20 envs, min(closed form - grid max) = " + sci(worst) + " >= -1e-3"};
}

Verdict concentration() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> low(0.0, 0.5);
  double weakest = 1.0;
  bool monotone = true;
  auto run = [&](const theory::DiscreteSelfPlayEnv& env, std::size_t z, std::size_t w) {
    const auto seq = theory::iterate_policy_update(env, 20);
    for (std::size_t t = 1; t < seq.size(); ++t)
      if (theory::joint_mass(seq[t], z, w) < theory::joint_mass(seq[t - 1], z, w)) monotone = false;
    weakest = std::min(weakest, theory::joint_mass(seq.back(), z, w));
  };
  // the single-decomposition coin: mass e^20 / (1 + e^20)
  theory::DiscreteSelfPlayEnv coin{{"z"}, {"right", "wrong"}, {1.0}, {{0.5, 0.5}}, {{1.0, 0.0}}, 1.0};
  run(coin, 0, 0);
  for (int i = 0; i < 100; ++i) {
    const std::size_t nz = 1 + rng() % 4, nwa = 2 + rng() % 4;
    auto env = theory::random_env(rng, nz, nwa, 0.1);
    for (auto& row : env.reward)
      for (auto& r : row) r = low(rng);
    const std::size_t z = rng() % nz, w = rng() % nwa;
    env.reward[z][w] = 1.0;
    run(env, z, w);
  }
  return {monotone && weakest > 0.999,
          "101 unique-argmax tables, 1 - min final mass = " + sci(1 - weakest) + (monotone ? ", monotone" : ", NOT monotone")};
}

// ---------------------------------------------------------------------------
// 4

RolloutTree grid_tree(const std::vector<std::vector<int>>& g) {
  RolloutTree tree;
  tree.question_id = "q";
  tree.decompose_prompt = "P";
  for (std::size_t i = 0; i < g.size(); ++i) {
    tree.decomposition_raws.push_back("### z" + std::to_string(i));
    tree.decompositions.push_back(parse_decomposition(tree.decomposition_raws.back()));
    std::vector<Trajectory> row;
    for (std::size_t j = 0; j < g[i].size(); ++j) {
      const std::string cell = std::to_string(i) + "." + std::to_string(j);
      Trajectory t;
      t.subquestion_prompts = {"S" + cell};
      t.subanswers = {"a" + cell};
      t.final_prompt = "F" + std::to_string(i);
      t.final_raw = "f" + cell;
      t.reward = {g[i][j], true, g[i][j]};
      row.push_back(t);
    }
    tree.trajectories.push_back(row);
  }
  tree.mean_rewards = row_means(tree.trajectories);
  return tree;
}

/// Brute-force reference written from the selection rule alone: integer row
/// sums, first index on ties, nothing emitted when the compared values tie.
std::vector<PreferencePair> reference_pairs(const std::vector<std::vector<int>>& g) {
  std::vector<PreferencePair> out;
  std::vector<int> sums;
  for (const auto& row : g) {
    int s = 0;
    for (int r : row) s += r;
    sums.push_back(s);
  }
  std::size_t best = 0, worst = 0;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    if (sums[i] > sums[best]) best = i;
    if (sums[i] < sums[worst]) worst = i;
  }
  if (sums[best] != sums[worst])
    out.push_back({"P", "### z" + std::to_string(best), "### z" + std::to_string(worst), PairSource::decompose, 0, "q", 0});
  int plus = -1, minus = -1;
  for (std::size_t j = 0; j < g[best].size(); ++j) {
    if (g[best][j] == 1 && plus < 0) plus = static_cast<int>(j);
    if (g[best][j] == 0 && minus < 0) minus = static_cast<int>(j);
  }
  if (plus >= 0 && minus >= 0) {
    const auto cell = [&](int j) { return std::to_string(best) + "." + std::to_string(j); };
    out.push_back({"S" + cell(plus), "a" + cell(plus), "a" + cell(minus), PairSource::subq, 0, "q", 1});
    out.push_back({"F" + std::to_string(best), "f" + cell(plus), "f" + cell(minus), PairSource::final, 0, "q", 0});
  }
  return out;
}

Verdict preference_oracle() {
  std::size_t mismatches = 0, pairs = 0;
  for (unsigned mask = 0; mask < (1u << 12); ++mask) {
    std::vector<std::vector<int>> g(3, std::vector<int>(4));
    for (int c = 0; c < 12; ++c) g[c / 4][c % 4] = (mask >> c) & 1;
    const auto got = build_preference_dataset(grid_tree(g), 0).pairs;
    const auto want = reference_pairs(g);
    pairs += got.size();
    if (got != want) ++mismatches;
  }
  return {mismatches == 0,
          "4096 grids, " + std::to_string(pairs) + " pairs, " + std::to_string(mismatches) + " mismatches"};
}

// ---------------------------------------------------------------------------
// 5

Verdict budget_law() {
  std::size_t bad = 0, cases = 0;
  for (int N = 1; N <= 256; ++N)
    for (int n = 1; n <= 64; ++n, ++cases)
      if (allocate_budget(N, n, 64).per_subquestion_k != std::max(1, N / n)) ++bad;

  // Pipeline runs over a corpus where every query matches many passages.
  std::mt19937_64 rng(5);
  std::vector<Passage> docs;
  for (int i = 0; i < 100; ++i) {
    std::string body;
    for (int w = 0; w < 12; ++w) body += "t" + std::to_string(rng() % 15) + " ";
    docs.push_back({"d" + std::to_string(i), "", body});
  }
  const auto index = build_index(docs);
  auto mock = std::make_shared<MockTransport>();
  mock->respond_with([](const json& request) {
    const std::string prompt = request["messages"][0]["content"];
    std::string reply = "<answer>t1</answer>";
    if (prompt.rfind("Please break down", 0) == 0) {
      const int n = std::stoi(prompt.substr(prompt.find("count ") + 6));
      reply.clear();
      for (int i = 1; i <= n; ++i)
        reply += "### t" + std::to_string(i) + " t" + std::to_string(i + 3) + (i > 1 ? " #1" : "") + "\n";
    } else if (prompt.find("Please answer the question \"t") != std::string::npos) {
      reply = "t7 t2";
    }
    return HttpResponse{200, make_completion_body({reply})};
  });
  Gateway gateway(fixtures::quick_options(), mock);
  std::size_t runs = 0, over = 0, largest = 0;
  for (int trial = 0; trial < 60; ++trial) {
    auto config = fixtures::test_config();
    config.doc_budget_N = 1 + static_cast<int>(rng() % 40);
    config.k = 1;
    const int n = 1 + static_cast<int>(rng() % 8);
    QAExample ex{"b" + std::to_string(trial), "t3 t9 count " + std::to_string(n), {"t1"}, TaskKind::multihop_qa,
                 std::nullopt};
    const auto t = answer_multihop(ex, index, gateway, config);
    ++runs;
    std::set<std::string> ids;
    for (const auto& p : t.merged_context) ids.insert(p.id);
    if (t.fallback || ids.size() != t.merged_context.size() ||
        t.merged_context.size() > static_cast<std::size_t>(config.doc_budget_N))
      ++over;
    largest = std::max(largest, t.merged_context.size());
  }
  return {bad == 0 && over == 0, std::to_string(cases) + " (N, n) cases, " + std::to_string(bad) +
                                     " wrong; " + std::to_string(runs) + " pipeline runs, " + std::to_string(over) +
                                     " over budget (largest context " + std::to_string(largest) + ")"};
}

// ---------------------------------------------------------------------------
// 6

Verdict bm25_oracle() {
  std::mt19937_64 rng(6);
  std::size_t queries = 0, mismatches = 0;
  for (int c = 0; c < 50; ++c) {
    const std::size_t n_docs = 1 + rng() % 100;
    const int vocab = 5 + static_cast<int>(rng() % 40);
    std::vector<Passage> docs;
    std::vector<std::vector<std::string>> toks;
    for (std::size_t i = 0; i < n_docs; ++i) {
      std::string body;
      for (std::size_t w = 0, len = 1 + rng() % 40; w < len; ++w) body += "w" + std::to_string(rng() % vocab) + " ";
      docs.push_back({"d" + std::to_string(i), "", body});
      toks.push_back(tokenize(body));
    }
    double avgdl = 0;
    for (const auto& t : toks) avgdl += static_cast<double>(t.size());
    avgdl /= static_cast<double>(n_docs);
    const auto index = build_index(docs, 0.9, 0.4);
    for (int q = 0; q < 10; ++q, ++queries) {
      std::vector<std::string> terms;
      for (std::size_t i = 0, len = 1 + rng() % 20; i < len; ++i) terms.push_back("w" + std::to_string(rng() % (vocab + 5)));
      std::string query;
      for (const auto& t : terms) query += t + " ";
      std::vector<std::pair<double, std::size_t>> want;
      for (std::size_t d = 0; d < n_docs; ++d) {
        double s = 0;
        bool hit = false;
        for (const auto& term : terms) {
          const double tf = static_cast<double>(std::count(toks[d].begin(), toks[d].end(), term));
          if (tf == 0) continue;
          hit = true;
          double df = 0;
          for (const auto& t : toks) df += std::find(t.begin(), t.end(), term) != t.end();
          const double N = static_cast<double>(n_docs);
          s += std::log(1 + (N - df + 0.5) / (df + 0.5)) * tf * 1.9 /
               (tf + 0.9 * (0.6 + 0.4 * static_cast<double>(toks[d].size()) / avgdl));
        }
        if (hit) want.emplace_back(s, d);
      }
      std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      const std::size_t k = 1 + rng() % 20;
      const auto got = index.search(query, k);
      bool same = got.size() == std::min(k, want.size());
      for (std::size_t i = 0; same && i < got.size(); ++i)
        same = got[i].ordinal == want[i].second && std::fabs(got[i].score - want[i].first) <= 1e-9;
      if (!same) ++mismatches;
    }
  }
  return {mismatches == 0, "50 corpora, " + std::to_string(queries) + " queries, " + std::to_string(mismatches) +
                               " ranking mismatches"};
}

// ---------------------------------------------------------------------------
// 7

Verdict fixture_case(const std::function<Trajectory()>& run, const std::string& expected, bool numeric) {
  const auto start = std::chrono::steady_clock::now();
  const auto t = run();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool answer_ok = numeric ? numeric_match(t.final_answer, expected) == 1 : t.final_answer == expected;
  return {answer_ok && t.reward.reward == 1 && elapsed < 1.0,
          "\"" + t.final_answer + "\" reward " + std::to_string(t.reward.reward) + " in " + sci(elapsed) + "s"};
}

Verdict worked_examples() {
  const auto index = build_index(fixtures::corpus());
  const auto config = fixtures::test_config();
  std::vector<Verdict> parts;
  parts.push_back(fixture_case(
      [&] {
        fixtures::MockSetup s;
        fixtures::script_vera(*s.mock);
        return answer_multihop(fixtures::vera_barbosa(), index, s.gateway, config);
      },
      "Lisbon District", false));
  parts.push_back(fixture_case(
      [&] {
        fixtures::MockSetup s;
        fixtures::script_taxi(*s.mock);
        return answer_multihop(fixtures::taxi_to_paradise(), index, s.gateway, config);
      },
      "Taxi To Paradise", false));
  parts.push_back(fixture_case(
      [&] {
        fixtures::MockSetup s;
        fixtures::script_asia(*s.mock, true);
        fixtures::ArithmeticExecutor executor;
        auto c = config;
        c.reasoning_style = ReasoningStyle::program;
        return solve_document(fixtures::asia_sales(), s.gateway, c, &executor);
      },
      "151.5705", true));
  parts.push_back(fixture_case(
      [&] {
        fixtures::MockSetup s;
        fixtures::script_asia(*s.mock, false);
        auto c = config;
        c.reasoning_style = ReasoningStyle::chain;
        return solve_document(fixtures::asia_sales(), s.gateway, c);
      },
      "151.5705", true));
  const char* labels[] = {"(a) ", "; (b) ", "; (c) PoT ", ", CoT "};
  Verdict v;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    v.ok = v.ok && parts[i].ok;
    v.detail += labels[i] + parts[i].detail;
  }
  return v;
}

// ---------------------------------------------------------------------------
// 8

std::string random_text(std::mt19937_64& rng, const std::vector<std::string>& words) {
  static const char* noise[] = {"", " ", ".", ",", "!", "  ", "'", "-"};
  std::string s;
  for (std::size_t i = 0, n = rng() % 6; i < n; ++i) {
    const auto& w = words[rng() % words.size()];
    s += (rng() % 3 == 0 ? std::string(1, static_cast<char>(std::toupper(w[0]))) + w.substr(1) : w);
    s += noise[rng() % 8];
    if (rng() % 2) s += " ";
  }
  return s;
}

Verdict metric_sanity() {
  std::mt19937_64 rng(8);
  const std::vector<std::string> words = {"the", "a", "an", "lisbon", "district", "paris", "taxi", "to", "paradise",
                                          "x", "1891", "and"};
  std::size_t violations = 0;
  for (int set = 0; set < 1000; ++set) {
    std::vector<QAExample> data;
    std::vector<Trajectory> preds;
    for (int i = 0, n = 1 + static_cast<int>(rng() % 10); i < n; ++i) {
      const std::string id = std::to_string(i);
      std::vector<std::string> golds;
      for (std::size_t g = 0, ng = 1 + rng() % 3; g < ng; ++g) golds.push_back(random_text(rng, words));
      data.push_back({id, "?", golds, TaskKind::multihop_qa, std::nullopt});
      Trajectory t;
      t.question_id = id;
      t.final_answer = rng() % 4 == 0 ? golds[0] : random_text(rng, words);
      preds.push_back(t);
    }
    const auto& all = *score_predictions(preds, data).row("all");
    if (all.em_mean > all.acc_mean || all.em_mean > all.f1_mean) ++violations;
  }
  std::size_t unstable = 0;
  static const std::string alphabet = "aAnNtThHeE .,;:!?'\"-()\t\n0123456789\xC3\xA9";
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    for (std::size_t c = 0, n = rng() % 30; c < n; ++c) s += alphabet[rng() % alphabet.size()];
    const auto once = normalize_answer(s);
    if (normalize_answer(once) != once) ++unstable;
  }
  return {violations == 0 && unstable == 0, "1000 sets, " + std::to_string(violations) +
                                                " em>acc/f1 violations; 10000 strings, " + std::to_string(unstable) +
                                                " non-idempotent"};
}

// ---------------------------------------------------------------------------
// 9

int shell(const std::string& command) {
  const int status = std::system(command.c_str());
  return status;
}

std::string shell_quote(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

Verdict determinism(const std::string& cli) {
  fixtures::TempDir dir;
  const std::vector<QAExample> data{fixtures::vera_barbosa(), fixtures::taxi_to_paradise()};
  {
    std::ofstream out(dir / "corpus.jsonl");
    write_corpus(out, fixtures::corpus());
    std::ofstream ds(dir / "data.jsonl");
    write_dataset(ds, data);
  }

  // Record a transcript by driving the same calls through a scripted endpoint.
  auto config = fixtures::test_config();
  config.m = 2;
  config.m_prime = 2;
  {
    // Rollouts of the first question see a second decomposition and some
    // wrong final answers, so every pair source shows up in the export.
    auto mock = std::make_shared<MockTransport>();
    const std::string wrong = "<answer>Porto</answer>";
    mock->on("Please break down the question \"In which state is Vera Barbosa",
             {fixtures::kVeraDecomposition, fixtures::kVeraDecomposition,
              "### Where was Vera Barbosa born?\n### In which state is #1 located?"})
        .on("Answer: Lisbon District", {fixtures::kVeraFinal, fixtures::kVeraFinal, wrong})
        .on("question \"Who is Vera Barbosa?\"", {"a Portuguese athlete", "a Portuguese athlete", "a hurdler"});
    fixtures::script_vera(*mock);
    fixtures::script_taxi(*mock);
    Gateway gateway(GatewayOptions::from_config(config),
                    std::make_shared<RecordingTransport>(mock, dir / "transcript.jsonl"));
    const auto index = build_index(fixtures::corpus());
    run_dataset(data, &index, gateway, config);
    sample_rollouts(data, &index, gateway, config);
  }

  const std::string common = " --set endpoint_url=http://mock.invalid/v1 --set api_key_env=ACESEARCHER_TEST_NO_KEY"
                             " --set m=2 --set m_prime=2 --replay " + shell_quote(dir / "transcript.jsonl");
  auto pass = [&](const std::string& tag, int jobs) {
    const std::string j = " --jobs " + std::to_string(jobs);
    const std::string quiet = " > " + shell_quote(dir / ("log" + tag)) + " 2>&1";
    int rc = shell(shell_quote(cli) + " index --corpus " + shell_quote(dir / "corpus.jsonl") + " --out " +
                   shell_quote(dir / ("index" + tag)) + quiet);
    rc |= shell(shell_quote(cli) + " run --dataset " + shell_quote(dir / "data.jsonl") + " --index " +
                shell_quote(dir / ("index" + tag)) + " --out " + shell_quote(dir / ("traj" + tag)) + common + j + quiet);
    rc |= shell(shell_quote(cli) + " rollout --dataset " + shell_quote(dir / "data.jsonl") + " --index " +
                shell_quote(dir / ("index" + tag)) + " --out " + shell_quote(dir / ("trees" + tag)) + common + j + quiet);
    rc |= shell(shell_quote(cli) + " build_prefs --trees " + shell_quote(dir / ("trees" + tag)) + " --out " +
                shell_quote(dir / ("prefs" + tag)) + " --set m=2 --set m_prime=2" + quiet);
    return rc;
  };
  if (pass("1", 1) != 0) return {false, "first invocation failed: " + fixtures::slurp(dir / "log1")};
  if (pass("2", 4) != 0) return {false, "second invocation failed: " + fixtures::slurp(dir / "log2")};

  const auto traj = fixtures::slurp(dir / "traj1");
  const auto prefs = fixtures::slurp(dir / "prefs1");
  const bool same = traj == fixtures::slurp(dir / "traj2") && prefs == fixtures::slurp(dir / "prefs2") &&
                    fixtures::slurp(dir / "trees1") == fixtures::slurp(dir / "trees2") &&
                    fixtures::slurp(dir / "index1") == fixtures::slurp(dir / "index2");
  const auto trajectories = load_trajectories(dir / "traj1");
  int reward = 0;
  for (const auto& t : trajectories) reward += t.reward.reward;
  const bool replayed = trajectories.size() == 2 && reward == 2;
  const auto header = json::parse(prefs.substr(0, prefs.find('\n')));
  const bool all_sources =
      header["counts"]["decompose"] > 0 && header["counts"]["subq"] > 0 && header["counts"]["final"] > 0;
  return {same && replayed && all_sources,
          std::string(same ? "byte-identical" : "DIFFERENT") + " trajectory (" + std::to_string(traj.size()) +
              " B), tree and preference (" + header["pairs"].dump() + " pairs) files; replayed reward " +
              std::to_string(reward) + "/2"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <acesearcher executable>\n";
    return 2;
  }
  const std::string cli = argv[1];
  criterion(1, "KL decomposition identity", 5, kl_identity);
  criterion(2, "closed-form optimality on the simplex grid", 60, grid_optimality);
  criterion(3, "iterated update concentrates on the argmax", 1, concentration);
  criterion(4, "preference builder matches the brute-force reference", 30, preference_oracle);
  criterion(5, "budget law and merged context size", 1, budget_law);
  criterion(6, "BM25 ranking matches brute-force scoring", 10, bm25_oracle);
  criterion(7, "worked examples end to end on the mock gateway", 0, worked_examples);
  criterion(8, "metric sanity and normalization idempotence", 5, metric_sanity);
  criterion(9, "run + rollout + build_prefs are byte-reproducible under replay", 0, [&] { return determinism(cli); });
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
