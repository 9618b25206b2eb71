#include "acesearcher/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <thread>

#include "acesearcher/common.hpp"
#include "acesearcher/extraction.hpp"
#include "acesearcher/prompts.hpp"

namespace acesearcher {

using nlohmann::json;

namespace {

/// Issues the gateway calls of one trajectory, numbering them for seeds.
class CallSequence {
 public:
  CallSequence(Gateway& gateway, const SolveSettings& settings, std::uint64_t first_step)
      : gateway_(gateway), settings_(settings), step_(first_step) {}

  std::string next(const std::string& prompt, int max_tokens) {
    GenerationParams params;
    params.temperature = settings_.temperature;
    params.max_tokens = max_tokens;
    params.num_samples = 1;
    params.seed = call_seed(settings_.seed, step_++);
    return gateway_.complete(prompt, params).front();
  }

 private:
  Gateway& gateway_;
  SolveSettings settings_;
  std::uint64_t step_;
};

ReasoningStyle resolve_style(const RunConfig& config, const ProgramExecutor* executor) {
  switch (config.reasoning_style) {
    case ReasoningStyle::automatic:
      return executor ? ReasoningStyle::program : ReasoningStyle::chain;
    case ReasoningStyle::program:
      if (!executor)
        throw Error(ErrorCode::precondition,
                    "program-of-thought reasoning needs a program executor, but none was provided");
      return ReasoningStyle::program;
    case ReasoningStyle::chain:
      return ReasoningStyle::chain;
  }
  return ReasoningStyle::chain;
}

/// Last answer region if one exists, otherwise the whole response.
std::string lenient_answer(std::string_view raw) {
  auto regions = find_answer_regions(raw);
  if (!regions.empty()) return trim_copy(regions.back().in(raw));
  return trim_copy(raw);
}

std::string canonical_fact_answer(const std::string& answer) {
  switch (canonical_fact_label(answer)) {
    case FactLabel::supported: return "Yes";
    case FactLabel::not_supported: return "No";
    case FactLabel::other: return answer;
  }
  return answer;
}

std::vector<Passage> hit_passages(const std::vector<SearchHit>& hits) {
  std::vector<Passage> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(*h.passage);
  return out;
}

std::vector<std::string> subquestion_texts(const Trajectory& t) {
  std::vector<std::string> out;
  for (const auto& s : t.subquestions) out.push_back(s.text);
  return out;
}

ExecutionResult execute(const ProgramExecutor& executor, const std::string& program) {
  try {
    return executor.run(program);
  } catch (const std::exception& e) {
    return ExecutionResult{false, {}, e.what()};
  }
}

void score(Trajectory& t, const QAExample& example, const RunConfig& config, bool format_ok) {
  t.reward = compute_reward(t.final_answer, example.gold_answers, format_ok, example.task,
                            config.numeric_rel_tol);
}

// Multi-hop QA and fact verification share one skeleton; only prompts and
// the final answer's label space differ.
void solve_retrieval(Trajectory& t, const QAExample& example, const InvertedIndex& index,
                     const RunConfig& config, CallSequence& calls) {
  const bool fact = example.task == TaskKind::fact_verification;

  if (t.fallback) {
    t.merged_context = hit_passages(index.search(example.question, static_cast<std::size_t>(config.k)));
    const std::string context = format_passages(t.merged_context);
    t.final_prompt = render_prompt(fact ? PromptKind::direct_rag_fact : PromptKind::direct_rag_qa,
                                   {{"context", context}, {"question", example.question}});
    t.final_raw = calls.next(t.final_prompt, config.max_tokens_final);
    t.final_answer = lenient_answer(t.final_raw);
    if (fact) t.final_answer = canonical_fact_answer(t.final_answer);
    score(t, example, config, false);
    return;
  }

  const int n = static_cast<int>(t.decomposition.size());
  const RetrievalPlan plan = allocate_budget(config.doc_budget_N, n, config.max_subquestions);
  for (int i = 0; i < n; ++i) {
    std::string text = substitute_placeholders(t.decomposition.templates[static_cast<std::size_t>(i)],
                                               t.subanswers);
    auto docs = hit_passages(index.search(text, static_cast<std::size_t>(plan.per_subquestion_k)));
    std::string prompt = render_prompt(fact ? PromptKind::subq_fact : PromptKind::subq_qa,
                                       {{"passages", format_passages(docs)}, {"subquestion", text}});
    std::string answer = trim_copy(calls.next(prompt, config.max_tokens_subq));
    t.subquestions.push_back({i + 1, std::move(text)});
    t.subquestion_prompts.push_back(std::move(prompt));
    t.subanswers.push_back(std::move(answer));
    t.per_subq_docs.push_back(std::move(docs));
  }
  t.merged_context = merge_contexts(t.per_subq_docs, static_cast<std::size_t>(config.doc_budget_N));

  const std::string block = format_subquestion_answers(subquestion_texts(t), t.subanswers);
  if (fact) {
    t.final_prompt = render_prompt(PromptKind::final_fact, {{"subquestions", block}, {"question", example.question}});
  } else {
    t.final_prompt = render_prompt(PromptKind::final_qa, {{"passages", format_passages(t.merged_context)},
                                                          {"subquestions", block},
                                                          {"question", example.question}});
  }
  t.final_raw = calls.next(t.final_prompt, config.max_tokens_final);
  try {
    t.final_answer = extract_final_answer(t.final_raw, example.task);
  } catch (const Error&) {
    t.final_answer.clear();
  }
  if (fact) t.final_answer = canonical_fact_answer(t.final_answer);
  const bool format_ok = validate_trajectory_format(t.decomposition_raw, t.subanswers, t.final_raw,
                                                    example.task, config.max_subquestions);
  score(t, example, config, format_ok);
}

void solve_doc(Trajectory& t, const QAExample& example, const RunConfig& config,
               const ProgramExecutor* executor, ReasoningStyle style, CallSequence& calls) {
  const bool program = style == ReasoningStyle::program;
  const std::string& context = *example.inline_context;
  bool executed_ok = true;

  auto answer_from = [&](const std::string& response) -> std::string {
    if (program) {
      auto result = execute(*executor, extract_program(response));
      if (!result.ok) {
        executed_ok = false;
        if (t.failure.empty()) t.failure = "executor: " + result.error;
        return {};
      }
      return result.value;
    }
    auto boxed = find_boxed_regions(response);
    return boxed.empty() ? std::string{} : trim_copy(boxed.back().in(response));
  };

  if (t.fallback) {
    t.final_prompt = render_prompt(program ? PromptKind::direct_rag_doc_pot : PromptKind::direct_rag_doc_cot,
                                   {{"passage", context}, {"table", ""}, {"question", example.question}});
    t.final_raw = calls.next(t.final_prompt, config.max_tokens_final);
    t.final_answer = answer_from(t.final_raw);
    score(t, example, config, false);
    return;
  }

  const std::size_t n = t.decomposition.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::string text = substitute_placeholders(t.decomposition.templates[i], t.subanswers);
    std::string prompt = render_prompt(program ? PromptKind::subq_doc_pot : PromptKind::subq_doc_cot,
                                       {{"passages", context}, {"tables", ""}, {"subquestion", text}});
    std::string response = calls.next(prompt, config.max_tokens_final);
    std::string answer = program ? answer_from(response) : [&] {
      auto boxed = find_boxed_regions(response);
      return boxed.empty() ? trim_copy(response) : trim_copy(boxed.back().in(response));
    }();
    t.subquestions.push_back({static_cast<int>(i) + 1, std::move(text)});
    t.subquestion_prompts.push_back(std::move(prompt));
    t.subanswers.push_back(std::move(answer));
    t.per_subq_docs.emplace_back();
  }

  t.final_prompt = render_prompt(program ? PromptKind::final_doc_pot : PromptKind::final_doc_cot,
                                 {{"passage", context},
                                  {"question", example.question},
                                  {"decomposition", format_breakdown(subquestion_texts(t), t.subanswers)}});
  t.final_raw = calls.next(t.final_prompt, config.max_tokens_final);
  t.final_answer = answer_from(t.final_raw);
  const bool format_ok = executed_ok && validate_trajectory_format(t.decomposition_raw, t.subanswers,
                                                                   t.final_raw, example.task,
                                                                   config.max_subquestions);
  score(t, example, config, format_ok);
}

void require_task(const QAExample& example, TaskKind task) {
  if (example.task != task)
    throw Error(ErrorCode::precondition, "example '" + example.id + "' has task " +
                                             std::string(to_string(example.task)) + ", expected " +
                                             std::string(to_string(task)));
}

Trajectory infer(const QAExample& example, const InvertedIndex* index, Gateway& gateway,
                 const RunConfig& config, const ProgramExecutor* executor) {
  const SolveSettings settings = inference_settings(config, example.id);
  CallSequence calls(gateway, settings, 0);
  std::string raw = calls.next(decompose_prompt_for(example), config.max_tokens_final);
  return solve_with_decomposition(example, std::move(raw), index, gateway, config, executor, settings);
}

}  // namespace

std::int64_t call_seed(std::uint64_t base, std::uint64_t step) {
  const auto h = stable_hash(std::to_string(base) + ":" + std::to_string(step));
  return static_cast<std::int64_t>(h & 0x7fffffffULL);
}

SolveSettings inference_settings(const RunConfig& config, std::string_view question_id) {
  return SolveSettings{config.temperature_infer,
                       stable_hash(std::to_string(config.seed) + "/infer/" + std::string(question_id))};
}

std::string decompose_prompt_for(const QAExample& example) {
  switch (example.task) {
    case TaskKind::multihop_qa:
      return render_prompt(PromptKind::decompose_qa, {{"question", example.question}});
    case TaskKind::fact_verification:
      return render_prompt(PromptKind::decompose_fact, {{"claim", example.question}});
    case TaskKind::document_math:
      return render_prompt(PromptKind::decompose_doc, {{"passages", example.inline_context.value_or("")},
                                                       {"tables", ""},
                                                       {"question", example.question}});
  }
  throw Error(ErrorCode::invalid_argument, "unknown task");
}

Trajectory solve_with_decomposition(const QAExample& example, std::string decomposition_raw,
                                    const InvertedIndex* index, Gateway& gateway,
                                    const RunConfig& config, const ProgramExecutor* executor,
                                    const SolveSettings& settings) {
  Trajectory t;
  t.question_id = example.id;
  t.task = example.task;
  t.decompose_prompt = decompose_prompt_for(example);
  t.decomposition_raw = std::move(decomposition_raw);
  try {
    t.decomposition = parse_decomposition(t.decomposition_raw, config.max_subquestions);
  } catch (const DecompositionError&) {
    t.fallback = true;
  }

  CallSequence calls(gateway, settings, 1);
  if (example.task == TaskKind::document_math) {
    if (!example.inline_context)
      throw Error(ErrorCode::precondition, "document_math example '" + example.id + "' has no context");
    solve_doc(t, example, config, executor, resolve_style(config, executor), calls);
  } else {
    if (!index)
      throw Error(ErrorCode::precondition, "example '" + example.id + "' needs a retrieval index");
    solve_retrieval(t, example, *index, config, calls);
  }
  return t;
}

Trajectory answer_multihop(const QAExample& example, const InvertedIndex& index, Gateway& gateway,
                           const RunConfig& config) {
  require_task(example, TaskKind::multihop_qa);
  return infer(example, &index, gateway, config, nullptr);
}

Trajectory verify_claim(const QAExample& example, const InvertedIndex& index, Gateway& gateway,
                        const RunConfig& config) {
  require_task(example, TaskKind::fact_verification);
  if (trim(example.question).empty())
    throw Error(ErrorCode::precondition, "example '" + example.id + "' has an empty claim");
  return infer(example, &index, gateway, config, nullptr);
}

Trajectory solve_document(const QAExample& example, Gateway& gateway, const RunConfig& config,
                          const ProgramExecutor* executor) {
  require_task(example, TaskKind::document_math);
  if (!example.inline_context)
    throw Error(ErrorCode::precondition, "document_math example '" + example.id + "' has no context");
  resolve_style(config, executor);
  return infer(example, nullptr, gateway, config, executor);
}

Trajectory run_example(const QAExample& example, const InvertedIndex* index, Gateway& gateway,
                       const RunConfig& config, const ProgramExecutor* executor) {
  switch (example.task) {
    case TaskKind::multihop_qa:
    case TaskKind::fact_verification:
      if (!index)
        throw Error(ErrorCode::precondition, "example '" + example.id + "' needs a retrieval index");
      return example.task == TaskKind::multihop_qa ? answer_multihop(example, *index, gateway, config)
                                                   : verify_claim(example, *index, gateway, config);
    case TaskKind::document_math:
      return solve_document(example, gateway, config, executor);
  }
  throw Error(ErrorCode::invalid_argument, "unknown task");
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<Trajectory> run_dataset(std::span<const QAExample> examples, const InvertedIndex* index,
                                    Gateway& gateway, const RunConfig& config,
                                    const ProgramExecutor* executor, int jobs) {
  std::vector<Trajectory> out(examples.size());
  parallel_for(examples.size(), jobs,
               [&](std::size_t i) { out[i] = run_example(examples[i], index, gateway, config, executor); });
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

json to_json(const Trajectory& t) {
  json back_refs = json::array();
  for (const auto& refs : t.decomposition.back_refs) back_refs.push_back(refs);
  json subquestions = json::array();
  for (const auto& s : t.subquestions) subquestions.push_back({{"index", s.index}, {"text", s.text}});
  json per_subq = json::array();
  for (const auto& docs : t.per_subq_docs) {
    json list = json::array();
    for (const auto& p : docs) list.push_back(to_json(p));
    per_subq.push_back(std::move(list));
  }
  json merged = json::array();
  for (const auto& p : t.merged_context) merged.push_back(to_json(p));

  return json{{"question_id", t.question_id},
              {"task", to_string(t.task)},
              {"decompose_prompt", t.decompose_prompt},
              {"decomposition_raw", t.decomposition_raw},
              {"decomposition", {{"templates", t.decomposition.templates}, {"back_refs", std::move(back_refs)}}},
              {"fallback", t.fallback},
              {"subquestions", std::move(subquestions)},
              {"subquestion_prompts", t.subquestion_prompts},
              {"subanswers", t.subanswers},
              {"per_subq_docs", std::move(per_subq)},
              {"merged_context", std::move(merged)},
              {"final_prompt", t.final_prompt},
              {"final_raw", t.final_raw},
              {"final_answer", t.final_answer},
              {"reward", {{"em", t.reward.em}, {"format_ok", t.reward.format_ok}, {"reward", t.reward.reward}}},
              {"failed", t.failed},
              {"failure", t.failure}};
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  try {
    t.question_id = j.at("question_id").get<std::string>();
    t.task = parse_task_kind(j.at("task").get<std::string>());
    t.decompose_prompt = j.value("decompose_prompt", "");
    t.decomposition_raw = j.at("decomposition_raw").get<std::string>();
    const auto& d = j.at("decomposition");
    t.decomposition.templates = d.at("templates").get<std::vector<std::string>>();
    for (const auto& refs : d.at("back_refs")) t.decomposition.back_refs.push_back(refs.get<std::set<int>>());
    t.fallback = j.value("fallback", false);
    for (const auto& s : j.at("subquestions"))
      t.subquestions.push_back({s.at("index").get<int>(), s.at("text").get<std::string>()});
    t.subquestion_prompts = j.value("subquestion_prompts", std::vector<std::string>{});
    t.subanswers = j.at("subanswers").get<std::vector<std::string>>();
    for (const auto& docs : j.at("per_subq_docs")) {
      std::vector<Passage> list;
      for (const auto& p : docs) list.push_back(passage_from_json(p));
      t.per_subq_docs.push_back(std::move(list));
    }
    for (const auto& p : j.value("merged_context", json::array())) t.merged_context.push_back(passage_from_json(p));
    t.final_prompt = j.value("final_prompt", "");
    t.final_raw = j.at("final_raw").get<std::string>();
    t.final_answer = j.at("final_answer").get<std::string>();
    const auto& r = j.at("reward");
    t.reward = RewardRecord{r.at("em").get<int>(), r.at("format_ok").get<bool>(), r.at("reward").get<int>()};
    t.failed = j.value("failed", false);
    t.failure = j.value("failure", "");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed trajectory: ") + e.what());
  }
  return t;
}

void write_trajectories(std::ostream& out, std::span<const Trajectory> trajectories) {
  for (const auto& t : trajectories) out << to_json(t).dump() << '\n';
}

void write_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajectories) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path.string() + "'");
  write_trajectories(out, trajectories);
}

std::vector<Trajectory> read_trajectories(std::istream& in, std::string_view source) {
  std::vector<Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded())
      throw Error(ErrorCode::parse, std::string(source) + ":" + std::to_string(lineno) + ": malformed record");
    try {
      out.push_back(trajectory_from_json(record));
    } catch (const Error& e) {
      throw Error(ErrorCode::parse, std::string(source) + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Trajectory> load_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
  return read_trajectories(in, path.string());
}

}  // namespace acesearcher
