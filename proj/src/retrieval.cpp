#include "acesearcher/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "acesearcher/common.hpp"

namespace acesearcher {

using nlohmann::json;

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
      current.push_back(ch);
    } else if (c >= 'A' && c <= 'Z') {
      current.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

std::string index_text(const Passage& p) { return p.title + " " + p.body; }

void check_params(const Bm25Params& params) {
  if (!(params.k1 > 0.0)) throw Error(ErrorCode::invalid_argument, "BM25 k1 must be positive");
  if (!(params.b >= 0.0 && params.b <= 1.0))
    throw Error(ErrorCode::invalid_argument, "BM25 b must lie in [0, 1]");
}

}  // namespace

InvertedIndex InvertedIndex::build(std::vector<Passage> passages, Bm25Params params) {
  if (passages.empty()) throw Error(ErrorCode::invalid_argument, "cannot index an empty corpus");
  check_params(params);
  if (passages.size() > std::numeric_limits<std::uint32_t>::max())
    throw Error(ErrorCode::invalid_argument, "corpus too large");

  InvertedIndex index;
  index.params_ = params;
  index.passages_ = std::move(passages);
  index.doc_lengths_.reserve(index.passages_.size());
  for (std::uint32_t ord = 0; ord < index.passages_.size(); ++ord) {
    auto tokens = tokenize(index_text(index.passages_[ord]));
    index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    std::sort(tokens.begin(), tokens.end());
    for (std::size_t i = 0; i < tokens.size();) {
      std::size_t j = i;
      while (j < tokens.size() && tokens[j] == tokens[i]) ++j;
      index.postings_[tokens[i]].push_back(Posting{ord, static_cast<std::uint32_t>(j - i)});
      i = j;
    }
  }
  index.finalize();
  return index;
}

void InvertedIndex::finalize() {
  const double total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), 0.0);
  avg_doc_length_ = doc_lengths_.empty() ? 0.0 : total / static_cast<double>(doc_lengths_.size());
}

const std::vector<Posting>* InvertedIndex::postings(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  return it == postings_.end() ? nullptr : &it->second;
}

double InvertedIndex::idf(std::string_view term) const {
  const auto* list = postings(term);
  const double df = list ? static_cast<double>(list->size()) : 0.0;
  const double n = static_cast<double>(passages_.size());
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<SearchHit> InvertedIndex::search(std::string_view query, std::size_t k) const {
  if (k == 0 || passages_.empty()) return {};

  // Distinct query terms in order of first appearance, with their counts.
  std::vector<std::pair<std::string, int>> terms;
  for (auto& token : tokenize(query)) {
    auto it = std::find_if(terms.begin(), terms.end(), [&](const auto& t) { return t.first == token; });
    if (it == terms.end())
      terms.emplace_back(std::move(token), 1);
    else
      ++it->second;
  }

  std::vector<double> scores(passages_.size(), 0.0);
  std::vector<char> touched(passages_.size(), 0);
  std::vector<std::uint32_t> candidates;
  const double k1 = params_.k1;
  const double b = params_.b;
  for (const auto& [term, count] : terms) {
    const auto* list = postings(term);
    if (!list) continue;
    const double w = idf(term);
    for (const Posting& p : *list) {
      const double tf = p.term_frequency;
      const double norm = avg_doc_length_ > 0.0 ? doc_lengths_[p.ordinal] / avg_doc_length_ : 0.0;
      const double tf_part = tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
      scores[p.ordinal] += count * (w * tf_part);
      if (!touched[p.ordinal]) {
        touched[p.ordinal] = 1;
        candidates.push_back(p.ordinal);
      }
    }
  }

  auto better = [&](std::uint32_t a, std::uint32_t c) {
    if (scores[a] != scores[c]) return scores[a] > scores[c];
    return a < c;
  };
  const std::size_t take = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), better);

  std::vector<SearchHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    hits.push_back(SearchHit{&passages_[candidates[i]], candidates[i], scores[candidates[i]]});
  return hits;
}

bool InvertedIndex::operator==(const InvertedIndex& other) const {
  return passages_ == other.passages_ && doc_lengths_ == other.doc_lengths_ &&
         avg_doc_length_ == other.avg_doc_length_ && params_ == other.params_ &&
         postings_ == other.postings_;
}

// ---------------------------------------------------------------------------
// Persistence: header line, one line per passage, one line per term (sorted).

void InvertedIndex::save(std::ostream& out) const {
  json header{{"format", kFormat},
              {"version", kVersion},
              {"k1", params_.k1},
              {"b", params_.b},
              {"passages", passages_.size()},
              {"terms", postings_.size()}};
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < passages_.size(); ++i) {
    json record = to_json(passages_[i]);
    record["length"] = doc_lengths_[i];
    out << record.dump() << '\n';
  }
  std::vector<const std::string*> terms;
  terms.reserve(postings_.size());
  for (const auto& [term, list] : postings_) terms.push_back(&term);
  std::sort(terms.begin(), terms.end(), [](const auto* a, const auto* b) { return *a < *b; });
  for (const auto* term : terms) {
    json list = json::array();
    for (const Posting& p : postings_.at(*term)) list.push_back({p.ordinal, p.term_frequency});
    out << json{{"term", *term}, {"postings", std::move(list)}}.dump() << '\n';
  }
}

void InvertedIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write index '" + path.string() + "'");
  save(out);
  if (!out) throw Error(ErrorCode::io, "failed writing index '" + path.string() + "'");
}

InvertedIndex InvertedIndex::load(std::istream& in, std::string_view source) {
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) -> Error {
    return Error(ErrorCode::parse, std::string(source) + ":" + std::to_string(lineno) + ": " + what);
  };
  auto next_record = [&]() -> json {
    std::string line;
    if (!std::getline(in, line)) {
      ++lineno;
      throw fail("unexpected end of index file");
    }
    ++lineno;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) throw fail("malformed index record");
    return record;
  };

  InvertedIndex index;
  try {
    json header = next_record();
    if (header.value("format", "") != kFormat) throw fail("not an acesearcher BM25 index");
    if (header.value("version", 0) != kVersion)
      throw fail("unsupported index version " + std::to_string(header.value("version", 0)));
    index.params_ = Bm25Params{header.at("k1").get<double>(), header.at("b").get<double>()};
    check_params(index.params_);
    const auto n_passages = header.at("passages").get<std::size_t>();
    const auto n_terms = header.at("terms").get<std::size_t>();

    index.passages_.reserve(n_passages);
    for (std::size_t i = 0; i < n_passages; ++i) {
      json record = next_record();
      index.passages_.push_back(passage_from_json(record));
      index.doc_lengths_.push_back(record.at("length").get<std::uint32_t>());
    }
    std::vector<std::uint64_t> length_check(n_passages, 0);
    for (std::size_t i = 0; i < n_terms; ++i) {
      json record = next_record();
      std::vector<Posting> list;
      for (const auto& entry : record.at("postings")) {
        Posting p{entry.at(0).get<std::uint32_t>(), entry.at(1).get<std::uint32_t>()};
        if (p.ordinal >= n_passages) throw fail("posting references missing passage");
        length_check[p.ordinal] += p.term_frequency;
        list.push_back(p);
      }
      if (!index.postings_.emplace(record.at("term").get<std::string>(), std::move(list)).second)
        throw fail("duplicate term");
    }
    for (std::size_t i = 0; i < n_passages; ++i)
      if (length_check[i] != index.doc_lengths_[i]) throw fail("document length disagrees with postings");
  } catch (const json::exception& e) {
    throw fail(std::string("invalid index field: ") + e.what());
  }
  if (index.passages_.empty()) throw fail("index holds no passages");
  index.finalize();
  return index;
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open index '" + path.string() + "'");
  return load(in, path.string());
}

// ---------------------------------------------------------------------------

RetrievalPlan allocate_budget(int N, int n, int max_subquestions) {
  if (N < 1) throw Error(ErrorCode::invalid_argument, "document budget N must be positive");
  if (n < 1) throw Error(ErrorCode::invalid_argument, "subquestion count must be positive");
  if (n > max_subquestions)
    throw Error(ErrorCode::invalid_argument, "subquestion count " + std::to_string(n) +
                                                 " exceeds the limit of " + std::to_string(max_subquestions));
  return RetrievalPlan{N, std::max(1, N / n), n};
}

std::vector<Passage> merge_contexts(const std::vector<std::vector<Passage>>& per_subquestion_docs,
                                    std::size_t cap) {
  std::vector<Passage> merged;
  std::vector<std::string_view> seen;
  std::size_t depth = 0;
  for (const auto& list : per_subquestion_docs) depth = std::max(depth, list.size());
  for (std::size_t rank = 0; rank < depth; ++rank) {
    for (const auto& list : per_subquestion_docs) {
      if (merged.size() >= cap) return merged;
      if (rank >= list.size()) continue;
      const Passage& p = list[rank];
      if (std::find(seen.begin(), seen.end(), p.id) != seen.end()) continue;
      seen.push_back(p.id);
      merged.push_back(p);
    }
  }
  return merged;
}

}  // namespace acesearcher
