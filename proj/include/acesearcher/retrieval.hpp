#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "acesearcher/common.hpp"
#include "acesearcher/domain.hpp"

namespace acesearcher {

/// Lowercases ASCII and splits on runs of characters that are neither ASCII
/// alphanumerics nor UTF-8 bytes (>= 0x80, kept so accented words survive).
std::vector<std::string> tokenize(std::string_view text);

struct Posting {
  std::uint32_t ordinal = 0;
  std::uint32_t term_frequency = 0;

  bool operator==(const Posting&) const = default;
};

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;

  bool operator==(const Bm25Params&) const = default;
};

struct SearchHit {
  const Passage* passage = nullptr;
  std::uint32_t ordinal = 0;
  double score = 0.0;
};

/// Immutable BM25 index over title + body of each passage. Searches may run
/// concurrently once built.
///
/// score(d, q) = sum over distinct query terms t (weighted by their count in q)
///   idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
/// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))
class InvertedIndex {
 public:
  InvertedIndex() = default;

  /// Throws Error(invalid_argument) on an empty corpus or out-of-range params.
  static InvertedIndex build(std::vector<Passage> passages, Bm25Params params = {});

  /// Top results by descending score, ties by ascending ordinal. Only passages
  /// sharing at least one term with the query are returned.
  std::vector<SearchHit> search(std::string_view query, std::size_t k) const;

  double idf(std::string_view term) const;

  const std::vector<Passage>& passages() const noexcept { return passages_; }
  const std::vector<std::uint32_t>& doc_lengths() const noexcept { return doc_lengths_; }
  double avg_doc_length() const noexcept { return avg_doc_length_; }
  const Bm25Params& params() const noexcept { return params_; }
  const std::vector<Posting>* postings(std::string_view term) const;
  std::size_t term_count() const noexcept { return postings_.size(); }

  /// Line-delimited format with a version header. save -> load -> save is
  /// byte-identical, and load reproduces an equal index.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(std::istream& in, std::string_view source = "<index>");
  static InvertedIndex load(const std::filesystem::path& path);

  bool operator==(const InvertedIndex& other) const;

  static constexpr std::string_view kFormat = "acesearcher-bm25";
  static constexpr int kVersion = 1;

 private:
  void finalize();

  std::vector<Passage> passages_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
  Bm25Params params_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

inline InvertedIndex build_index(std::vector<Passage> passages, double k1 = 0.9, double b = 0.4) {
  return InvertedIndex::build(std::move(passages), Bm25Params{k1, b});
}

struct RetrievalPlan {
  int total_budget_N = 0;
  int per_subquestion_k = 0;
  int n = 0;

  bool operator==(const RetrievalPlan&) const = default;
};

/// per_subquestion_k = max(1, floor(N / n)). Throws Error(invalid_argument)
/// for N < 1, n < 1 or n > max_subquestions.
RetrievalPlan allocate_budget(int N, int n, int max_subquestions);

/// Round-robin union by rank (every list's first passage, then every list's
/// second, ...), keeping the first occurrence of each passage id, stopping
/// once `cap` passages are collected.
std::vector<Passage> merge_contexts(const std::vector<std::vector<Passage>>& per_subquestion_docs,
                                    std::size_t cap = static_cast<std::size_t>(-1));

}  // namespace acesearcher
