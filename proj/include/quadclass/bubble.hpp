#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "quadclass/dataset.hpp"

namespace quadclass::bubble {

using arith::Int;
using Triple = std::array<std::uint32_t, 3>;
using Value = std::array<int, 3>;

inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

// Per-class record counts for every observed (a_l, a_m, a_n).
struct ValueDistribution {
  Triple triple{};
  Int class_i = 0;
  Int class_j = 0;
  Int X = 0;  // largest d in the dataset
  std::map<Value, std::pair<std::size_t, std::size_t>> counts;
};

struct TripleStats {
  Triple triple{};
  std::size_t g_i = 0;
  std::size_t g_j = 0;
  std::size_t g_ij = 0;
  double cost = 0.0;

  std::size_t pure_i() const { return g_i - g_ij; }
  std::size_t pure_j() const { return g_j - g_ij; }
  friend bool operator==(const TripleStats&, const TripleStats&) = default;
};

// Ascending cost, then lexicographic triple. +inf ranks last.
bool ranks_before(const TripleStats& a, const TripleStats& b);

// Records of classes other than i and j are ignored.
ValueDistribution value_distribution(const data::Dataset& ds, Int class_i, Int class_j, Triple triple);
TripleStats g_counts(const ValueDistribution& dist);

// g_ij / (g_i + g_j - 2 g_ij); kInfiniteCost when the denominator vanishes
// with g_ij > 0. Throws std::invalid_argument if g_ij > min(g_i, g_j).
double cost(std::size_t g_i, std::size_t g_j, std::size_t g_ij);

// Parses "3,5,7", "1..50", "p:1..1000" (primes in range) and comma-joined
// mixtures into a sorted, duplicate-free list. Throws FormatError.
std::vector<std::uint32_t> parse_index_set(const std::string& spec);

// Index-major byte columns of the two classes, class i rows first.
class ColumnStore {
 public:
  ColumnStore(const data::Dataset& ds, Int class_i, Int class_j, const std::vector<std::uint32_t>& indices);

  Int class_i() const { return class_i_; }
  Int class_j() const { return class_j_; }
  std::size_t count_i() const { return count_i_; }
  std::size_t count_j() const { return count_j_; }
  const std::vector<std::uint32_t>& indices() const { return indices_; }
  // Column for the k-th index of indices().
  const std::uint8_t* column(std::size_t k) const { return data_.data() + k * rows(); }
  std::size_t rows() const { return count_i_ + count_j_; }

 private:
  Int class_i_;
  Int class_j_;
  std::size_t count_i_ = 0;
  std::size_t count_j_ = 0;
  std::vector<std::uint32_t> indices_;
  std::vector<std::uint8_t> data_;
};

// Evaluates triples over a ColumnStore with a flat 2^24 seen-bitmap that is
// reset through the touched-key list. One instance per worker.
class TripleEvaluator {
 public:
  explicit TripleEvaluator(const ColumnStore& store);
  // Positions into store.indices().
  TripleStats evaluate(std::size_t a, std::size_t b, std::size_t c);

 private:
  const ColumnStore& store_;
  std::vector<std::uint8_t> seen_;
  std::vector<std::uint32_t> touched_;
};

enum class SearchMode { exact, sampled };

struct SearchOptions {
  SearchMode mode = SearchMode::exact;
  // Maximum number of triples evaluated. Exact mode enumerates in
  // lexicographic order and stops at the budget.
  std::uint64_t budget = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t seed = 0;
  std::size_t top_k = 10;  // 0 keeps every evaluated triple
  unsigned threads = 0;
};

struct SearchResult {
  std::vector<TripleStats> ranked;
  SearchMode mode = SearchMode::exact;
  // True unless every triple of the index set was evaluated.
  bool heuristic = false;
  std::uint64_t evaluated = 0;
  std::uint64_t total_triples = 0;
};

SearchResult search(const data::Dataset& ds, Int class_i, Int class_j, const std::vector<std::uint32_t>& indices,
                    const SearchOptions& options = {});

enum class FrontierConstraint { exactly, at_most };

struct Frontier {
  std::size_t max_pure_i = 0;
  // Triples satisfying the constraint exist; otherwise best_pure_j is 0 and
  // witnesses is empty.
  bool feasible = false;
  std::size_t best_pure_j = 0;
  std::vector<TripleStats> witnesses;  // lexicographic
};

// Largest pure_j over all triples of the index set whose pure_i equals
// (exactly) or does not exceed (at_most) max_pure_i, with every witness.
Frontier pure_frontier(const data::Dataset& ds, Int class_i, Int class_j, const std::vector<std::uint32_t>& indices,
                       std::size_t max_pure_i, FrontierConstraint constraint = FrontierConstraint::exactly,
                       unsigned threads = 0);

// Frontier for every constraint value 0..max_pure_i in one pass.
std::vector<Frontier> pure_frontier_table(const data::Dataset& ds, Int class_i, Int class_j,
                                          const std::vector<std::uint32_t>& indices, std::size_t max_pure_i,
                                          FrontierConstraint constraint = FrontierConstraint::exactly,
                                          unsigned threads = 0);

// CSV "v1,v2,v3,f_i,f_j,total,purity" with purity pure_<i>, pure_<j> or mixed.
std::string bubble_chart_csv(const ValueDistribution& dist);

std::string to_string(SearchMode mode);
// One JSON object per line: triple, g_i, g_ij, g_j, cost ("inf" when infinite), mode.
std::string search_jsonl(const SearchResult& result);

}  // namespace quadclass::bubble
