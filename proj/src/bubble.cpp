#include "quadclass/bubble.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include "quadclass/error.hpp"
#include "quadclass/parallel.hpp"
#include "quadclass/random.hpp"

namespace quadclass::bubble {

bool ranks_before(const TripleStats& a, const TripleStats& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  return a.triple < b.triple;
}

ValueDistribution value_distribution(const data::Dataset& ds, Int class_i, Int class_j, Triple triple) {
  if (class_i == class_j) throw std::invalid_argument("value_distribution: classes must differ");
  for (auto n : triple) {
    if (n < 1 || n > ds.coeff_bound())
      throw std::out_of_range("value_distribution: index " + std::to_string(n) + " outside [1, " +
                              std::to_string(ds.coeff_bound()) + "]");
  }
  ValueDistribution dist;
  dist.triple = triple;
  dist.class_i = class_i;
  dist.class_j = class_j;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const auto& rec = ds.record(r);
    dist.X = std::max(dist.X, rec.d);
    if (rec.h != class_i && rec.h != class_j) continue;
    const Value v{ds.coefficient(r, triple[0]), ds.coefficient(r, triple[1]), ds.coefficient(r, triple[2])};
    auto& slot = dist.counts[v];
    (rec.h == class_i ? slot.first : slot.second)++;
  }
  return dist;
}

double cost(std::size_t g_i, std::size_t g_j, std::size_t g_ij) {
  if (g_ij > std::min(g_i, g_j)) throw std::invalid_argument("cost: g_ij exceeds min(g_i, g_j)");
  if (g_ij == 0) return 0.0;
  const std::size_t denom = g_i + g_j - 2 * g_ij;
  if (denom == 0) return kInfiniteCost;
  return static_cast<double>(g_ij) / static_cast<double>(denom);
}

TripleStats g_counts(const ValueDistribution& dist) {
  TripleStats s;
  s.triple = dist.triple;
  for (const auto& [v, c] : dist.counts) {
    if (c.first > 0) ++s.g_i;
    if (c.second > 0) ++s.g_j;
    if (c.first > 0 && c.second > 0) ++s.g_ij;
  }
  s.cost = cost(s.g_i, s.g_j, s.g_ij);
  return s;
}

std::vector<std::uint32_t> parse_index_set(const std::string& spec) {
  auto number = [&](std::string_view s) {
    std::uint32_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v == 0)
      throw FormatError("index set '" + spec + "': bad index '" + std::string(s) + "'");
    return v;
  };
  std::vector<std::uint32_t> out;
  std::string_view rest = spec;
  while (true) {
    const auto comma = rest.find(',');
    std::string_view item = rest.substr(0, comma);
    bool primes_only = false;
    if (item.starts_with("p:")) {
      primes_only = true;
      item.remove_prefix(2);
    }
    if (item.empty()) throw FormatError("index set '" + spec + "': empty item");
    const auto dots = item.find("..");
    std::uint32_t lo;
    std::uint32_t hi;
    if (dots == std::string_view::npos) {
      lo = hi = number(item);
    } else {
      lo = number(item.substr(0, dots));
      hi = number(item.substr(dots + 2));
    }
    if (lo > hi) throw FormatError("index set '" + spec + "': empty range");
    if (primes_only) {
      for (auto p : arith::primes_up_to(hi)) {
        if (p >= lo) out.push_back(p);
      }
    } else {
      for (std::uint32_t n = lo; n <= hi; ++n) out.push_back(n);
    }
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ColumnStore::ColumnStore(const data::Dataset& ds, Int class_i, Int class_j, const std::vector<std::uint32_t>& indices)
    : class_i_(class_i), class_j_(class_j), indices_(indices) {
  if (class_i == class_j) throw std::invalid_argument("ColumnStore: classes must differ");
  for (auto n : indices_) {
    if (n < 1 || n > ds.coeff_bound())
      throw std::out_of_range("index " + std::to_string(n) + " exceeds the coefficient bound " +
                              std::to_string(ds.coeff_bound()));
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    if (ds.record(r).h == class_i) rows.push_back(r);
  }
  count_i_ = rows.size();
  for (std::size_t r = 0; r < ds.size(); ++r) {
    if (ds.record(r).h == class_j) rows.push_back(r);
  }
  count_j_ = rows.size() - count_i_;
  data_.resize(indices_.size() * rows.size());
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    std::uint8_t* col = data_.data() + k * rows.size();
    for (std::size_t r = 0; r < rows.size(); ++r) col[r] = ds.coefficient(rows[r], indices_[k]);
  }
}

TripleEvaluator::TripleEvaluator(const ColumnStore& store) : store_(store), seen_(std::size_t{1} << 24, 0) {}

TripleStats TripleEvaluator::evaluate(std::size_t a, std::size_t b, std::size_t c) {
  const std::uint8_t* x = store_.column(a);
  const std::uint8_t* y = store_.column(b);
  const std::uint8_t* z = store_.column(c);
  const std::size_t n_i = store_.count_i();
  const std::size_t n = store_.rows();
  touched_.clear();
  auto mark = [&](std::size_t r, std::uint8_t bit) {
    const std::uint32_t key = x[r] | (std::uint32_t{y[r]} << 8) | (std::uint32_t{z[r]} << 16);
    const std::uint8_t prev = seen_[key];
    if (prev == 0) touched_.push_back(key);
    seen_[key] = prev | bit;
  };
  for (std::size_t r = 0; r < n_i; ++r) mark(r, 1);
  for (std::size_t r = n_i; r < n; ++r) mark(r, 2);

  TripleStats s;
  const auto& idx = store_.indices();
  s.triple = {idx[a], idx[b], idx[c]};
  for (auto key : touched_) {
    const std::uint8_t v = seen_[key];
    s.g_i += v & 1;
    s.g_j += (v >> 1) & 1;
    s.g_ij += v == 3;
    seen_[key] = 0;
  }
  s.cost = cost(s.g_i, s.g_j, s.g_ij);
  return s;
}

namespace {

constexpr std::size_t kPairsPerChunk = 64;
constexpr std::uint64_t kSamplesPerChunk = 4096;

std::uint64_t choose3(std::uint64_t k) { return k < 3 ? 0 : k * (k - 1) * (k - 2) / 6; }

// Lexicographic enumeration of position triples a < b < c, split into chunks
// of consecutive (a, b) pairs. rank() is the triple's lexicographic rank.
class PairSpace {
 public:
  explicit PairSpace(std::size_t k) : k_(k) {
    for (std::size_t a = 0; a + 1 < k; ++a) {
      for (std::size_t b = a + 1; b < k; ++b) {
        if (b + 1 >= k) continue;
        pairs_.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)});
        ranks_.push_back(next_rank_);
        next_rank_ += k - 1 - b;
      }
    }
  }
  std::size_t chunks() const { return (pairs_.size() + kPairsPerChunk - 1) / kPairsPerChunk; }

  template <typename Fn>
  void for_chunk(std::size_t chunk, std::uint64_t budget, Fn&& fn) const {
    const std::size_t end = std::min(pairs_.size(), (chunk + 1) * kPairsPerChunk);
    for (std::size_t p = chunk * kPairsPerChunk; p < end; ++p) {
      const auto [a, b] = pairs_[p];
      for (std::size_t c = b + 1; c < k_; ++c) {
        if (ranks_[p] + (c - b - 1) >= budget) return;
        fn(a, b, c);
      }
    }
  }

 private:
  std::size_t k_;
  std::vector<std::array<std::uint32_t, 2>> pairs_;
  std::vector<std::uint64_t> ranks_;
  std::uint64_t next_rank_ = 0;
};

class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) {}
  void push(const TripleStats& s) {
    items_.push_back(s);
    if (k_ > 0 && items_.size() >= 4 * k_ + 64) prune();
  }
  void merge(TopK&& other) {
    for (auto& s : other.items_) push(s);
  }
  std::vector<TripleStats> finish() {
    std::sort(items_.begin(), items_.end(), ranks_before);
    items_.erase(std::unique(items_.begin(), items_.end(),
                             [](const auto& x, const auto& y) { return x.triple == y.triple; }),
                 items_.end());
    if (k_ > 0 && items_.size() > k_) items_.resize(k_);
    return std::move(items_);
  }

 private:
  void prune() {
    std::sort(items_.begin(), items_.end(), ranks_before);
    items_.erase(std::unique(items_.begin(), items_.end(),
                             [](const auto& x, const auto& y) { return x.triple == y.triple; }),
                 items_.end());
    if (items_.size() > k_) items_.resize(k_);
  }

  std::size_t k_;
  std::vector<TripleStats> items_;
};

}  // namespace

std::string to_string(SearchMode mode) { return mode == SearchMode::exact ? "exact" : "sampled"; }

SearchResult search(const data::Dataset& ds, Int class_i, Int class_j, const std::vector<std::uint32_t>& indices,
                    const SearchOptions& options) {
  const ColumnStore store(ds, class_i, class_j, indices);
  const std::size_t k = store.indices().size();
  SearchResult result;
  result.mode = options.mode;
  result.total_triples = choose3(k);
  if (k < 3) return result;
  const unsigned threads = resolve_threads(options.threads);

  std::vector<TopK> partial;
  if (options.mode == SearchMode::exact) {
    const PairSpace space(k);
    const std::uint64_t budget = std::min(options.budget, result.total_triples);
    partial.assign(space.chunks(), TopK(options.top_k));
    std::vector<std::unique_ptr<TripleEvaluator>> evals(worker_count(space.chunks(), threads));
    parallel_for_workers(space.chunks(), threads, [&](std::size_t chunk, unsigned worker) {
      if (!evals[worker]) evals[worker] = std::make_unique<TripleEvaluator>(store);
      auto& eval = *evals[worker];
      space.for_chunk(chunk, budget, [&](std::size_t a, std::size_t b, std::size_t c) {
        partial[chunk].push(eval.evaluate(a, b, c));
      });
    });
    result.evaluated = budget;
    result.heuristic = budget < result.total_triples;
  } else {
    if (options.budget == std::numeric_limits<std::uint64_t>::max())
      throw std::invalid_argument("search: sampled mode needs a finite budget");
    const std::uint64_t budget = options.budget;
    const auto chunks = static_cast<std::size_t>((budget + kSamplesPerChunk - 1) / kSamplesPerChunk);
    partial.assign(chunks, TopK(options.top_k));
    std::vector<std::unique_ptr<TripleEvaluator>> evals(worker_count(chunks, threads));
    parallel_for_workers(chunks, threads, [&](std::size_t chunk, unsigned worker) {
      if (!evals[worker]) evals[worker] = std::make_unique<TripleEvaluator>(store);
      auto& eval = *evals[worker];
      Rng rng = Rng::stream(options.seed, chunk);
      const std::uint64_t begin = chunk * kSamplesPerChunk;
      const std::uint64_t end = std::min(budget, begin + kSamplesPerChunk);
      for (std::uint64_t s = begin; s < end; ++s) {
        std::array<std::size_t, 3> t;
        t[0] = static_cast<std::size_t>(rng.below(k));
        do t[1] = static_cast<std::size_t>(rng.below(k)); while (t[1] == t[0]);
        do t[2] = static_cast<std::size_t>(rng.below(k)); while (t[2] == t[0] || t[2] == t[1]);
        std::sort(t.begin(), t.end());
        partial[chunk].push(eval.evaluate(t[0], t[1], t[2]));
      }
    });
    result.evaluated = budget;
    result.heuristic = true;
  }

  TopK merged(options.top_k);
  for (auto& p : partial) merged.merge(std::move(p));
  result.ranked = merged.finish();
  return result;
}

std::vector<Frontier> pure_frontier_table(const data::Dataset& ds, Int class_i, Int class_j,
                                          const std::vector<std::uint32_t>& indices, std::size_t max_pure_i,
                                          FrontierConstraint constraint, unsigned threads) {
  const ColumnStore store(ds, class_i, class_j, indices);
  const std::size_t k = store.indices().size();

  // Best pure_j per exact pure_i value.
  using Table = std::vector<Frontier>;
  auto empty_table = [&] {
    Table t(max_pure_i + 1);
    for (std::size_t c = 0; c <= max_pure_i; ++c) t[c].max_pure_i = c;
    return t;
  };
  auto offer = [](Frontier& f, const TripleStats& s) {
    if (!f.feasible || s.pure_j() > f.best_pure_j) {
      f.feasible = true;
      f.best_pure_j = s.pure_j();
      f.witnesses.assign(1, s);
    } else if (s.pure_j() == f.best_pure_j) {
      f.witnesses.push_back(s);
    }
  };

  Table exact = empty_table();
  if (k >= 3) {
    const PairSpace space(k);
    std::vector<Table> partial(space.chunks(), empty_table());
    const unsigned n_threads = resolve_threads(threads);
    std::vector<std::unique_ptr<TripleEvaluator>> evals(worker_count(space.chunks(), n_threads));
    parallel_for_workers(space.chunks(), n_threads, [&](std::size_t chunk, unsigned worker) {
      if (!evals[worker]) evals[worker] = std::make_unique<TripleEvaluator>(store);
      auto& eval = *evals[worker];
      space.for_chunk(chunk, std::numeric_limits<std::uint64_t>::max(),
                      [&](std::size_t a, std::size_t b, std::size_t c) {
                        const auto s = eval.evaluate(a, b, c);
                        if (s.pure_i() <= max_pure_i) offer(partial[chunk][s.pure_i()], s);
                      });
    });
    for (auto& t : partial) {
      for (std::size_t c = 0; c <= max_pure_i; ++c) {
        for (const auto& w : t[c].witnesses) offer(exact[c], w);
      }
    }
  }

  Table out = empty_table();
  for (std::size_t c = 0; c <= max_pure_i; ++c) {
    if (constraint == FrontierConstraint::exactly) {
      out[c] = std::move(exact[c]);
      out[c].max_pure_i = c;
    } else {
      for (std::size_t e = 0; e <= c; ++e) {
        for (const auto& w : exact[e].witnesses) offer(out[c], w);
      }
    }
    std::sort(out[c].witnesses.begin(), out[c].witnesses.end(),
              [](const auto& x, const auto& y) { return x.triple < y.triple; });
  }
  return out;
}

Frontier pure_frontier(const data::Dataset& ds, Int class_i, Int class_j, const std::vector<std::uint32_t>& indices,
                       std::size_t max_pure_i, FrontierConstraint constraint, unsigned threads) {
  auto table = pure_frontier_table(ds, class_i, class_j, indices, max_pure_i, constraint, threads);
  return std::move(table.back());
}

std::string bubble_chart_csv(const ValueDistribution& dist) {
  std::string out = "v1,v2,v3,f_i,f_j,total,purity\n";
  for (const auto& [v, c] : dist.counts) {
    const char* sep = ",";
    out += std::to_string(v[0]) + sep + std::to_string(v[1]) + sep + std::to_string(v[2]) + sep +
           std::to_string(c.first) + sep + std::to_string(c.second) + sep + std::to_string(c.first + c.second) + sep;
    if (c.first > 0 && c.second > 0) {
      out += "mixed";
    } else {
      out += "pure_" + std::to_string(c.first > 0 ? dist.class_i : dist.class_j);
    }
    out += '\n';
  }
  return out;
}

std::string search_jsonl(const SearchResult& result) {
  std::string out;
  const std::string mode = to_string(result.mode);
  for (const auto& s : result.ranked) {
    char cost_buf[64];
    if (s.cost == kInfiniteCost) {
      std::snprintf(cost_buf, sizeof cost_buf, "\"inf\"");
    } else {
      std::snprintf(cost_buf, sizeof cost_buf, "%.17g", s.cost);
    }
    out += "{\"triple\":[" + std::to_string(s.triple[0]) + "," + std::to_string(s.triple[1]) + "," +
           std::to_string(s.triple[2]) + "],\"g_i\":" + std::to_string(s.g_i) +
           ",\"g_ij\":" + std::to_string(s.g_ij) + ",\"g_j\":" + std::to_string(s.g_j) + ",\"cost\":" + cost_buf +
           ",\"mode\":\"" + mode + "\"}\n";
  }
  return out;
}

}  // namespace quadclass::bubble
