#include "quadclass/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "quadclass/error.hpp"
#include "quadclass/invariants.hpp"
#include "quadclass/parallel.hpp"
#include "quadclass/random.hpp"

namespace quadclass::data {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::generated: return "generated";
    case Provenance::imported: return "imported";
    case Provenance::derived: return "derived";
  }
  return "unknown";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "generated") return Provenance::generated;
  if (s == "imported") return Provenance::imported;
  if (s == "derived") return Provenance::derived;
  throw FormatError("unknown provenance '" + s + "'");
}

Dataset::Dataset(std::vector<FieldRecord> records, std::vector<std::uint8_t> coefficients,
                 std::size_t coeff_bound, Provenance provenance, std::string source)
    : records_(std::move(records)),
      coefficients_(std::move(coefficients)),
      coeff_bound_(coeff_bound),
      provenance_(provenance),
      source_(std::move(source)) {
  if (coefficients_.size() != records_.size() * coeff_bound_)
    throw std::invalid_argument("Dataset: coefficient matrix has " + std::to_string(coefficients_.size()) +
                                " bytes, expected " + std::to_string(records_.size() * coeff_bound_));
  for (std::size_t i = 1; i < records_.size(); ++i) {
    if (records_[i - 1].d >= records_[i].d)
      throw std::invalid_argument("Dataset: records must be strictly increasing in d (at d = " +
                                  std::to_string(records_[i].d) + ")");
  }
}

std::set<Int> Dataset::label_classes() const {
  std::set<Int> out;
  for (const auto& r : records_) out.insert(r.h);
  return out;
}

Dataset Dataset::subset(std::vector<std::size_t> indices, std::string source) const {
  std::sort(indices.begin(), indices.end());
  std::vector<FieldRecord> recs;
  std::vector<std::uint8_t> coeffs;
  recs.reserve(indices.size());
  coeffs.reserve(indices.size() * coeff_bound_);
  for (auto i : indices) {
    recs.push_back(records_.at(i));
    auto row = coefficients(i);
    coeffs.insert(coeffs.end(), row.begin(), row.end());
  }
  return Dataset(std::move(recs), std::move(coeffs), coeff_bound_, Provenance::derived, std::move(source));
}

Dataset Dataset::filter_classes(const std::set<Int>& classes) const {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (classes.contains(records_[i].h)) keep.push_back(i);
  }
  Dataset out = subset(std::move(keep), source_);
  out.provenance_ = provenance_;
  return out;
}

FieldRecord make_record(Int d, Int h, Int h_plus, double R, int unit_norm, double S_zeta,
                        double S_chi) {
  const auto disc = arith::discriminant(d);
  const auto profile = arith::ramification_profile(d);
  if (profile.n_d() > 3)
    throw Error("d = " + std::to_string(d) + " has " + std::to_string(profile.n_d()) +
                " ramified primes; records hold at most three");
  FieldRecord r;
  r.d = d;
  r.D = disc.D;
  r.h = h;
  r.h_plus = h_plus;
  r.R = R;
  r.n_d = profile.n_d();
  for (std::size_t i = 0; i < profile.primes.size(); ++i) r.p[i] = profile.primes[i];
  r.S_zeta = S_zeta;
  r.S_chi = S_chi;
  r.unit_norm = unit_norm;
  return r;
}

namespace {

struct ChunkResult {
  std::vector<FieldRecord> records;
  std::vector<std::uint8_t> coefficients;
};

}  // namespace

Dataset generate(const GenerateOptions& options) {
  if (options.max_D < 5) throw std::invalid_argument("generate: max_D must be >= 5");
  if (options.coeff_bound == 0) throw std::invalid_argument("generate: coefficient bound must be >= 1");
  const Int max_D = options.max_D;
  const std::size_t N = options.coeff_bound;

  const arith::SquarefreeSieve squarefree(static_cast<std::uint64_t>(max_D));
  const auto factor_table = std::make_shared<const arith::SmallestFactorTable>(
      static_cast<std::uint32_t>(std::max<Int>(max_D / 4, 16)));
  const arith::CoefficientSieve sieve(N);

  constexpr Int kChunk = 8192;
  const auto n_chunks = static_cast<std::size_t>((max_D - 2) / kChunk + 1);
  std::vector<ChunkResult> results(n_chunks);

  parallel_for(n_chunks, resolve_threads(options.threads), [&](std::size_t chunk) {
    invariants::ReducedFormCycles cycles(factor_table);
    std::vector<std::int8_t> chi(N);
    std::vector<std::uint8_t> coeff(N);
    ChunkResult& out = results[chunk];
    const Int lo = 2 + static_cast<Int>(chunk) * kChunk;
    const Int hi = std::min(max_D, lo + kChunk - 1);
    for (Int d = lo; d <= hi; ++d) {
      if (!squarefree(static_cast<std::uint64_t>(d))) continue;
      const Int D = d % 4 == 1 ? d : 4 * d;
      if (D > max_D) continue;

      const auto cf = invariants::omega_expansion(d);
      const int norm = cf.period.size() % 2 == 1 ? -1 : 1;
      const Int h_plus = cycles.narrow_class_number(D);
      const Int h = norm == -1 ? h_plus : h_plus / 2;
      if (!options.classes.contains(h)) continue;

      const double R = invariants::log_unit(invariants::fundamental_unit(d, cf), d);
      sieve.fill(D, chi, coeff);
      double S_zeta = 0.0;
      double S_chi = 0.0;
      for (std::size_t n = 1; n <= N; ++n) {
        S_zeta += static_cast<double>(coeff[n - 1]) / static_cast<double>(n);
        S_chi += static_cast<double>(chi[n - 1]) / static_cast<double>(n);
      }
      out.records.push_back(make_record(d, h, h_plus, R, norm, S_zeta, S_chi));
      out.coefficients.insert(out.coefficients.end(), coeff.begin(), coeff.end());
    }
  });

  std::vector<FieldRecord> records;
  std::vector<std::uint8_t> coefficients;
  std::size_t total = 0;
  for (const auto& r : results) total += r.records.size();
  records.reserve(total);
  coefficients.reserve(total * N);
  for (auto& r : results) {
    records.insert(records.end(), r.records.begin(), r.records.end());
    coefficients.insert(coefficients.end(), r.coefficients.begin(), r.coefficients.end());
    r = {};
  }
  std::string source = "generate max_D=" + std::to_string(max_D) + " classes=";
  bool first = true;
  for (auto c : options.classes) {
    source += (first ? "" : ",") + std::to_string(c);
    first = false;
  }
  source += " N=" + std::to_string(N);
  return Dataset(std::move(records), std::move(coefficients), N, Provenance::generated, std::move(source));
}

Dataset balanced_sample_13(const Dataset& full, std::uint64_t seed) {
  constexpr Int kBucket = 100'000;
  constexpr int kBuckets = 10;
  std::array<std::vector<std::size_t>, kBuckets> ones;
  std::array<std::vector<std::size_t>, kBuckets> threes;
  for (std::size_t i = 0; i < full.size(); ++i) {
    const auto& r = full.record(i);
    if (r.D > kBucket * kBuckets) continue;
    // D is never a multiple of 10^5 (25 | D is impossible), so buckets are disjoint.
    const auto bucket = static_cast<std::size_t>((r.D - 1) / kBucket);
    if (r.h == 1) ones[bucket].push_back(i);
    if (r.h == 3) threes[bucket].push_back(i);
  }

  std::vector<std::size_t> keep;
  for (int b = 0; b < kBuckets; ++b) {
    const auto need = threes[b].size();
    if (ones[b].size() < need)
      throw Error("balanced_sample_13: bucket " + std::to_string(b) + " has " +
                  std::to_string(ones[b].size()) + " class-1 fields but needs " + std::to_string(need));
    keep.insert(keep.end(), threes[b].begin(), threes[b].end());
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(b));
    auto& pool = ones[b];
    // Partial Fisher-Yates: the first `need` slots are the sample.
    for (std::size_t i = 0; i < need; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    keep.insert(keep.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(need));
  }
  return full.subset(std::move(keep), "balanced_sample_13 seed=" + std::to_string(seed) + " of " + full.source());
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("split: train fraction must lie in (0, 1)");
  std::map<Int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.record(i).h].push_back(i);

  // Largest-remainder apportionment of round(fraction * n) across classes.
  const auto target = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ds.size())));
  std::vector<std::pair<Int, std::size_t>> quota;
  std::vector<std::tuple<double, Int>> remainders;
  std::size_t assigned = 0;
  for (const auto& [h, idx] : by_class) {
    const double exact = train_fraction * static_cast<double>(idx.size());
    const auto base = static_cast<std::size_t>(std::floor(exact));
    quota.emplace_back(h, base);
    remainders.emplace_back(exact - static_cast<double>(base), h);
    assigned += base;
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) { return std::get<0>(a) != std::get<0>(b) ? std::get<0>(a) > std::get<0>(b) : std::get<1>(a) < std::get<1>(b); });
  for (std::size_t k = 0; assigned < target && k < remainders.size(); ++k, ++assigned) {
    for (auto& [h, q] : quota) {
      if (h == std::get<1>(remainders[k])) ++q;
    }
  }

  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  for (const auto& [h, q] : quota) {
    auto idx = by_class[h];
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(h));
    rng.shuffle(idx);
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(q));
    test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(q), idx.end());
  }
  const std::string tag = "split seed=" + std::to_string(seed);
  return {ds.subset(std::move(train), tag + " train"), ds.subset(std::move(test), tag + " test")};
}

Summary summarize(const Dataset& ds) {
  Summary s;
  const std::size_t limit = std::min<std::size_t>(ds.coeff_bound(), 1000);
  const auto primes = arith::primes_up_to(static_cast<std::uint32_t>(limit));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.record(i);
    for (int p : {2, 3, 5}) {
      if (static_cast<std::size_t>(p) <= ds.coeff_bound())
        ++s.small_prime_values[{r.h, p, ds.coefficient(i, static_cast<std::size_t>(p))}];
    }
    ++s.ramified[{r.h, r.n_d}];
    int detected = 0;
    for (auto p : primes) detected += ds.coefficient(i, p) == 1 ? 1 : 0;
    ++s.detected[{r.h, detected}];
  }
  return s;
}

namespace {

// Classes present in any table of the summary.
std::set<Int> summary_classes(const Summary& s) {
  std::set<Int> out;
  for (const auto& [key, count] : s.ramified) out.insert(key.first);
  return out;
}

template <typename Map, typename Key>
std::size_t count_or_zero(const Map& m, const Key& k) {
  const auto it = m.find(k);
  return it == m.end() ? 0 : it->second;
}

}  // namespace

// The tables emit explicit zero cells so structural zeros stay visible.

std::string small_prime_values_csv(const Summary& s) {
  std::string out = "h,p,value,count\n";
  for (auto h : summary_classes(s)) {
    for (int p : {2, 3, 5}) {
      for (int v = 0; v <= 2; ++v) {
        out += std::to_string(h) + "," + std::to_string(p) + "," + std::to_string(v) + "," +
               std::to_string(count_or_zero(s.small_prime_values, std::tuple<Int, int, int>{h, p, v})) + "\n";
      }
    }
  }
  return out;
}

std::string ramified_csv(const Summary& s) {
  int max_nd = 3;
  for (const auto& [key, count] : s.ramified) max_nd = std::max(max_nd, key.second);
  std::string out = "h,n_d,count\n";
  for (auto h : summary_classes(s)) {
    for (int n = 1; n <= max_nd; ++n)
      out += std::to_string(h) + "," + std::to_string(n) + "," +
             std::to_string(count_or_zero(s.ramified, std::pair<Int, int>{h, n})) + "\n";
  }
  return out;
}

std::string detected_csv(const Summary& s) {
  int max_detected = 0;
  for (const auto& [key, count] : s.detected) max_detected = std::max(max_detected, key.second);
  std::string out = "h,detected,count\n";
  for (auto h : summary_classes(s)) {
    for (int n = 0; n <= max_detected; ++n)
      out += std::to_string(h) + "," + std::to_string(n) + "," +
             std::to_string(count_or_zero(s.detected, std::pair<Int, int>{h, n})) + "\n";
  }
  return out;
}

}  // namespace quadclass::data
