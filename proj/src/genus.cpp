#include "quadclass/genus.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>

#include <json.hpp>

#include "quadclass/invariants.hpp"
#include "quadclass/parallel.hpp"

namespace quadclass::genus {

std::string to_string(Parity p) { return p == Parity::odd ? "odd" : "even"; }

std::string lemma_id(Lemma lemma) {
  switch (lemma) {
    case Lemma::one_ramified: return "1rp";
    case Lemma::prime_one_mod4: return "p14";
    case Lemma::even: return "even";
    case Lemma::three_ramified: return "3rp";
    case Lemma::second_ramified: return "srp";
    case Lemma::two_rank: return "2rank";
  }
  return "unknown";
}

Parity parity_by_corollary(Int d) {
  const auto D = arith::discriminant(d).D;
  const auto factors = arith::prime_discriminant_factorization(D).factors;
  if (factors.size() == 1) return Parity::odd;
  if (factors.size() == 2 && factors[0] < 0 && factors[1] < 0) return Parity::odd;
  return Parity::even;
}

Int computed_class_number(Int p) { return invariants::class_number(p).h; }

namespace {

std::vector<Int> ramified(const FieldRecord& r) {
  std::vector<Int> out;
  for (auto p : r.p) {
    if (p != 0) out.push_back(p);
  }
  return out;
}

}  // namespace

Check check_lemma_1rp(const FieldRecord& r) {
  Check c{Lemma::one_ramified};
  c.applicable = r.n_d == 1;
  if (c.applicable) c.satisfied = r.h != 2;
  return c;
}

Check check_lemma_p14(const FieldRecord& r) {
  Check c{Lemma::prime_one_mod4};
  if (r.h != 1) return c;
  for (auto p : ramified(r)) {
    if (p % 4 != 1) continue;
    c.applicable = true;
    c.satisfied = c.satisfied && r.d == p;
  }
  return c;
}

Check check_lemma_even(const FieldRecord& r, const ClassNumberLookup& h_of) {
  Check c{Lemma::even};
  for (auto p : ramified(r)) {
    if (p % 4 != 1 || p == r.d || r.d % p != 0) continue;
    if (h_of(p) != 1) continue;
    c.applicable = true;
    c.satisfied = r.h >= 2;
  }
  return c;
}

Check check_lemma_3rp(const FieldRecord& r) {
  Check c{Lemma::three_ramified};
  c.applicable = r.n_d >= 3;
  if (c.applicable) c.satisfied = r.h >= (r.n_d >= 4 ? 4 : 2);
  return c;
}

Check check_lemma_srp(const FieldRecord& r) {
  Check c{Lemma::second_ramified};
  const Int p1 = r.p[0];
  c.applicable = r.n_d == 2 && (r.h == 1 || r.h == 2) && p1 % 2 == 1;
  if (c.applicable) c.satisfied = r.h == (p1 % 4 == 1 ? 2 : 1);
  return c;
}

Check check_two_rank(const FieldRecord& r) {
  Check c{Lemma::two_rank};
  c.applicable = r.n_d >= 1;
  if (c.applicable) c.satisfied = r.h_plus % (Int{1} << (r.n_d - 1)) == 0;
  return c;
}

bool GenusVerdict::consistent() const {
  if (parity_predicted != parity_actual) return false;
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return !c.applicable || c.satisfied; });
}

GenusVerdict verdict(const FieldRecord& r, const ClassNumberLookup& h_of) {
  GenusVerdict v;
  v.d = r.d;
  v.checks = {check_lemma_1rp(r), check_lemma_p14(r), check_lemma_even(r, h_of),
              check_lemma_3rp(r), check_lemma_srp(r), check_two_rank(r)};
  v.parity_predicted = parity_by_corollary(r.d);
  v.parity_actual = r.h % 2 == 1 ? Parity::odd : Parity::even;
  return v;
}

VerificationReport verify_dataset(const data::Dataset& ds, unsigned threads) {
  const unsigned n_threads = resolve_threads(threads);

  // h_p for every prime p = 1 (4) that divides some d properly.
  std::vector<Int> needed;
  for (const auto& r : ds.records()) {
    for (auto p : ramified(r)) {
      if (p % 4 == 1 && p != r.d) needed.push_back(p);
    }
  }
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
  std::vector<Int> h_needed(needed.size());
  if (!needed.empty()) {
    const auto table = std::make_shared<const arith::SmallestFactorTable>(
        static_cast<std::uint32_t>(std::clamp<Int>(needed.back() / 4, 16, Int{1} << 22)));
    constexpr std::size_t kChunk = 512;
    parallel_for((needed.size() + kChunk - 1) / kChunk, n_threads, [&](std::size_t chunk) {
      invariants::ReducedFormCycles cycles(table);
      const std::size_t end = std::min(needed.size(), (chunk + 1) * kChunk);
      for (std::size_t i = chunk * kChunk; i < end; ++i) h_needed[i] = invariants::class_number(needed[i], cycles).h;
    });
  }
  const ClassNumberLookup lookup = [&](Int p) {
    const auto it = std::lower_bound(needed.begin(), needed.end(), p);
    if (it != needed.end() && *it == p) return h_needed[static_cast<std::size_t>(it - needed.begin())];
    return computed_class_number(p);
  };

  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (ds.size() + kChunk - 1) / kChunk;
  std::vector<VerificationReport> partial(chunks);
  parallel_for(chunks, n_threads, [&](std::size_t chunk) {
    auto& rep = partial[chunk];
    const std::size_t end = std::min(ds.size(), (chunk + 1) * kChunk);
    for (std::size_t i = chunk * kChunk; i < end; ++i) {
      const auto v = verdict(ds.record(i), lookup);
      ++rep.records;
      if (v.parity_predicted == v.parity_actual) {
        ++rep.parity_matches;
      } else {
        rep.violations.push_back({v.d, "parity"});
      }
      for (std::size_t k = 0; k < v.checks.size(); ++k) {
        const auto& c = v.checks[k];
        if (!c.applicable) continue;
        ++rep.tallies[k].applicable;
        if (c.satisfied) {
          ++rep.tallies[k].satisfied;
        } else {
          rep.violations.push_back({v.d, lemma_id(c.lemma)});
        }
      }
    }
  });

  VerificationReport out;
  for (const auto& rep : partial) {
    out.records += rep.records;
    out.parity_matches += rep.parity_matches;
    for (std::size_t k = 0; k < out.tallies.size(); ++k) {
      out.tallies[k].applicable += rep.tallies[k].applicable;
      out.tallies[k].satisfied += rep.tallies[k].satisfied;
    }
    out.violations.insert(out.violations.end(), rep.violations.begin(), rep.violations.end());
  }
  return out;
}

std::string VerificationReport::to_json(bool pretty) const {
  nlohmann::ordered_json j;
  j["records"] = records;
  j["violations"] = violation_count();
  j["parity"] = {{"checked", records}, {"matches", parity_matches}};
  nlohmann::ordered_json lemmas;
  for (std::size_t k = 0; k < kAllLemmas.size(); ++k)
    lemmas[lemma_id(kAllLemmas[k])] = {{"applicable", tallies[k].applicable}, {"satisfied", tallies[k].satisfied}};
  j["lemmas"] = lemmas;
  auto list = nlohmann::ordered_json::array();
  for (const auto& v : violations) list.push_back({{"d", v.d}, {"check", v.check}});
  j["violation_list"] = list;
  return j.dump(pretty ? 2 : -1) + "\n";
}

}  // namespace quadclass::genus
