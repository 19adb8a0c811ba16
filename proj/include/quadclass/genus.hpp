#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "quadclass/dataset.hpp"

namespace quadclass::genus {

using arith::Int;
using data::FieldRecord;

enum class Parity { odd, even };
std::string to_string(Parity p);

// h_d is odd iff exactly one prime ramifies, or D = d1 d2 with both prime
// discriminants negative. Ramification is read off D, never d.
Parity parity_by_corollary(Int d);

enum class Lemma {
  one_ramified,     // n_d = 1 => h != 2
  prime_one_mod4,   // h = 1, ramified p = 1 (4) => d = p
  even,             // h_p = 1, p = 1 (4), d = mp, m > 1 => h >= 2
  three_ramified,   // n_d >= 3 => h >= 2; n_d >= 4 => h >= 4
  second_ramified,  // n_d = 2, h in {1,2}, odd p1: p1 = 1 (4) => h = 2, else h = 1
  two_rank,         // 2^(n_d - 1) divides h_plus
};
inline constexpr std::array kAllLemmas{Lemma::one_ramified, Lemma::prime_one_mod4, Lemma::even,
                                       Lemma::three_ramified, Lemma::second_ramified, Lemma::two_rank};
std::string lemma_id(Lemma lemma);

struct Check {
  Lemma lemma;
  bool applicable = false;
  bool satisfied = true;
};

// Class number of Q(sqrt p) for a prime p.
using ClassNumberLookup = std::function<Int(Int)>;
// Computes h_p from scratch.
Int computed_class_number(Int p);

Check check_lemma_1rp(const FieldRecord& r);
Check check_lemma_p14(const FieldRecord& r);
Check check_lemma_even(const FieldRecord& r, const ClassNumberLookup& h_of = computed_class_number);
Check check_lemma_3rp(const FieldRecord& r);
Check check_lemma_srp(const FieldRecord& r);
Check check_two_rank(const FieldRecord& r);

struct GenusVerdict {
  Int d = 0;
  std::vector<Check> checks;
  Parity parity_predicted = Parity::odd;
  Parity parity_actual = Parity::odd;

  bool consistent() const;
};

GenusVerdict verdict(const FieldRecord& r, const ClassNumberLookup& h_of = computed_class_number);

struct Violation {
  Int d = 0;
  std::string check;  // lemma id or "parity"
};

struct LemmaTally {
  std::size_t applicable = 0;
  std::size_t satisfied = 0;
};

struct VerificationReport {
  std::size_t records = 0;
  std::size_t parity_matches = 0;
  std::array<LemmaTally, kAllLemmas.size()> tallies{};
  std::vector<Violation> violations;  // ordered by d, then check

  std::size_t violation_count() const { return violations.size(); }
  std::string to_json(bool pretty = false) const;
};

VerificationReport verify_dataset(const data::Dataset& ds, unsigned threads = 0);

}  // namespace quadclass::genus
