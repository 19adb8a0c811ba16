#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <gmpxx.h>

#include "quadclass/arithmetic.hpp"

namespace quadclass::invariants {

using arith::Int;

// Fundamental unit (x + y*sqrt(d)) / denom of the maximal order of Q(sqrt d).
struct FundamentalUnit {
  mpz_class x;
  mpz_class y;
  int denom = 1;  // 1 or 2
  int norm = 1;   // +1 or -1
};

// Regular continued fraction of omega = sqrt(d) (d = 2,3 mod 4) or
// (1 + sqrt(d))/2 (d = 1 mod 4): a_0 followed by one full period.
struct OmegaExpansion {
  Int a0 = 0;
  std::vector<Int> period;
};

struct ClassNumbers {
  Int h = 0;
  Int h_plus = 0;

  friend bool operator==(const ClassNumbers&, const ClassNumbers&) = default;
};

struct PartialSums {
  double S_zeta = 0.0;
  double S_chi = 0.0;
};

struct InvariantSet {
  Int h = 0;
  Int h_plus = 0;
  double R = 0.0;
  int unit_norm = 1;
  double S_zeta = 0.0;
  double S_chi = 0.0;
};

OmegaExpansion omega_expansion(Int d);

FundamentalUnit fundamental_unit(Int d);
// Same unit from an already computed expansion of omega for this d.
FundamentalUnit fundamental_unit(Int d, const OmegaExpansion& cf);

// ln(epsilon) from the big-integer unit; accurate to double precision even
// when the unit has thousands of digits.
double log_unit(const FundamentalUnit& unit, Int d);
double regulator(Int d);

// Narrow class number = number of cycles of reduced indefinite forms of
// discriminant D. Holds reusable buffers; one instance per worker thread.
class ReducedFormCycles {
 public:
  // Factorisations of (D - b^2)/4 use a smallest-factor table covering
  // max_D / 4; larger discriminants fall back to trial division.
  explicit ReducedFormCycles(Int max_D = 1 << 20);
  // Shares a precomputed table between workers.
  explicit ReducedFormCycles(std::shared_ptr<const arith::SmallestFactorTable> factors);

  Int narrow_class_number(Int D);
  // Total reduced forms seen by the last call.
  std::size_t last_form_count() const { return a_values_.size(); }

 private:
  std::shared_ptr<const arith::SmallestFactorTable> factors_;
  std::vector<std::pair<std::uint64_t, int>> scratch_factors_;
  std::vector<std::uint64_t> scratch_divisors_;
  std::vector<std::uint32_t> offsets_;  // per b-slot start into a_values_
  std::vector<Int> a_values_;           // signed leading coefficients, sorted per slot
  std::vector<std::uint8_t> visited_;
};

ClassNumbers class_number(Int d);
ClassNumbers class_number(Int d, ReducedFormCycles& cycles);

// Sums over n = 1..N in increasing n.
PartialSums partial_sums(Int d, std::size_t N = 1000);

// L(1, chi_D) via the finite log-sine expression for even primitive
// characters. O(D); test and verification use only.
double l_value_at_one(Int D);

// |sqrt(D) L(1, chi_D) - 2 R h|.
double analytic_residual(Int d);

InvariantSet compute_invariants(Int d);

}  // namespace quadclass::invariants
