#pragma once

// Exact elementary arithmetic of real quadratic fields K_d = Q(sqrt d):
// discriminants, Kronecker characters, Dedekind zeta coefficients and
// ramification data.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace quadclass::arith {

using Int = std::int64_t;

struct FundamentalDiscriminant {
  Int d = 0;  // square-free, > 1
  Int D = 0;  // d if d = 1 (mod 4), else 4d

  friend bool operator==(const FundamentalDiscriminant&,
                         const FundamentalDiscriminant&) = default;
};

// Dirichlet coefficients a_1..a_N of zeta_d(s), one byte each.
class ZetaCoefficientVector {
 public:
  ZetaCoefficientVector() = default;
  explicit ZetaCoefficientVector(std::vector<std::uint8_t> values)
      : values_(std::move(values)) {}

  std::size_t bound() const { return values_.size(); }
  // 1-based: operator[](n) is a_n.
  std::uint8_t operator[](std::size_t n) const { return values_[n - 1]; }
  std::span<const std::uint8_t> values() const { return values_; }
  // (a_p) for primes p <= N, in increasing p.
  std::vector<std::uint8_t> prime_subvector() const;

  friend bool operator==(const ZetaCoefficientVector&,
                         const ZetaCoefficientVector&) = default;

 private:
  std::vector<std::uint8_t> values_;
};

struct RamificationProfile {
  std::vector<Int> primes;  // increasing
  int n_d() const { return static_cast<int>(primes.size()); }
};

// D = d_1 * ... * d_t with each d_i in {-4, 8, -8} or (-1)^((p-1)/2) p.
// Factors are ordered by their underlying prime.
struct PrimeDiscriminantFactorization {
  std::vector<Int> factors;
  Int product() const;
};

bool is_squarefree(std::uint64_t n);

// One byte per integer in [0, limit]; built once for a whole generation run.
class SquarefreeSieve {
 public:
  explicit SquarefreeSieve(std::uint64_t limit);
  std::uint64_t limit() const { return flags_.size() - 1; }
  bool operator()(std::uint64_t n) const { return flags_[n] != 0; }

 private:
  std::vector<std::uint8_t> flags_;
};

FundamentalDiscriminant discriminant(Int d);

// Kronecker symbol (a/n) for n >= 1.
int kronecker(Int a, Int n);

// a_n = sum over m | n of chi_D(m), by direct divisor summation.
unsigned zeta_coefficient(Int D, Int n);

ZetaCoefficientVector coefficient_vector(Int d, std::size_t N = 1000);

RamificationProfile ramification_profile(Int d);

PrimeDiscriminantFactorization prime_discriminant_factorization(Int D);

// Omega(n), prime factors counted with multiplicity.
int big_omega(std::uint64_t n);
// Omega(n) + 2, the value count behind the bubble bound on g_h. It bounds
// a_n only for prime powers; a product of two split primes already has
// a_n = 4 > Omega(n) + 1. The true bound is divisor_count(n).
int coefficient_bound(std::uint64_t n);
// d(n), the largest value a_n can reach.
int divisor_count(std::uint64_t n);

std::vector<std::uint32_t> primes_up_to(std::uint32_t n);

// Prime factorisation (p, e) by trial division, increasing p.
std::vector<std::pair<std::uint64_t, int>> factorize(std::uint64_t n);

// Smallest-prime-factor table over [0, limit] with trial-division fallback
// above the limit.
class SmallestFactorTable {
 public:
  explicit SmallestFactorTable(std::uint32_t limit);
  std::uint32_t limit() const { return static_cast<std::uint32_t>(spf_.size() - 1); }
  // Clears `out` and appends (p, e) pairs in increasing p.
  void factorize(std::uint64_t n, std::vector<std::pair<std::uint64_t, int>>& out) const;

 private:
  std::vector<std::uint32_t> spf_;
  std::vector<std::uint32_t> primes_;
};

// Precomputed multiplicative structure of 1..N, shared across fields so a
// coefficient vector costs O(N) with one Kronecker evaluation per prime.
class CoefficientSieve {
 public:
  explicit CoefficientSieve(std::size_t N);

  std::size_t bound() const { return spf_.size() - 1; }
  std::span<const std::uint32_t> primes() const { return primes_; }

  // chi[n-1] = chi_D(n) and coeff[n-1] = a_n for n = 1..N.
  void fill(Int D, std::span<std::int8_t> chi, std::span<std::uint8_t> coeff) const;

 private:
  std::vector<std::uint32_t> spf_;
  std::vector<std::uint32_t> exponent_;  // exponent of spf in n
  std::vector<std::uint32_t> cofactor_;  // n with its spf-part removed
  std::vector<std::uint32_t> primes_;
};

}  // namespace quadclass::arith
