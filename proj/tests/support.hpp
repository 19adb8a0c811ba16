#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "quadclass/arithmetic.hpp"
#include "quadclass/dataset.hpp"
#include "quadclass/invariants.hpp"

namespace testing {

using quadclass::arith::Int;

// Builds a dataset from explicit square-free d values, computing everything.
inline quadclass::data::Dataset dataset_of(std::vector<Int> ds, std::size_t N = 1000) {
  std::sort(ds.begin(), ds.end());
  std::vector<quadclass::data::FieldRecord> records;
  std::vector<std::uint8_t> coeffs;
  for (Int d : ds) {
    const auto inv = quadclass::invariants::compute_invariants(d);
    const auto sums = quadclass::invariants::partial_sums(d, N);
    records.push_back(quadclass::data::make_record(d, inv.h, inv.h_plus, inv.R, inv.unit_norm, sums.S_zeta,
                                                   sums.S_chi));
    const auto v = quadclass::arith::coefficient_vector(d, N);
    coeffs.insert(coeffs.end(), v.values().begin(), v.values().end());
  }
  return {std::move(records), std::move(coeffs), N, quadclass::data::Provenance::derived, "test"};
}

// Modular exponentiation for Euler's criterion.
inline std::uint64_t pow_mod(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
  unsigned __int128 r = 1, x = b % m;
  while (e) {
    if (e & 1) r = r * x % m;
    x = x * x % m;
    e >>= 1;
  }
  return static_cast<std::uint64_t>(r);
}

inline bool is_prime_slow(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t q = 2; q * q <= n; ++q)
    if (n % q == 0) return false;
  return true;
}

// chi_D(p) for prime p straight from the definition: 0 on p | D, Euler's
// criterion for odd p, and D mod 8 for p = 2.
inline int chi_prime(Int D, std::uint64_t p) {
  if (D % static_cast<Int>(p) == 0) return 0;
  if (p == 2) {
    const Int r = ((D % 8) + 8) % 8;
    return (r == 1 || r == 7) ? 1 : -1;
  }
  const Int a = ((D % static_cast<Int>(p)) + static_cast<Int>(p)) % static_cast<Int>(p);
  return pow_mod(static_cast<std::uint64_t>(a), (p - 1) / 2, p) == 1 ? 1 : -1;
}

// a_n as the number of ideals of norm n: multiplicative, with local factors
// from the splitting of each prime.
inline unsigned ideal_count(Int D, std::uint64_t n) {
  unsigned total = 1;
  for (std::uint64_t p = 2; p * p <= n || n > 1; ++p) {
    if (p * p > n) p = n;
    int e = 0;
    while (n % p == 0) {
      n /= p;
      ++e;
    }
    if (e == 0) continue;
    const int c = chi_prime(D, p);
    if (c == 1) total *= static_cast<unsigned>(e + 1);
    else if (c == -1) total *= (e % 2 == 0) ? 1u : 0u;
  }
  return total;
}

}  // namespace testing
