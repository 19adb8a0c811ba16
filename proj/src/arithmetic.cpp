#include "quadclass/arithmetic.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace quadclass::arith {

namespace {

// (a/2) in the Kronecker sense.
int kronecker_two(Int a) {
  const Int r = ((a % 8) + 8) % 8;
  if (r % 2 == 0) return 0;
  return (r == 1 || r == 7) ? 1 : -1;
}

// Largest a_n over n <= N must fit a byte; d(n) <= 240 for n <= 10^6.
constexpr std::size_t kMaxCoefficientBound = 1'000'000;

}  // namespace

std::vector<std::uint8_t> ZetaCoefficientVector::prime_subvector() const {
  std::vector<std::uint8_t> out;
  for (auto p : primes_up_to(static_cast<std::uint32_t>(bound()))) out.push_back((*this)[p]);
  return out;
}

Int PrimeDiscriminantFactorization::product() const {
  Int prod = 1;
  for (Int f : factors) prod *= f;
  return prod;
}

bool is_squarefree(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("is_squarefree: n must be >= 1");
  if (n % 4 == 0) return false;
  if (n % 2 == 0) n /= 2;
  for (std::uint64_t p = 3; p * p <= n; p += 2) {
    if (n % p != 0) continue;
    n /= p;
    if (n % p == 0) return false;
  }
  return true;
}

SquarefreeSieve::SquarefreeSieve(std::uint64_t limit) : flags_(limit + 1, 1) {
  flags_[0] = 0;
  for (std::uint64_t p = 2; p * p <= limit; ++p) {
    const std::uint64_t sq = p * p;
    // Composite p contribute multiples already marked by their prime factors.
    for (std::uint64_t m = sq; m <= limit; m += sq) flags_[m] = 0;
  }
}

FundamentalDiscriminant discriminant(Int d) {
  if (d <= 1) throw std::invalid_argument("discriminant: d must be > 1, got " + std::to_string(d));
  if (!is_squarefree(static_cast<std::uint64_t>(d)))
    throw std::invalid_argument("discriminant: d must be square-free, got " + std::to_string(d));
  return {d, d % 4 == 1 ? d : 4 * d};
}

int kronecker(Int a, Int n) {
  if (n <= 0) throw std::invalid_argument("kronecker: n must be >= 1");
  int result = 1;
  auto un = static_cast<std::uint64_t>(n);
  if (un % 2 == 0) {
    if (a % 2 == 0) return 0;
    const int v = std::countr_zero(un);
    un >>= v;
    if (v % 2 == 1) result = kronecker_two(a);
  }
  if (un == 1) return result;

  // Jacobi symbol (a/un), un odd.
  const Int m = a % static_cast<Int>(un);
  auto ua = static_cast<std::uint64_t>(m < 0 ? m + static_cast<Int>(un) : m);
  while (ua != 0) {
    const int v = std::countr_zero(ua);
    ua >>= v;
    if (v % 2 == 1 && ((un & 7) == 3 || (un & 7) == 5)) result = -result;
    if ((ua & 3) == 3 && (un & 3) == 3) result = -result;
    std::swap(ua, un);
    ua %= un;
  }
  return un == 1 ? result : 0;
}

unsigned zeta_coefficient(Int D, Int n) {
  if (n <= 0) throw std::invalid_argument("zeta_coefficient: n must be >= 1");
  Int sum = 0;
  for (Int m = 1; m * m <= n; ++m) {
    if (n % m != 0) continue;
    sum += kronecker(D, m);
    if (m * m != n) sum += kronecker(D, n / m);
  }
  return static_cast<unsigned>(sum);
}

ZetaCoefficientVector coefficient_vector(Int d, std::size_t N) {
  if (N == 0) throw std::invalid_argument("coefficient_vector: N must be >= 1");
  const auto disc = discriminant(d);
  CoefficientSieve sieve(N);
  std::vector<std::int8_t> chi(N);
  std::vector<std::uint8_t> coeff(N);
  sieve.fill(disc.D, chi, coeff);
  return ZetaCoefficientVector(std::move(coeff));
}

RamificationProfile ramification_profile(Int d) {
  const auto disc = discriminant(d);
  RamificationProfile profile;
  if (disc.D % 2 == 0) profile.primes.push_back(2);
  for (auto [p, e] : factorize(static_cast<std::uint64_t>(d))) {
    if (p != 2) profile.primes.push_back(static_cast<Int>(p));
  }
  return profile;
}

PrimeDiscriminantFactorization prime_discriminant_factorization(Int D) {
  if (D == 0 || D == 1) throw std::invalid_argument("prime_discriminant_factorization: D must be a fundamental discriminant");
  PrimeDiscriminantFactorization out;
  Int odd_product = 1;
  const auto factors = factorize(static_cast<std::uint64_t>(D < 0 ? -D : D));
  for (auto [p, e] : factors) {
    if (p == 2) continue;
    if (e != 1) throw std::invalid_argument("prime_discriminant_factorization: D is not fundamental");
    const Int star = (p % 4 == 1) ? static_cast<Int>(p) : -static_cast<Int>(p);
    odd_product *= star;
  }
  const Int two_part = D / odd_product;
  if (two_part != 1 && two_part != -4 && two_part != 8 && two_part != -8)
    throw std::invalid_argument("prime_discriminant_factorization: D = " + std::to_string(D) +
                                " is not fundamental");
  if (two_part != 1) out.factors.push_back(two_part);
  for (auto [p, e] : factors) {
    if (p == 2) continue;
    out.factors.push_back((p % 4 == 1) ? static_cast<Int>(p) : -static_cast<Int>(p));
  }
  return out;
}

int big_omega(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("big_omega: n must be >= 1");
  int total = 0;
  for (auto [p, e] : factorize(n)) total += e;
  return total;
}

int coefficient_bound(std::uint64_t n) { return big_omega(n) + 2; }

int divisor_count(std::uint64_t n) {
  int count = 1;
  for (auto [p, e] : factorize(n)) count *= e + 1;
  return count;
}

std::vector<std::uint32_t> primes_up_to(std::uint32_t n) {
  std::vector<std::uint32_t> primes;
  if (n < 2) return primes;
  std::vector<bool> composite(n + 1, false);
  for (std::uint32_t i = 2; i <= n; ++i) {
    if (composite[i]) continue;
    primes.push_back(i);
    for (std::uint64_t j = static_cast<std::uint64_t>(i) * i; j <= n; j += i) composite[j] = true;
  }
  return primes;
}

std::vector<std::pair<std::uint64_t, int>> factorize(std::uint64_t n) {
  std::vector<std::pair<std::uint64_t, int>> out;
  if (n == 0) throw std::invalid_argument("factorize: n must be >= 1");
  for (std::uint64_t p = 2; p * p <= n; p += (p == 2 ? 1 : 2)) {
    if (n % p != 0) continue;
    int e = 0;
    while (n % p == 0) {
      n /= p;
      ++e;
    }
    out.emplace_back(p, e);
  }
  if (n > 1) out.emplace_back(n, 1);
  return out;
}

SmallestFactorTable::SmallestFactorTable(std::uint32_t limit) : spf_(static_cast<std::size_t>(limit) + 1, 0) {
  for (std::uint32_t i = 2; i <= limit; ++i) {
    if (spf_[i] != 0) continue;
    primes_.push_back(i);
    for (std::uint64_t j = i; j <= limit; j += i) {
      if (spf_[j] == 0) spf_[j] = i;
    }
  }
}

void SmallestFactorTable::factorize(std::uint64_t n,
                                    std::vector<std::pair<std::uint64_t, int>>& out) const {
  out.clear();
  if (n <= limit()) {
    while (n > 1) {
      const std::uint32_t p = spf_[n];
      int e = 0;
      while (n % p == 0) {
        n /= p;
        ++e;
      }
      out.emplace_back(p, e);
    }
    return;
  }
  for (std::uint32_t p : primes_) {
    if (static_cast<std::uint64_t>(p) * p > n) break;
    if (n % p != 0) continue;
    int e = 0;
    while (n % p == 0) {
      n /= p;
      ++e;
    }
    out.emplace_back(p, e);
    if (n <= limit()) {
      std::vector<std::pair<std::uint64_t, int>> rest;
      factorize(n, rest);
      out.insert(out.end(), rest.begin(), rest.end());
      return;
    }
  }
  if (n > 1) {
    // Remaining cofactor is prime unless the table was too small to cover sqrt(n).
    const std::uint64_t last = primes_.empty() ? 1 : primes_.back();
    if (last * last < n) {
      for (auto pe : arith::factorize(n)) out.push_back(pe);
    } else {
      out.emplace_back(n, 1);
    }
  }
}

CoefficientSieve::CoefficientSieve(std::size_t N)
    : spf_(N + 1, 0), exponent_(N + 1, 0), cofactor_(N + 1, 1) {
  if (N == 0 || N > kMaxCoefficientBound)
    throw std::invalid_argument("CoefficientSieve: N must be in [1, 10^6]");
  for (std::size_t i = 2; i <= N; ++i) {
    if (spf_[i] != 0) continue;
    primes_.push_back(static_cast<std::uint32_t>(i));
    for (std::size_t j = i; j <= N; j += i) {
      if (spf_[j] == 0) spf_[j] = static_cast<std::uint32_t>(i);
    }
  }
  for (std::size_t n = 2; n <= N; ++n) {
    const std::uint32_t p = spf_[n];
    std::size_t m = n;
    std::uint32_t e = 0;
    while (m % p == 0) {
      m /= p;
      ++e;
    }
    exponent_[n] = e;
    cofactor_[n] = static_cast<std::uint32_t>(m);
  }
}

void CoefficientSieve::fill(Int D, std::span<std::int8_t> chi, std::span<std::uint8_t> coeff) const {
  const std::size_t N = bound();
  if (chi.size() < N || coeff.size() < N)
    throw std::invalid_argument("CoefficientSieve::fill: output spans shorter than N");
  chi[0] = 1;
  coeff[0] = 1;
  for (auto p : primes_) chi[p - 1] = static_cast<std::int8_t>(kronecker(D, p));
  for (std::size_t n = 2; n <= N; ++n) {
    const std::uint32_t p = spf_[n];
    if (p != n) chi[n - 1] = static_cast<std::int8_t>(chi[p - 1] * chi[n / p - 1]);
    const int cp = chi[p - 1];
    const std::uint32_t e = exponent_[n];
    unsigned local;
    if (cp == 1) {
      local = e + 1;
    } else if (cp == 0) {
      local = 1;
    } else {
      local = (e % 2 == 0) ? 1 : 0;
    }
    coeff[n - 1] = static_cast<std::uint8_t>(coeff[cofactor_[n] - 1] * local);
  }
}

}  // namespace quadclass::arith
