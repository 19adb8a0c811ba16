#include "quadclass/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace quadclass::invariants {

namespace {

Int isqrt(Int n) {
  auto r = static_cast<Int>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

}  // namespace

OmegaExpansion omega_expansion(Int d) {
  arith::discriminant(d);  // validates d
  const Int s = isqrt(d);
  const bool one_mod_four = d % 4 == 1;
  const Int P0 = one_mod_four ? 1 : 0;
  const Int Q0 = one_mod_four ? 2 : 1;

  OmegaExpansion out;
  out.a0 = (P0 + s) / Q0;
  Int P = out.a0 * Q0 - P0;
  Int Q = (d - P * P) / Q0;
  const Int P1 = P;
  const Int Q1 = Q;
  // omega is purely periodic from index 1.
  for (;;) {
    const Int a = (P + s) / Q;
    out.period.push_back(a);
    const Int next_P = a * Q - P;
    const Int next_Q = (d - next_P * next_P) / Q;
    P = next_P;
    Q = next_Q;
    if (P == P1 && Q == Q1) break;
  }
  return out;
}

FundamentalUnit fundamental_unit(Int d) { return fundamental_unit(d, omega_expansion(d)); }

FundamentalUnit fundamental_unit(Int d, const OmegaExpansion& cf) {
  const std::size_t l = cf.period.size();

  // Convergent p_{l-1}/q_{l-1} of omega.
  mpz_class p_prev = 1, q_prev = 0;
  mpz_class p = static_cast<long>(cf.a0), q = 1;
  for (std::size_t k = 0; k + 1 < l; ++k) {
    const auto a = static_cast<unsigned long>(cf.period[k]);
    mpz_class p_next = p * a + p_prev;
    mpz_class q_next = q * a + q_prev;
    p_prev = std::move(p);
    q_prev = std::move(q);
    p = std::move(p_next);
    q = std::move(q_next);
  }

  FundamentalUnit unit;
  unit.norm = (l % 2 == 1) ? -1 : 1;
  if (d % 4 == 1) {
    // p - q * conj(omega) = (2p - q + q sqrt d) / 2
    unit.x = 2 * p - q;
    unit.y = q;
    unit.denom = 2;
    if (mpz_even_p(unit.x.get_mpz_t()) && mpz_even_p(unit.y.get_mpz_t())) {
      unit.x /= 2;
      unit.y /= 2;
      unit.denom = 1;
    }
  } else {
    unit.x = p;
    unit.y = q;
    unit.denom = 1;
  }
  return unit;
}

double log_unit(const FundamentalUnit& unit, Int d) {
  const auto bits = mpz_sizeinbase(unit.x.get_mpz_t(), 2);
  if (bits < 50) {
    const long double x = unit.x.get_d();
    const long double y = unit.y.get_d();
    return static_cast<double>(std::log((x + y * std::sqrt(static_cast<long double>(d))) / unit.denom));
  }
  // epsilon = (2x/denom) (1 - O(x^-2)); the correction is below 2^-100 here.
  signed long exponent = 0;
  const double mantissa = mpz_get_d_2exp(&exponent, unit.x.get_mpz_t());
  const long double ln_x =
      std::log(static_cast<long double>(mantissa)) + exponent * std::numbers::ln2_v<long double>;
  return static_cast<double>(ln_x + std::numbers::ln2_v<long double> -
                             std::log(static_cast<long double>(unit.denom)));
}

double regulator(Int d) { return log_unit(fundamental_unit(d), d); }

ReducedFormCycles::ReducedFormCycles(Int max_D)
    : factors_(std::make_shared<const arith::SmallestFactorTable>(
          static_cast<std::uint32_t>(std::max<Int>(max_D / 4, 16)))) {}

ReducedFormCycles::ReducedFormCycles(std::shared_ptr<const arith::SmallestFactorTable> factors)
    : factors_(std::move(factors)) {}

Int ReducedFormCycles::narrow_class_number(Int D) {
  if (D <= 4) throw std::invalid_argument("narrow_class_number: D must be > 4");
  const Int s = isqrt(D);
  if (s * s == D) throw std::invalid_argument("narrow_class_number: D must not be a square");

  // Reduced: 0 < b < sqrt(D), sqrt(D) - b < 2|a| < sqrt(D) + b.
  // With s = floor(sqrt D): b <= s and s - b + 1 <= 2|a| <= s + b.
  const Int b_first = (D % 2 == 0) ? 2 : 1;
  const std::size_t slots = b_first > s ? 0 : static_cast<std::size_t>((s - b_first) / 2 + 1);
  offsets_.assign(slots + 1, 0);
  a_values_.clear();

  for (std::size_t k = 0; k < slots; ++k) {
    const Int b = b_first + 2 * static_cast<Int>(k);
    offsets_[k] = static_cast<std::uint32_t>(a_values_.size());
    const auto N = static_cast<std::uint64_t>((D - b * b) / 4);
    const Int lo = s - b + 1;
    const Int hi = s + b;

    factors_->factorize(N, scratch_factors_);
    scratch_divisors_.assign(1, 1);
    for (auto [p, e] : scratch_factors_) {
      const std::size_t base = scratch_divisors_.size();
      std::uint64_t pk = 1;
      for (int i = 1; i <= e; ++i) {
        pk *= p;
        for (std::size_t j = 0; j < base; ++j) scratch_divisors_.push_back(scratch_divisors_[j] * pk);
      }
    }
    const std::size_t first = a_values_.size();
    for (auto a : scratch_divisors_) {
      const auto twice = 2 * static_cast<Int>(a);
      if (twice < lo || twice > hi) continue;
      a_values_.push_back(static_cast<Int>(a));
      a_values_.push_back(-static_cast<Int>(a));
    }
    std::sort(a_values_.begin() + static_cast<std::ptrdiff_t>(first), a_values_.end());
  }
  offsets_[slots] = static_cast<std::uint32_t>(a_values_.size());

  visited_.assign(a_values_.size(), 0);
  auto locate = [&](Int a, Int b) -> std::size_t {
    const auto k = static_cast<std::size_t>((b - b_first) / 2);
    const auto begin = a_values_.begin() + offsets_[k];
    const auto end = a_values_.begin() + offsets_[k + 1];
    const auto it = std::lower_bound(begin, end, a);
    if (it == end || *it != a)
      throw std::logic_error("reduced form cycle left the reduced set for D = " + std::to_string(D));
    return static_cast<std::size_t>(it - a_values_.begin());
  };

  Int cycles = 0;
  for (std::size_t k = 0; k < slots; ++k) {
    const Int b0 = b_first + 2 * static_cast<Int>(k);
    for (std::size_t i = offsets_[k]; i < offsets_[k + 1]; ++i) {
      if (visited_[i]) continue;
      ++cycles;
      Int a = a_values_[i];
      Int b = b0;
      std::size_t idx = i;
      do {
        visited_[idx] = 1;
        const Int c = (b * b - D) / (4 * a);
        const Int m = 2 * (c < 0 ? -c : c);
        const Int r = s - ((s + b) % m);
        a = c;
        b = r;
        idx = locate(a, b);
      } while (idx != i);
    }
  }
  return cycles;
}

ClassNumbers class_number(Int d, ReducedFormCycles& cycles) {
  const auto disc = arith::discriminant(d);
  ClassNumbers out;
  out.h_plus = cycles.narrow_class_number(disc.D);
  const int norm = omega_expansion(d).period.size() % 2 == 1 ? -1 : 1;
  out.h = norm == -1 ? out.h_plus : out.h_plus / 2;
  return out;
}

ClassNumbers class_number(Int d) {
  const auto disc = arith::discriminant(d);
  // Factoring (D - b^2)/4 by table up to D/4 keeps a single call O(sqrt D log D).
  ReducedFormCycles cycles(std::min<Int>(disc.D, Int{1} << 22));
  return class_number(d, cycles);
}

PartialSums partial_sums(Int d, std::size_t N) {
  const auto disc = arith::discriminant(d);
  arith::CoefficientSieve sieve(N);
  std::vector<std::int8_t> chi(N);
  std::vector<std::uint8_t> coeff(N);
  sieve.fill(disc.D, chi, coeff);
  PartialSums out;
  for (std::size_t n = 1; n <= N; ++n) {
    out.S_zeta += static_cast<double>(coeff[n - 1]) / static_cast<double>(n);
    out.S_chi += static_cast<double>(chi[n - 1]) / static_cast<double>(n);
  }
  return out;
}

double l_value_at_one(Int D) {
  if (D <= 4) throw std::invalid_argument("l_value_at_one: D must be a real fundamental discriminant");
  // chi_D is even, so the terms for a and D - a coincide; a = D/2 has chi = 0.
  long double sum = 0.0L;
  const long double pi_over_D = std::numbers::pi_v<long double> / static_cast<long double>(D);
  for (Int a = 1; 2 * a < D; ++a) {
    const int c = arith::kronecker(D, a);
    if (c == 0) continue;
    sum += c * std::log(std::sin(pi_over_D * static_cast<long double>(a)));
  }
  return static_cast<double>(-2.0L * sum / std::sqrt(static_cast<long double>(D)));
}

double analytic_residual(Int d) {
  const auto disc = arith::discriminant(d);
  const double L = l_value_at_one(disc.D);
  const double R = regulator(d);
  const auto h = class_number(d).h;
  return std::abs(std::sqrt(static_cast<double>(disc.D)) * L - 2.0 * R * static_cast<double>(h));
}

InvariantSet compute_invariants(Int d) {
  const auto unit = fundamental_unit(d);
  const auto classes = class_number(d);
  const auto sums = partial_sums(d);
  InvariantSet out;
  out.h = classes.h;
  out.h_plus = classes.h_plus;
  out.R = log_unit(unit, d);
  out.unit_norm = unit.norm;
  out.S_zeta = sums.S_zeta;
  out.S_chi = sums.S_chi;
  return out;
}

}  // namespace quadclass::invariants
