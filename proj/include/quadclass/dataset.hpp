#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "quadclass/arithmetic.hpp"

namespace quadclass::data {

using arith::Int;

// One real quadratic field. Ramified primes beyond the third are not
// representable; p[i] == 0 marks an absent prime.
struct FieldRecord {
  Int d = 0;
  Int D = 0;
  Int h = 0;
  Int h_plus = 0;
  double R = 0.0;
  int n_d = 0;
  std::array<Int, 3> p{};
  double S_zeta = 0.0;
  double S_chi = 0.0;
  int unit_norm = 1;

  friend bool operator==(const FieldRecord&, const FieldRecord&) = default;
};

enum class Provenance { generated, imported, derived };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

// Records sorted by d with a row-major coefficient matrix (record x N).
class Dataset {
 public:
  Dataset() = default;
  // Validates ordering, uniqueness and matrix shape.
  Dataset(std::vector<FieldRecord> records, std::vector<std::uint8_t> coefficients,
          std::size_t coeff_bound, Provenance provenance, std::string source);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t coeff_bound() const { return coeff_bound_; }
  Provenance provenance() const { return provenance_; }
  const std::string& source() const { return source_; }

  std::span<const FieldRecord> records() const { return records_; }
  const FieldRecord& record(std::size_t i) const { return records_[i]; }
  // a_1..a_N of record i.
  std::span<const std::uint8_t> coefficients(std::size_t i) const {
    return {coefficients_.data() + i * coeff_bound_, coeff_bound_};
  }
  // 1-based coefficient index.
  std::uint8_t coefficient(std::size_t i, std::size_t n) const {
    return coefficients_[i * coeff_bound_ + n - 1];
  }
  std::span<const std::uint8_t> coefficient_matrix() const { return coefficients_; }

  std::set<Int> label_classes() const;

  // Records at `indices` (any order, no duplicates), re-sorted by d.
  Dataset subset(std::vector<std::size_t> indices, std::string source) const;
  Dataset filter_classes(const std::set<Int>& classes) const;

  // FNV-1a over the canonical saved representation.
  std::uint64_t checksum() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<FieldRecord> records_;
  std::vector<std::uint8_t> coefficients_;
  std::size_t coeff_bound_ = 0;
  Provenance provenance_ = Provenance::generated;
  std::string source_;
};

struct GenerateOptions {
  Int max_D = 1'000'000;
  std::set<Int> classes{1, 2};
  std::size_t coeff_bound = 1000;
  unsigned threads = 0;  // 0: resolve_threads()
};

// Every square-free d > 1 with D <= max_D and h_d in classes.
Dataset generate(const GenerateOptions& options);

// Builds a full record for d given its class numbers and regulator data.
// Throws quadclass::Error if more than three primes ramify.
FieldRecord make_record(Int d, Int h, Int h_plus, double R, int unit_norm, double S_zeta,
                        double S_chi);

struct ImportOptions {
  std::size_t coeff_bound = 1000;
  // Rows whose h is not listed are skipped; empty keeps every row.
  std::set<Int> classes;
  // Recompute h and h_plus by cycle counting and reject disagreements. When
  // off, h is trusted, which lets the genus verifier audit a suspect file.
  bool verify_class_numbers = true;
  // Relative tolerance when checking a supplied R against the computed one.
  double regulator_tolerance = 1e-4;
  unsigned threads = 0;
};

// CSV with header; required columns d, D, h, R. Optional columns h_plus,
// unit_norm, n_d, p1, p2, p3, S_zeta, S_chi and coefficient columns a1, a2, ...
// are cross-checked against recomputed values; everything else is computed.
// Malformed rows raise FormatError("line N: ..."); inconsistent rows raise
// ValidationError("line N: field ...").
Dataset import_csv(const std::filesystem::path& path, const ImportOptions& options = {});

// Balanced class 1 / class 3 sample: all class-3 records with D <= 10^6 and,
// per bucket (i 10^5, (i+1) 10^5], the same number of class-1 records drawn
// uniformly without replacement.
Dataset balanced_sample_13(const Dataset& full, std::uint64_t seed);

// Stratified seeded split; per-class train counts by largest remainder so the
// train size is round(fraction * size).
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed);

struct Summary {
  // (h, p, a_p value) -> count for p in {2, 3, 5}
  std::map<std::tuple<Int, int, int>, std::size_t> small_prime_values;
  // (h, n_d) -> count
  std::map<std::pair<Int, int>, std::size_t> ramified;
  // (h, #primes p <= min(N, 1000) with a_p = 1) -> count
  std::map<std::pair<Int, int>, std::size_t> detected;
};

Summary summarize(const Dataset& ds);

std::string small_prime_values_csv(const Summary& s);
std::string ramified_csv(const Summary& s);
std::string detected_csv(const Summary& s);

// Directory layout: fields.csv, coefficients.qcf, dataset.json.
void save(const Dataset& ds, const std::filesystem::path& dir);
Dataset load(const std::filesystem::path& dir);

// Binary coefficient matrix: "QCF1", u32 LE record count, u32 LE N,
// row-major bytes, then a u64 LE FNV-1a checksum of everything before it.
std::vector<std::uint8_t> encode_coefficients(std::span<const std::uint8_t> matrix,
                                              std::uint32_t records, std::uint32_t N);
struct DecodedCoefficients {
  std::uint32_t records = 0;
  std::uint32_t N = 0;
  std::vector<std::uint8_t> matrix;
};
DecodedCoefficients decode_coefficients(std::span<const std::uint8_t> bytes);

std::string fields_csv(const Dataset& ds);

}  // namespace quadclass::data
