#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "quadclass/dataset.hpp"
#include "quadclass/gbdt.hpp"
#include "quadclass/metrics.hpp"

namespace quadclass::classify {

using data::Dataset;
using data::FieldRecord;

// 0.17257 sin(1.5703 p1) + 0.72004 n_d
double f12_score(int n_d, Int p1);
// p lies in some window (4n - 2.2724, 4n + 0.27174), n >= 1.
bool parity_window(Int p);
// sqrt(D) S_chi / (2 R). Throws std::invalid_argument when R <= 0.
double f13a_score(Int D, double R, double S_chi);
// 1.8858 sqrt(D) / (R exp(-0.5468 a2 - 0.2718 a3) cos(sin(-0.2556 a3))
//   cos(-0.1962 a5) cos^4(-0.1952 a5)). Throws when R <= 0.
double f13b_score(int a2, int a3, int a5, Int D, double R);

enum class Formula { f12, f13a, f13b };
std::string to_string(Formula f);
// "f12", "f13a", "f13b"; throws FormatError otherwise.
Formula formula_from_string(const std::string& s);

struct ThresholdPredictor {
  Formula formula = Formula::f12;
  double threshold = 0.0;
  Int class_low = 0;
  Int class_high = 0;

  // The record's coefficients are needed by f13b only.
  double score(const FieldRecord& r, std::span<const std::uint8_t> coefficients) const;
  Int predict(double score) const { return score < threshold ? class_low : class_high; }
};

// Reference thresholds: f12 1.5115 (classes 1, 2), f13a 1.963 and f13b 15.97
// (classes 1, 3).
ThresholdPredictor predictor(Formula f);

// Scores are min-max normalised to a pseudo-probability of class_high.
// Throws ValidationError if a record's h is neither class.
MetricsReport evaluate(const ThresholdPredictor& pred, const Dataset& ds);

// Feature tokens: a_p (a_p for every prime p <= N), a_p:K (first K primes),
// a<n>, n_d, p_i (p1, p2, p3), D, R, S_zeta, S_chi. Throws FormatError on
// unknown tokens.
FeatureMatrix build_features(const Dataset& ds, const std::vector<std::string>& tokens);
// Comma-separated token list.
std::vector<std::string> parse_feature_tokens(const std::string& spec);

// 1 for class_low rows, 0 for class_high; ValidationError for other labels.
std::vector<std::uint8_t> binary_labels(const Dataset& ds, Int class_low, Int class_high);

MetricsReport evaluate_model(const BoostedTreesModel& model, const FeatureMatrix& x, const Dataset& ds,
                             Int class_low, Int class_high);

struct GbdtRun {
  BoostedTreesModel model;
  MetricsReport train;
  MetricsReport test;
};

GbdtRun train_and_evaluate(const Dataset& train, const Dataset& test, const std::vector<std::string>& tokens,
                           Int class_low, Int class_high, const GbdtConfig& config);

struct AblationRow {
  int row = 0;
  std::string label;
  std::vector<std::string> tokens;
  double accuracy = 0.0;  // filled by ablation_table
};

// The fourteen feature combinations of the 1-vs-3 ablation, in order.
std::vector<AblationRow> standard_ablation_rows();

// One boosted-tree run per row, all on the same seeded split.
std::vector<AblationRow> ablation_table(const Dataset& ds13, std::vector<AblationRow> rows, double train_fraction,
                                        std::uint64_t seed, const GbdtConfig& config, unsigned threads = 0);
std::string ablation_csv(const std::vector<AblationRow>& rows);

struct CorrelationMatrix {
  std::size_t k = 0;
  std::vector<double> values;  // row-major k x k
  std::vector<bool> constant;  // zero-variance columns

  double at(std::size_t i, std::size_t j) const { return values[i * k + j]; }
  // "i,j,corr" long format with 1-based coefficient indices.
  std::string to_csv() const;
};

// Pearson correlation of a_1..a_k. A zero-variance column correlates 0 with
// every other column and 1 with itself, and is flagged in `constant`.
CorrelationMatrix correlation_matrix(const Dataset& ds, std::size_t k);

}  // namespace quadclass::classify
