#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "quadclass/arithmetic.hpp"

namespace quadclass::classify {

using arith::Int;

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_predicted = 0.0;  // 0 for empty bins
  double observed = 0.0;        // fraction positive; 0 for empty bins
};

// Binary metrics with class_low as the positive class.
struct MetricsReport {
  Int class_low = 0;
  Int class_high = 0;
  Confusion confusion;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double mcc = 0.0;
  double auc = 0.0;
  double log_loss = 0.0;
  double ks = 0.0;
  std::vector<CalibrationBin> calibration;  // 10 equal-width bins over [0, 1]
  std::vector<Int> misclassified;           // d of every wrong prediction, if known

  std::string to_json(bool pretty = false) const;
  // "bin,lower,upper,count,mean_predicted,observed"
  std::string calibration_csv() const;
  // "actual,predicted,count" over both labels
  std::string confusion_csv() const;
};

// positive[i]: ground truth is class_low. predicted[i]: prediction is
// class_low. prob[i]: probability assigned to class_low.
MetricsReport compute_metrics(std::span<const std::uint8_t> positive, std::span<const std::uint8_t> predicted,
                              std::span<const double> prob, Int class_low, Int class_high);

// Area under the ROC curve by the rank statistic with tied midranks.
// 0.5 when either class is absent.
double roc_auc(std::span<const std::uint8_t> positive, std::span<const double> score);
// max |F_pos(s) - F_neg(s)| over thresholds s; 0 when either class is absent.
double ks_statistic(std::span<const std::uint8_t> positive, std::span<const double> score);

}  // namespace quadclass::classify
