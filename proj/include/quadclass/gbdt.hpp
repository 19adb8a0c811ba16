#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace quadclass::classify {

// Dense row-major feature matrix with column names.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::vector<std::string> names)
      : rows_(rows), names_(std::move(names)), data_(rows_ * names_.size(), 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  const double* row(std::size_t r) const { return data_.data() + r * cols(); }

 private:
  std::size_t rows_ = 0;
  std::vector<std::string> names_;
  std::vector<double> data_;
};

struct GbdtConfig {
  std::size_t trees = 200;
  int depth = 4;
  double learning_rate = 0.1;
  double lambda = 1.0;             // L2 penalty on leaf values
  double min_child_weight = 1e-3;  // minimum hessian sum per child
  double subsample = 1.0;          // row fraction per tree, drawn from the seed
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // rows with x < threshold go left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output, already scaled by the learning rate
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(const double* row) const;
  // Same, with feature `swap_feature` read as `swap_value`.
  double predict(const double* row, std::size_t swap_feature, double swap_value) const;
  bool uses(std::size_t feature) const;
};

class BoostedTreesModel {
 public:
  double base_margin = 0.0;
  std::vector<Tree> trees;
  std::vector<std::string> feature_names;
  GbdtConfig config;
  // Mean logistic loss on the training rows before the first tree and after each tree.
  std::vector<double> train_loss;

  double margin(const double* row) const;
  // Probability of the positive label.
  double probability(const double* row) const;
  std::vector<double> probabilities(const FeatureMatrix& x) const;

  std::string to_json() const;
};

// Logistic-loss Newton boosting with exact splits over every distinct value.
// labels[i] = 1 for the positive class. Throws std::invalid_argument when
// only one label value is present.
BoostedTreesModel gbdt_train(const FeatureMatrix& x, std::span<const std::uint8_t> labels,
                             const GbdtConfig& config = {});

struct FeatureImportance {
  std::string name;
  std::size_t feature = 0;
  double mean_drop = 0.0;  // baseline accuracy minus permuted accuracy
  double stddev = 0.0;
};

// Accuracy drop per feature over `repeats` seeded column permutations,
// sorted by descending mean drop (ties by feature order). Throws
// std::invalid_argument when repeats == 0.
std::vector<FeatureImportance> permutation_importance(const BoostedTreesModel& model, const FeatureMatrix& x,
                                                      std::span<const std::uint8_t> labels, std::uint64_t seed,
                                                      std::size_t repeats, unsigned threads = 0);

std::string importance_csv(const std::vector<FeatureImportance>& ranked);

}  // namespace quadclass::classify
