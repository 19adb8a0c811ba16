#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quadclass/dataset.hpp"

namespace quadclass::pca {

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct PcaModel {
  std::vector<double> mean;
  std::vector<std::vector<double>> components;  // orthonormal rows
  std::vector<double> eigenvalues;              // descending, >= 0
  double total_variance = 0.0;                  // trace of the covariance
  // Largest |C v - lambda v| over the components, in units of the top eigenvalue.
  double max_relative_residual = 0.0;

  std::size_t features() const { return mean.size(); }
  std::vector<double> explained_variance_ratio() const;
  std::string to_json() const;
};

struct EigenOptions {
  double tolerance = 1e-12;
  std::size_t max_iterations = 10'000;
};

struct EigenPairs {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
};

// Sample covariance (divisor n - 1) of the mean-centred rows.
Matrix covariance(const Matrix& x, const std::vector<double>& mean, unsigned threads = 0);

// Top-k eigenpairs of a symmetric matrix by power iteration with Hotelling
// deflation, finished with Rayleigh-quotient steps when the residual stalls.
// Each vector's largest-magnitude entry is made positive.
EigenPairs top_eigenpairs(const Matrix& symmetric, std::size_t k, const EigenOptions& options = {});

// Throws std::invalid_argument if k is 0, exceeds the feature count, or
// the matrix has fewer than k + 1 rows.
PcaModel pca_fit(const Matrix& x, std::size_t k, unsigned threads = 0, const EigenOptions& options = {});

// (x - mean) components^T. Throws std::invalid_argument on a feature-count mismatch.
Matrix pca_project(const PcaModel& model, const Matrix& x);

// Rows are records, columns a_n for n in indices (1-based).
Matrix coefficient_matrix(const data::Dataset& ds, const std::vector<std::uint32_t>& indices);

// "d,h,pc1,...,pck" in dataset order.
std::string projection_csv(const data::Dataset& ds, const Matrix& projected);

}  // namespace quadclass::pca
