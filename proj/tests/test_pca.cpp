#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "quadclass/pca.hpp"
#include "support.hpp"

using namespace quadclass::pca;

namespace {

// Cyclic Jacobi rotations; returns eigenvalues in descending order.
std::vector<double> jacobi_eigenvalues(Matrix a) {
  const std::size_t n = a.rows;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a(i, i);
  std::sort(out.rbegin(), out.rend());
  return out;
}

Matrix correlated_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  Matrix x(rows, cols);
  // Correlated columns with distinct scales.
  for (std::size_t r = 0; r < rows; ++r) {
    double carry = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      carry = 0.6 * carry + g(rng) * (1.0 + c);
      x(r, c) = carry;
    }
  }
  return x;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("points on a line have one component") {
  Matrix x(50, 3);
  for (std::size_t r = 0; r < 50; ++r) {
    const double t = static_cast<double>(r) - 7.0;
    x(r, 0) = 1 + 2 * t;
    x(r, 1) = -3 + t;
    x(r, 2) = 2 * t;
  }
  const auto model = pca_fit(x, 2);
  CHECK(model.eigenvalues[1] == doctest::Approx(0.0).epsilon(1e-9).scale(model.eigenvalues[0]));
  CHECK(model.explained_variance_ratio()[0] == doctest::Approx(1.0));
  const double n = std::sqrt(9.0);
  CHECK(std::abs(model.components[0][0]) == doctest::Approx(2 / n));
  CHECK(std::abs(model.components[0][1]) == doctest::Approx(1 / n));
}

TEST_CASE("eigenpairs against Jacobi") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a(5, 5);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = u(rng);
    // Shift to positive definite so "top" means largest.
    for (std::size_t i = 0; i < 5; ++i) a(i, i) += 5;
    const auto oracle = jacobi_eigenvalues(a);
    const auto pairs = top_eigenpairs(a, 5);
    REQUIRE(pairs.values.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
      CAPTURE(k);
      CHECK(pairs.values[k] == doctest::Approx(oracle[k]).epsilon(1e-8));
      const auto& v = pairs.vectors[k];
      for (std::size_t i = 0; i < 5; ++i) {
        double av = 0;
        for (std::size_t j = 0; j < 5; ++j) av += a(i, j) * v[j];
        CHECK(std::abs(av - pairs.values[k] * v[i]) < 1e-8);
      }
      const auto big = std::max_element(v.begin(), v.end(), [](double p, double q) { return std::abs(p) < std::abs(q); });
      CHECK(*big > 0);
    }
  }
}

TEST_CASE("fit properties") {
  const auto x = correlated_rows(400, 6, 4);
  const auto model = pca_fit(x, 4);
  CHECK(model.max_relative_residual <= 1e-8);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(dot(model.components[i], model.components[j]) - (i == j)) <= 1e-10);
  for (std::size_t i = 1; i < 4; ++i) CHECK(model.eigenvalues[i] <= model.eigenvalues[i - 1]);
  double ratio = 0;
  for (double r : model.explained_variance_ratio()) ratio += r;
  CHECK(ratio <= 1.0 + 1e-12);

  // Covariance against a two-pass oracle.
  const auto c = covariance(x, model.mean);
  double s = 0;
  for (std::size_t r = 0; r < 400; ++r) s += (x(r, 1) - model.mean[1]) * (x(r, 4) - model.mean[4]);
  CHECK(c(1, 4) == doctest::Approx(s / 399));
  double trace = 0;
  for (std::size_t i = 0; i < 6; ++i) trace += c(i, i);
  CHECK(model.total_variance == doctest::Approx(trace));

  // Thread count does not change the fit.
  CHECK(pca_fit(x, 4, 1).to_json() == pca_fit(x, 4, 3).to_json());

  // Translating the data moves only the mean.
  Matrix shifted = x;
  for (std::size_t r = 0; r < 400; ++r)
    for (std::size_t j = 0; j < 6; ++j) shifted(r, j) += 100.0 * (j + 1);
  const auto moved = pca_fit(shifted, 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(moved.eigenvalues[k] == doctest::Approx(model.eigenvalues[k]).epsilon(1e-8));
    CHECK(std::abs(dot(moved.components[k], model.components[k])) == doctest::Approx(1.0).epsilon(1e-8));
  }

  // The mean projects to the origin, mean + v_k to the k-th unit vector.
  Matrix probe(1 + 4, 6);
  for (std::size_t j = 0; j < 6; ++j) probe(0, j) = model.mean[j];
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t j = 0; j < 6; ++j) probe(1 + k, j) = model.mean[j] + model.components[k][j];
  const auto y = pca_project(model, probe);
  REQUIRE(y.cols == 4);
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(y(0, j)) < 1e-9);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(y(1 + k, j) - (k == j)) < 1e-9);
}

TEST_CASE("first component maximises projected variance") {
  const auto x = correlated_rows(300, 5, 8);
  const auto model = pca_fit(x, 1);
  const auto c = covariance(x, model.mean);
  auto quad = [&](const std::vector<double>& v) {
    double s = 0;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) s += v[i] * c(i, j) * v[j];
    return s;
  };
  CHECK(quad(model.components[0]) == doctest::Approx(model.eigenvalues[0]));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> v(5);
    for (double& e : v) e = g(rng);
    const double n = std::sqrt(dot(v, v));
    for (double& e : v) e /= n;
    REQUIRE(quad(v) <= model.eigenvalues[0] * (1 + 1e-12));
  }
}

TEST_CASE("argument errors") {
  const auto x = correlated_rows(10, 3, 2);
  CHECK_THROWS_AS(pca_fit(x, 0), std::invalid_argument);
  CHECK_THROWS_AS(pca_fit(x, 4), std::invalid_argument);
  CHECK_THROWS_AS(pca_fit(correlated_rows(3, 3, 2), 3), std::invalid_argument);
  const auto model = pca_fit(x, 2);
  CHECK_THROWS_AS(pca_project(model, Matrix(2, 4)), std::invalid_argument);
}

TEST_CASE("coefficient vectors of fields") {
  const auto ds = testing::dataset_of({2, 3, 5, 6, 7, 10, 11, 13, 14, 15, 17, 19, 21, 22, 23}, 50);
  const auto m = coefficient_matrix(ds, {2, 3, 5, 7});
  REQUIRE(m.rows == ds.size());
  REQUIRE(m.cols == 4);
  CHECK(m(2, 2) == ds.coefficient(2, 5));
  const auto model = pca_fit(m, 2);
  const auto y = pca_project(model, m);
  const auto csv = projection_csv(ds, y);
  CHECK(csv.rfind("d,h,pc1,pc2\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(ds.size() + 1));
  CHECK(csv.find("\n2,1,") != std::string::npos);
}
