#include "quadclass/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "quadclass/parallel.hpp"
#include "quadclass/random.hpp"

namespace quadclass::pca {

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

void multiply(const Matrix& m, const Vec& v, Vec& out) {
  out.assign(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + r * m.cols;
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) s += row[c] * v[c];
    out[r] = s;
  }
}

// Two passes of Gram-Schmidt against the accepted vectors.
void orthogonalize(Vec& v, const std::vector<Vec>& basis) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& b : basis) {
      const double c = dot(v, b);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * b[i];
    }
  }
}

double residual(const Matrix& a, const Vec& v, double lambda) {
  Vec w;
  multiply(a, v, w);
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += (w[i] - lambda * v[i]) * (w[i] - lambda * v[i]);
  return std::sqrt(s);
}

// Solves m y = b in place by Gaussian elimination with partial pivoting.
// Returns false when a pivot vanishes.
bool solve(Matrix m, Vec& b) {
  const std::size_t n = m.rows;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
    }
    if (m(piv, col) == 0.0) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(m(piv, c), m(col, c));
      std::swap(b[piv], b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = m(r, col) / m(col, col);
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) m(r, c) -= f * m(col, c);
      b[r] -= f * b[col];
    }
  }
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= m(r, c) * b[c];
    b[r] = s / m(r, r);
  }
  return std::all_of(b.begin(), b.end(), [](double x) { return std::isfinite(x); });
}

void fix_sign(Vec& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (!v.empty() && v[best] < 0) {
    for (auto& x : v) x = -x;
  }
}

}  // namespace

EigenPairs top_eigenpairs(const Matrix& a, std::size_t k, const EigenOptions& options) {
  const std::size_t n = a.rows;
  if (a.cols != n) throw std::invalid_argument("top_eigenpairs: matrix must be square");
  if (k > n) throw std::invalid_argument("top_eigenpairs: k exceeds the dimension");

  double scale = 0.0;
  for (double x : a.data) scale = std::max(scale, std::abs(x));
  const double tiny = std::max(scale, 1e-300) * 1e-14;

  Matrix work = a;
  EigenPairs out;
  Vec w;
  double reference = 0.0;  // largest eigenvalue magnitude so far
  for (std::size_t c = 0; c < k; ++c) {
    Vec v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    orthogonalize(v, out.vectors);
    for (std::uint64_t attempt = 1; norm(v) < 1e-8; ++attempt) {
      // The all-ones start lies in the span already found; perturb deterministically.
      Rng rng(attempt * 0x9e37 + c);
      for (auto& x : v) x = rng.uniform() - 0.5;
      orthogonalize(v, out.vectors);
    }
    const double v_norm = norm(v);
    for (auto& x : v) x /= v_norm;

    bool converged = false;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      multiply(work, v, w);
      orthogonalize(w, out.vectors);
      const double lambda = dot(v, w);
      double r = 0.0;
      for (std::size_t i = 0; i < n; ++i) r += (w[i] - lambda * v[i]) * (w[i] - lambda * v[i]);
      r = std::sqrt(r);
      const double bound = std::max({std::abs(lambda), reference, tiny});
      if (r <= options.tolerance * bound) {
        converged = true;
        break;
      }
      const double wn = norm(w);
      if (wn <= tiny) {
        converged = true;  // remaining spectrum is numerically zero
        break;
      }
      for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / wn;
    }

    if (!converged) {
      // Rayleigh-quotient iteration on the original matrix, started from the
      // power-iteration estimate, which is already close to the target pair.
      Matrix shifted = a;
      for (int step = 0; step < 20; ++step) {
        multiply(a, v, w);
        const double mu = dot(v, w);
        if (residual(a, v, mu) <= options.tolerance * std::max({std::abs(mu), reference, tiny})) break;
        for (std::size_t i = 0; i < n; ++i) shifted(i, i) = a(i, i) - mu;
        Vec y = v;
        if (!solve(shifted, y)) break;
        orthogonalize(y, out.vectors);
        const double yn = norm(y);
        if (!(yn > 0) || !std::isfinite(yn)) break;
        for (std::size_t i = 0; i < n; ++i) v[i] = y[i] / yn;
      }
    }

    multiply(a, v, w);
    const double lambda = dot(v, w);
    reference = std::max(reference, std::abs(lambda));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) work(i, j) -= lambda * v[i] * v[j];
    }
    out.values.push_back(lambda);
    out.vectors.push_back(v);
  }

  // Final modified Gram-Schmidt pass, then sort descending and fix signs.
  for (std::size_t c = 0; c < out.vectors.size(); ++c) {
    std::vector<Vec> previous(out.vectors.begin(), out.vectors.begin() + static_cast<std::ptrdiff_t>(c));
    orthogonalize(out.vectors[c], previous);
    const double vn = norm(out.vectors[c]);
    for (auto& x : out.vectors[c]) x /= vn;
  }
  std::vector<std::size_t> order(out.values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return out.values[x] > out.values[y]; });
  EigenPairs sorted;
  for (auto i : order) {
    sorted.values.push_back(out.values[i]);
    sorted.vectors.push_back(std::move(out.vectors[i]));
    fix_sign(sorted.vectors.back());
  }
  return sorted;
}

Matrix covariance(const Matrix& x, const std::vector<double>& mean, unsigned threads) {
  const std::size_t n = x.rows;
  const std::size_t p = x.cols;
  Matrix cov(p, p);
  if (n < 2) return cov;
  constexpr std::size_t kBlock = 512;
  std::vector<double> block(p * kBlock);  // feature-major slice of centred rows
  const unsigned workers = resolve_threads(threads);
  constexpr std::size_t kRowsPerChunk = 8;
  for (std::size_t start = 0; start < n; start += kBlock) {
    const std::size_t len = std::min(kBlock, n - start);
    for (std::size_t r = 0; r < len; ++r) {
      const double* row = x.data.data() + (start + r) * p;
      for (std::size_t f = 0; f < p; ++f) block[f * kBlock + r] = row[f] - mean[f];
    }
    parallel_for((p + kRowsPerChunk - 1) / kRowsPerChunk, workers, [&](std::size_t chunk) {
      const std::size_t end = std::min(p, (chunk + 1) * kRowsPerChunk);
      for (std::size_t i = chunk * kRowsPerChunk; i < end; ++i) {
        const double* bi = block.data() + i * kBlock;
        std::size_t j = i;
        for (; j + 4 <= p; j += 4) {
          const double* b0 = block.data() + j * kBlock;
          const double* b1 = b0 + kBlock;
          const double* b2 = b1 + kBlock;
          const double* b3 = b2 + kBlock;
          double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
          for (std::size_t t = 0; t < len; ++t) {
            const double v = bi[t];
            s0 += v * b0[t];
            s1 += v * b1[t];
            s2 += v * b2[t];
            s3 += v * b3[t];
          }
          cov(i, j) += s0;
          cov(i, j + 1) += s1;
          cov(i, j + 2) += s2;
          cov(i, j + 3) += s3;
        }
        for (; j < p; ++j) {
          const double* bj = block.data() + j * kBlock;
          double s = 0;
          for (std::size_t t = 0; t < len; ++t) s += bi[t] * bj[t];
          cov(i, j) += s;
        }
      }
    });
  }
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) {
      cov(i, j) /= denom;
      cov(j, i) = cov(i, j);
    }
  }
  return cov;
}

std::vector<double> PcaModel::explained_variance_ratio() const {
  std::vector<double> out;
  for (double l : eigenvalues) out.push_back(total_variance > 0 ? l / total_variance : 0.0);
  return out;
}

std::string PcaModel::to_json() const {
  nlohmann::ordered_json j;
  j["features"] = features();
  j["eigenvalues"] = eigenvalues;
  j["explained_variance_ratio"] = explained_variance_ratio();
  j["total_variance"] = total_variance;
  j["max_relative_residual"] = max_relative_residual;
  j["mean"] = mean;
  j["components"] = components;
  return j.dump() + "\n";
}

PcaModel pca_fit(const Matrix& x, std::size_t k, unsigned threads, const EigenOptions& options) {
  if (k == 0) throw std::invalid_argument("pca_fit: k must be >= 1");
  if (k > x.cols) throw std::invalid_argument("pca_fit: k exceeds the feature count");
  if (x.rows < k + 1) throw std::invalid_argument("pca_fit: need at least k + 1 rows");
  PcaModel model;
  model.mean.assign(x.cols, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) model.mean[c] += x(r, c);
  }
  for (auto& m : model.mean) m /= static_cast<double>(x.rows);
  const Matrix cov = covariance(x, model.mean, threads);
  for (std::size_t i = 0; i < cov.rows; ++i) model.total_variance += cov(i, i);

  auto pairs = top_eigenpairs(cov, k, options);
  const double top = std::max(std::abs(pairs.values.empty() ? 0.0 : pairs.values[0]), 1e-300);
  for (std::size_t c = 0; c < k; ++c) {
    model.max_relative_residual =
        std::max(model.max_relative_residual, residual(cov, pairs.vectors[c], pairs.values[c]) / top);
    model.eigenvalues.push_back(std::max(0.0, pairs.values[c]));
    model.components.push_back(std::move(pairs.vectors[c]));
  }
  return model;
}

Matrix pca_project(const PcaModel& model, const Matrix& x) {
  if (x.cols != model.features())
    throw std::invalid_argument("pca_project: matrix has " + std::to_string(x.cols) + " features, model expects " +
                                std::to_string(model.features()));
  const std::size_t k = model.components.size();
  Matrix out(x.rows, k);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      const auto& comp = model.components[c];
      double s = 0.0;
      for (std::size_t f = 0; f < x.cols; ++f) s += (x(r, f) - model.mean[f]) * comp[f];
      out(r, c) = s;
    }
  }
  return out;
}

Matrix coefficient_matrix(const data::Dataset& ds, const std::vector<std::uint32_t>& indices) {
  for (auto n : indices) {
    if (n < 1 || n > ds.coeff_bound())
      throw std::out_of_range("coefficient index " + std::to_string(n) + " outside [1, " +
                              std::to_string(ds.coeff_bound()) + "]");
  }
  Matrix x(ds.size(), indices.size());
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t c = 0; c < indices.size(); ++c) x(r, c) = ds.coefficient(r, indices[c]);
  }
  return x;
}

std::string projection_csv(const data::Dataset& ds, const Matrix& projected) {
  if (projected.rows != ds.size()) throw std::invalid_argument("projection_csv: row count mismatch");
  std::string out = "d,h";
  for (std::size_t c = 0; c < projected.cols; ++c) out += ",pc" + std::to_string(c + 1);
  out += '\n';
  char buf[32];
  for (std::size_t r = 0; r < projected.rows; ++r) {
    out += std::to_string(ds.record(r).d) + "," + std::to_string(ds.record(r).h);
    for (std::size_t c = 0; c < projected.cols; ++c) {
      std::snprintf(buf, sizeof buf, ",%.17g", projected(r, c));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace quadclass::pca
