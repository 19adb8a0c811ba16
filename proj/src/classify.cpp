#include "quadclass/classify.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "quadclass/error.hpp"
#include "quadclass/parallel.hpp"

namespace quadclass::classify {

double f12_score(int n_d, Int p1) {
  return 0.17257 * std::sin(1.5703 * static_cast<double>(p1)) + 0.72004 * n_d;
}

bool parity_window(Int p) {
  // Only the window with the nearest multiple of 4 above p can contain it.
  const double x = static_cast<double>(p);
  const auto n = static_cast<Int>(std::floor((x + 2.2724) / 4.0));
  for (Int k = std::max<Int>(1, n - 1); k <= n + 1; ++k) {
    if (4.0 * static_cast<double>(k) - 2.2724 < x && x < 4.0 * static_cast<double>(k) + 0.27174) return true;
  }
  return false;
}

double f13a_score(Int D, double R, double S_chi) {
  if (!(R > 0)) throw std::invalid_argument("f13a_score: R must be positive");
  return 0.5 * std::sqrt(static_cast<double>(D)) * S_chi / R;
}

double f13b_score(int a2, int a3, int a5, Int D, double R) {
  if (!(R > 0)) throw std::invalid_argument("f13b_score: R must be positive");
  const double c5 = std::cos(-0.1952 * a5);
  const double denom = R * std::exp(-0.5468 * a2 - 0.2718 * a3) * std::cos(std::sin(-0.2556 * a3)) *
                       std::cos(-0.1962 * a5) * (c5 * c5 * c5 * c5);
  return 1.8858 * std::sqrt(static_cast<double>(D)) / denom;
}

std::string to_string(Formula f) {
  switch (f) {
    case Formula::f12: return "f12";
    case Formula::f13a: return "f13a";
    case Formula::f13b: return "f13b";
  }
  return "unknown";
}

Formula formula_from_string(const std::string& s) {
  if (s == "f12") return Formula::f12;
  if (s == "f13a") return Formula::f13a;
  if (s == "f13b") return Formula::f13b;
  throw FormatError("unknown formula '" + s + "' (expected f12, f13a or f13b)");
}

double ThresholdPredictor::score(const FieldRecord& r, std::span<const std::uint8_t> coefficients) const {
  switch (formula) {
    case Formula::f12: return f12_score(r.n_d, r.p[0]);
    case Formula::f13a: return f13a_score(r.D, r.R, r.S_chi);
    case Formula::f13b:
      if (coefficients.size() < 5) throw std::invalid_argument("f13b needs coefficients up to a_5");
      return f13b_score(coefficients[1], coefficients[2], coefficients[4], r.D, r.R);
  }
  return 0.0;
}

ThresholdPredictor predictor(Formula f) {
  switch (f) {
    case Formula::f12: return {f, 1.5115, 1, 2};
    case Formula::f13a: return {f, 1.963, 1, 3};
    case Formula::f13b: return {f, 15.97, 1, 3};
  }
  throw std::invalid_argument("predictor: unknown formula");
}

std::vector<std::uint8_t> binary_labels(const Dataset& ds, Int class_low, Int class_high) {
  std::vector<std::uint8_t> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Int h = ds.record(i).h;
    if (h != class_low && h != class_high)
      throw ValidationError("record d = " + std::to_string(ds.record(i).d) + " has h = " + std::to_string(h) +
                            ", outside the classes {" + std::to_string(class_low) + ", " +
                            std::to_string(class_high) + "}");
    out[i] = h == class_low;
  }
  return out;
}

MetricsReport evaluate(const ThresholdPredictor& pred, const Dataset& ds) {
  const auto positive = binary_labels(ds, pred.class_low, pred.class_high);
  std::vector<double> scores(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) scores[i] = pred.score(ds.record(i), ds.coefficients(i));
  double lo = 0.0;
  double hi = 0.0;
  if (!scores.empty()) {
    const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
    lo = *mn;
    hi = *mx;
  }
  std::vector<std::uint8_t> predicted(ds.size());
  std::vector<double> prob(ds.size());
  std::vector<Int> wrong;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    predicted[i] = pred.predict(scores[i]) == pred.class_low;
    const double u = hi > lo ? (scores[i] - lo) / (hi - lo) : 0.5;
    prob[i] = 1.0 - u;
    if (predicted[i] != positive[i]) wrong.push_back(ds.record(i).d);
  }
  auto report = compute_metrics(positive, predicted, prob, pred.class_low, pred.class_high);
  report.misclassified = std::move(wrong);
  return report;
}

std::vector<std::string> parse_feature_tokens(const std::string& spec) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    auto comma = spec.find(',', start);
    if (comma == std::string::npos) comma = spec.size();
    std::string tok = spec.substr(start, comma - start);
    tok.erase(0, tok.find_first_not_of(' '));
    tok.erase(tok.find_last_not_of(' ') + 1);
    if (tok.empty()) throw FormatError("feature list '" + spec + "': empty token");
    out.push_back(tok);
    start = comma + 1;
  }
  return out;
}

FeatureMatrix build_features(const Dataset& ds, const std::vector<std::string>& tokens) {
  // Each column reads one value from (record, coefficients).
  struct Column {
    std::string name;
    int kind;  // 0 coefficient, 1 n_d, 2 p_i, 3 D, 4 R, 5 S_zeta, 6 S_chi
    std::size_t arg;
  };
  const std::size_t N = ds.coeff_bound();
  std::vector<Column> cols;
  auto add_coefficient = [&](std::size_t n) { cols.push_back({"a" + std::to_string(n), 0, n}); };
  auto positive_number = [](std::string_view s) -> std::optional<std::size_t> {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v == 0) return std::nullopt;
    return v;
  };
  for (const auto& tok : tokens) {
    if (tok == "a_p") {
      for (auto p : arith::primes_up_to(static_cast<std::uint32_t>(N))) add_coefficient(p);
    } else if (tok.starts_with("a_p:")) {
      const auto k = positive_number(std::string_view(tok).substr(4));
      if (!k) throw FormatError("bad feature token '" + tok + "'");
      const auto primes = arith::primes_up_to(static_cast<std::uint32_t>(N));
      if (*k > primes.size())
        throw FormatError("feature '" + tok + "' asks for more primes than the coefficient bound holds");
      for (std::size_t i = 0; i < *k; ++i) add_coefficient(primes[i]);
    } else if (tok == "n_d") {
      cols.push_back({"n_d", 1, 0});
    } else if (tok == "p_i") {
      for (std::size_t i = 0; i < 3; ++i) cols.push_back({"p" + std::to_string(i + 1), 2, i});
    } else if (tok == "D") {
      cols.push_back({"D", 3, 0});
    } else if (tok == "R") {
      cols.push_back({"R", 4, 0});
    } else if (tok == "S_zeta") {
      cols.push_back({"S_zeta", 5, 0});
    } else if (tok == "S_chi") {
      cols.push_back({"S_chi", 6, 0});
    } else if (tok.size() > 1 && tok[0] == 'a') {
      const auto n = positive_number(std::string_view(tok).substr(1));
      if (!n) throw FormatError("unknown feature '" + tok + "'");
      if (*n > N) throw FormatError("feature '" + tok + "' exceeds the coefficient bound " + std::to_string(N));
      add_coefficient(*n);
    } else {
      throw FormatError("unknown feature '" + tok + "'");
    }
  }
  std::vector<std::string> names;
  for (const auto& c : cols) {
    if (std::find(names.begin(), names.end(), c.name) != names.end())
      throw FormatError("feature '" + c.name + "' listed twice");
    names.push_back(c.name);
  }

  FeatureMatrix x(ds.size(), names);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const auto& rec = ds.record(r);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      double v = 0.0;
      switch (cols[c].kind) {
        case 0: v = ds.coefficient(r, cols[c].arg); break;
        case 1: v = rec.n_d; break;
        case 2: v = static_cast<double>(rec.p[cols[c].arg]); break;
        case 3: v = static_cast<double>(rec.D); break;
        case 4: v = rec.R; break;
        case 5: v = rec.S_zeta; break;
        case 6: v = rec.S_chi; break;
      }
      x.at(r, c) = v;
    }
  }
  return x;
}

MetricsReport evaluate_model(const BoostedTreesModel& model, const FeatureMatrix& x, const Dataset& ds,
                             Int class_low, Int class_high) {
  const auto positive = binary_labels(ds, class_low, class_high);
  const auto prob = model.probabilities(x);
  std::vector<std::uint8_t> predicted(prob.size());
  std::vector<Int> wrong;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    predicted[i] = prob[i] >= 0.5;
    if (predicted[i] != positive[i]) wrong.push_back(ds.record(i).d);
  }
  auto report = compute_metrics(positive, predicted, prob, class_low, class_high);
  report.misclassified = std::move(wrong);
  return report;
}

GbdtRun train_and_evaluate(const Dataset& train, const Dataset& test, const std::vector<std::string>& tokens,
                           Int class_low, Int class_high, const GbdtConfig& config) {
  const auto x_train = build_features(train, tokens);
  const auto x_test = build_features(test, tokens);
  GbdtRun run;
  run.model = gbdt_train(x_train, binary_labels(train, class_low, class_high), config);
  run.train = evaluate_model(run.model, x_train, train, class_low, class_high);
  run.test = evaluate_model(run.model, x_test, test, class_low, class_high);
  return run;
}

std::vector<AblationRow> standard_ablation_rows() {
  return {
      {1, "(a_p)", {"a_p"}},
      {2, "(a_p), n_d, p_i", {"a_p", "n_d", "p_i"}},
      {3, "(a_p), S_zeta", {"a_p", "S_zeta"}},
      {4, "(a_p), R", {"a_p", "R"}},
      {5, "(a_p), D", {"a_p", "D"}},
      {6, "(a_p), D, R", {"a_p", "D", "R"}},
      {7, "D, R, S_zeta", {"D", "R", "S_zeta"}},
      {8, "(a_p), S_chi", {"a_p", "S_chi"}},
      {9, "D, R, S_chi", {"D", "R", "S_chi"}},
      {10, "(a_p_i) i<=10, D, R", {"a_p:10", "D", "R"}},
      {11, "(a_p_i) i<=5, D, R", {"a_p:5", "D", "R"}},
      {12, "(a_p_i) i<=3, D, R", {"a_p:3", "D", "R"}},
      {13, "(a_p_i) i<=2, D, R", {"a_p:2", "D", "R"}},
      {14, "a_p_1, D, R", {"a_p:1", "D", "R"}},
  };
}

std::vector<AblationRow> ablation_table(const Dataset& ds13, std::vector<AblationRow> rows, double train_fraction,
                                        std::uint64_t seed, const GbdtConfig& config, unsigned threads) {
  const auto classes = ds13.label_classes();
  if (classes.size() != 2) throw ValidationError("ablation_table: dataset must hold exactly two classes");
  const Int low = *classes.begin();
  const Int high = *classes.rbegin();
  const auto [train, test] = data::split(ds13, train_fraction, seed);
  // Validate every row before spending time on training.
  for (const auto& row : rows) build_features(Dataset({}, {}, ds13.coeff_bound(), ds13.provenance(), ""), row.tokens);
  parallel_for(rows.size(), resolve_threads(threads), [&](std::size_t k) {
    rows[k].accuracy = train_and_evaluate(train, test, rows[k].tokens, low, high, config).test.accuracy;
  });
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "row,features,test_accuracy\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.accuracy);
    out += std::to_string(r.row) + ",\"" + r.label + "\"," + buf + "\n";
  }
  return out;
}

CorrelationMatrix correlation_matrix(const Dataset& ds, std::size_t k) {
  if (k == 0 || k > ds.coeff_bound())
    throw std::invalid_argument("correlation_matrix: k must be in [1, " + std::to_string(ds.coeff_bound()) + "]");
  const std::size_t n = ds.size();
  std::vector<double> mean(k, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < k; ++i) mean[i] += ds.coefficient(r, i + 1);
  }
  for (auto& m : mean) m /= n ? static_cast<double>(n) : 1.0;
  std::vector<double> cov(k * k, 0.0);
  std::vector<double> centered(k);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < k; ++i) centered[i] = ds.coefficient(r, i + 1) - mean[i];
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i; j < k; ++j) cov[i * k + j] += centered[i] * centered[j];
    }
  }
  CorrelationMatrix out;
  out.k = k;
  out.values.assign(k * k, 0.0);
  out.constant.assign(k, false);
  for (std::size_t i = 0; i < k; ++i) out.constant[i] = !(cov[i * k + i] > 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    out.values[i * k + i] = 1.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      double c = 0.0;
      if (!out.constant[i] && !out.constant[j])
        c = std::clamp(cov[i * k + j] / std::sqrt(cov[i * k + i] * cov[j * k + j]), -1.0, 1.0);
      out.values[i * k + j] = out.values[j * k + i] = c;
    }
  }
  return out;
}

std::string CorrelationMatrix::to_csv() const {
  std::string out = "i,j,corr\n";
  char buf[64];
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", i + 1, j + 1, at(i, j));
      out += buf;
    }
  }
  return out;
}

}  // namespace quadclass::classify
