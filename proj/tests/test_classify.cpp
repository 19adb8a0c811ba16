#include <doctest.h>

#include <cmath>
#include <random>

#include "quadclass/arithmetic.hpp"
#include "quadclass/classify.hpp"
#include "quadclass/error.hpp"
#include "support.hpp"

using namespace quadclass::classify;
using quadclass::data::Dataset;

namespace {

const Dataset& data_of(std::set<Int> classes) {
  static std::map<std::set<Int>, Dataset> cache;
  auto it = cache.find(classes);
  if (it == cache.end()) {
    quadclass::data::GenerateOptions opt;
    opt.max_D = 30'000;
    opt.classes = classes;
    opt.coeff_bound = 30;
    it = cache.emplace(classes, quadclass::data::generate(opt)).first;
  }
  return it->second;
}

std::vector<std::uint8_t> bits(std::initializer_list<int> v) { return {v.begin(), v.end()}; }

// Pairwise AUC, counting ties as half.
double auc_oracle(const std::vector<std::uint8_t>& pos, const std::vector<double>& s) {
  double wins = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (pos[i] && !pos[j]) {
        ++pairs;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / static_cast<double>(pairs);
}

double ks_oracle(const std::vector<std::uint8_t>& pos, const std::vector<double>& s) {
  double best = 0;
  for (double t : s) {
    double np = 0, nn = 0, cp = 0, cn = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      (pos[i] ? np : nn) += 1;
      if (s[i] <= t) (pos[i] ? cp : cn) += 1;
    }
    best = std::max(best, std::abs(cp / np - cn / nn));
  }
  return best;
}

}  // namespace

TEST_CASE("f12 score and window") {
  CHECK(f12_score(2, 5) == doctest::Approx(1.61264946861).epsilon(1e-10));
  CHECK(parity_window(2));
  CHECK(parity_window(7));
  CHECK(parity_window(3));
  CHECK_FALSE(parity_window(5));
  CHECK_FALSE(parity_window(13));

  for (auto p : quadclass::arith::primes_up_to(100'000)) {
    CAPTURE(p);
    REQUIRE(parity_window(static_cast<Int>(p)) == (p == 2 || p % 4 == 3));
  }

  // The sine argument 1.5703 p drifts from (pi/2) p; the p mod 4 dichotomy
  // survives up to 2297 and breaks at 2309.
  const double t = predictor(Formula::f12).threshold;
  for (auto p : quadclass::arith::primes_up_to(2297)) {
    if (p == 2) continue;
    CAPTURE(p);
    REQUIRE((f12_score(2, static_cast<Int>(p)) > t) == (p % 4 == 1));
  }
  CHECK_FALSE((f12_score(2, 2309) > t) == (2309 % 4 == 1));
}

TEST_CASE("f12 on one and three ramified primes") {
  const auto pred = predictor(Formula::f12);
  CHECK(pred.threshold == doctest::Approx(1.5115));
  for (Int p : {2, 3, 5, 7, 229, 9973}) {
    CHECK(pred.predict(f12_score(1, p)) == 1);
    CHECK(pred.predict(f12_score(3, p)) == 2);
  }
  const auto& ds = data_of({1, 2});
  for (const auto& r : ds.records()) {
    if (r.n_d == 1) REQUIRE(r.h == 1);
    if (r.n_d == 3) REQUIRE(r.h == 2);
  }
}

TEST_CASE("f13 scores") {
  const auto r5 = testing::dataset_of({5}, 1000);
  const auto& rec = r5.record(0);
  CHECK(f13a_score(rec.D, rec.R, rec.S_chi) == doctest::Approx(0.999999070656).epsilon(1e-9));
  const auto r229 = testing::dataset_of({229}, 1000).record(0);
  CHECK(f13a_score(r229.D, r229.R, r229.S_chi) == doctest::Approx(3.0).epsilon(0.02));
  CHECK(f13b_score(0, 0, 1, 5, rec.R) == doctest::Approx(9.64640976654).epsilon(1e-9));
  CHECK(predictor(Formula::f13b).predict(f13b_score(0, 0, 1, 5, rec.R)) == 1);
  CHECK_THROWS_AS(f13a_score(5, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(f13b_score(0, 0, 1, 5, -1.0), std::invalid_argument);

  // The predictor pulls a2, a3, a5 from the coefficient row.
  const auto pred = predictor(Formula::f13b);
  CHECK(pred.score(rec, r5.coefficients(0)) == doctest::Approx(9.64640976654).epsilon(1e-9));

  CHECK(formula_from_string("f13a") == Formula::f13a);
  CHECK(to_string(Formula::f13b) == "f13b");
  CHECK_THROWS_AS(formula_from_string("f14"), quadclass::FormatError);
}

TEST_CASE("metric identities") {
  const auto pos = bits({1, 1, 1, 0, 0, 0, 0, 1});
  const auto pred = bits({1, 0, 1, 0, 1, 0, 0, 1});
  const std::vector<double> prob{0.9, 0.4, 0.8, 0.1, 0.6, 0.2, 0.3, 0.7};
  const auto m = compute_metrics(pos, pred, prob, 1, 3);
  CHECK(m.confusion.tp == 3);
  CHECK(m.confusion.fn == 1);
  CHECK(m.confusion.fp == 1);
  CHECK(m.confusion.tn == 3);
  CHECK(m.accuracy == doctest::Approx(0.75));
  CHECK(m.f1 == doctest::Approx(2 * m.precision * m.recall / (m.precision + m.recall)));
  CHECK(m.mcc == doctest::Approx(0.5));
  CHECK(m.auc == doctest::Approx(auc_oracle(pos, prob)));
  CHECK(m.ks == doctest::Approx(ks_oracle(pos, prob)));

  std::size_t binned = 0;
  for (const auto& b : m.calibration) binned += b.count;
  CHECK(m.calibration.size() == 10);
  CHECK(binned == pos.size());

  // Swapping which label is positive flips the sign of MCC only.
  std::vector<std::uint8_t> pos2, pred2;
  std::vector<double> prob2;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    pos2.push_back(!pos[i]);
    pred2.push_back(pred[i]);
    prob2.push_back(prob[i]);
  }
  CHECK(compute_metrics(pos2, pred2, prob2, 3, 1).mcc == doctest::Approx(-m.mcc));

  const auto constant = compute_metrics(pos, bits({1, 1, 1, 1, 1, 1, 1, 1}), prob, 1, 3);
  CHECK(constant.mcc == 0.0);

  const std::vector<double> separated{0.9, 0.8, 0.95, 0.1, 0.2, 0.3, 0.0, 0.7};
  CHECK(roc_auc(pos, separated) == doctest::Approx(1.0));
  CHECK(ks_statistic(pos, separated) == doctest::Approx(1.0));
  CHECK(roc_auc(bits({1, 1}), std::vector<double>{0.1, 0.2}) == 0.5);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint8_t> p;
    std::vector<double> s;
    for (int i = 0; i < 40; ++i) {
      p.push_back(u(rng) < 0.4);
      s.push_back(std::round(u(rng) * 10) / 10);  // ties on purpose
    }
    p[0] = 1;
    p[1] = 0;
    CHECK(roc_auc(p, s) == doctest::Approx(auc_oracle(p, s)));
    CHECK(ks_statistic(p, s) == doctest::Approx(ks_oracle(p, s)));
  }
}

TEST_CASE("evaluate matches a direct recount") {
  const auto& ds = data_of({1, 2});
  const auto pred = predictor(Formula::f12);
  const auto m = evaluate(pred, ds);
  std::size_t correct = 0, fn = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.record(i);
    const Int guess = pred.predict(f12_score(r.n_d, r.p[0]));
    if (guess == r.h) ++correct;
    if (r.h == 1 && guess == 2) ++fn;
  }
  CHECK(m.accuracy == doctest::Approx(static_cast<double>(correct) / ds.size()));
  CHECK(m.confusion.fn == fn);
  CHECK(m.misclassified.size() == ds.size() - correct);
  CHECK(m.accuracy > 0.95);

  // A subset in a different index order evaluates the same records.
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = idx.size() - 1 - i;
  CHECK(evaluate(pred, ds.subset(idx, "reversed")).accuracy == m.accuracy);

  CHECK_THROWS_AS(evaluate(pred, data_of({1, 3})), quadclass::ValidationError);
}

TEST_CASE("f13 predictors on class 1 vs 3") {
  const auto& ds = data_of({1, 3});
  CHECK(evaluate(predictor(Formula::f13a), ds).accuracy > 0.99);
  CHECK(evaluate(predictor(Formula::f13b), ds).accuracy > 0.9);
}

TEST_CASE("features") {
  const auto& ds = data_of({1, 3});
  const auto tokens = parse_feature_tokens("a_p:3,n_d,p_i,a4,D,R,S_chi");
  CHECK(tokens.size() == 7);
  const auto x = build_features(ds, tokens);
  CHECK(x.rows() == ds.size());
  REQUIRE(x.cols() == 3 + 1 + 3 + 1 + 3);
  for (std::size_t i = 0; i < ds.size(); i += 97) {
    const auto& r = ds.record(i);
    CHECK(x.at(i, 0) == ds.coefficient(i, 2));
    CHECK(x.at(i, 1) == ds.coefficient(i, 3));
    CHECK(x.at(i, 2) == ds.coefficient(i, 5));
    CHECK(x.at(i, 3) == r.n_d);
    CHECK(x.at(i, 4) == r.p[0]);
    CHECK(x.at(i, 7) == ds.coefficient(i, 4));
    CHECK(x.at(i, 9) == r.R);
  }
  // a_p covers every prime up to the coefficient bound.
  CHECK(build_features(ds, {"a_p"}).cols() == quadclass::arith::primes_up_to(30).size());
  CHECK_THROWS_AS(build_features(ds, {"zeta"}), quadclass::FormatError);
  CHECK_THROWS_AS(build_features(ds, {"a31"}), quadclass::FormatError);

  const auto labels = binary_labels(ds, 1, 3);
  for (std::size_t i = 0; i < ds.size(); ++i) REQUIRE(labels[i] == (ds.record(i).h == 1));
  CHECK_THROWS_AS(binary_labels(ds, 1, 2), quadclass::ValidationError);
}

TEST_CASE("boosted trees") {
  // y = (x0 > 0.5) xor (x1 > 0.5) with a noise column and a constant column.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  FeatureMatrix x(600, {"x0", "x1", "noise", "const"});
  std::vector<std::uint8_t> y(600);
  for (std::size_t i = 0; i < 600; ++i) {
    x.at(i, 0) = u(rng);
    x.at(i, 1) = u(rng);
    x.at(i, 2) = u(rng);
    x.at(i, 3) = 4.0;
    y[i] = (x.at(i, 0) > 0.5) != (x.at(i, 1) > 0.5);
  }
  GbdtConfig cfg;
  cfg.trees = 40;
  cfg.depth = 3;
  cfg.seed = 3;
  const auto model = gbdt_train(x, y, cfg);
  REQUIRE(model.train_loss.size() == cfg.trees + 1);
  for (std::size_t i = 1; i < model.train_loss.size(); ++i) REQUIRE(model.train_loss[i] <= model.train_loss[i - 1] + 1e-12);
  CHECK(model.train_loss.back() < 0.2);

  std::size_t correct = 0;
  const auto p = model.probabilities(x);
  for (std::size_t i = 0; i < 600; ++i) correct += (p[i] > 0.5) == (y[i] == 1);
  CHECK(correct > 580);

  CHECK(gbdt_train(x, y, cfg).to_json() == model.to_json());
  for (const auto& t : model.trees) CHECK_FALSE(t.uses(3));

  const auto ranked = permutation_importance(model, x, y, 5, 3);
  REQUIRE(ranked.size() == 4);
  CHECK(((ranked[0].name == "x0" && ranked[1].name == "x1") || (ranked[0].name == "x1" && ranked[1].name == "x0")));
  for (const auto& f : ranked)
    if (f.name == "const") CHECK(f.mean_drop == 0.0);
  CHECK(importance_csv(ranked).rfind("rank,feature,mean_drop,stddev\n", 0) == 0);
  CHECK(permutation_importance(model, x, y, 5, 3, 1).front().mean_drop ==
        permutation_importance(model, x, y, 5, 3, 4).front().mean_drop);
  CHECK_THROWS_AS(permutation_importance(model, x, y, 5, 0), std::invalid_argument);

  std::vector<std::uint8_t> one(600, 1);
  CHECK_THROWS_AS(gbdt_train(x, one, cfg), std::invalid_argument);
}

TEST_CASE("gbdt on class numbers and the ablation table") {
  const auto& ds = data_of({1, 3});
  auto [train, test] = quadclass::data::split(ds, 0.7, 9);
  GbdtConfig cfg;
  cfg.trees = 30;
  cfg.depth = 3;
  cfg.seed = 9;
  const auto run = train_and_evaluate(train, test, {"a_p:10", "R", "D"}, 1, 3, cfg);
  CHECK(run.test.accuracy > 0.9);
  CHECK(run.train.confusion.total() == train.size());
  CHECK(run.test.confusion.total() == test.size());

  auto rows = standard_ablation_rows();
  REQUIRE(rows.size() == 14);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].row == static_cast<int>(i + 1));
  cfg.trees = 10;
  rows.resize(3);
  const auto table = ablation_table(ds, rows, 0.7, 9, cfg);
  REQUIRE(table.size() == 3);
  for (const auto& r : table) CHECK((r.accuracy > 0.0 && r.accuracy <= 1.0));
  const auto csv = ablation_csv(table);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("coefficient correlation") {
  const auto& ds = data_of({1, 2});
  const auto c = correlation_matrix(ds, 10);
  REQUIRE(c.k == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(c.at(i, i) == doctest::Approx(1.0));
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) REQUIRE(c.at(i, j) == doctest::Approx(c.at(j, i)));
  CHECK(c.constant[0]);
  CHECK_FALSE(c.constant[1]);
  CHECK(c.at(0, 3) == 0.0);
  CHECK(c.at(1, 3) > 0.6);  // a2 and a4 share the splitting of 2
  CHECK(std::abs(c.at(1, 2)) < 0.2);
  CHECK(c.to_csv().rfind("i,j,corr\n", 0) == 0);
}
