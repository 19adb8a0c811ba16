// quadclass command-line front end.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "quadclass/bubble.hpp"
#include "quadclass/checksum.hpp"
#include "quadclass/classify.hpp"
#include "quadclass/dataset.hpp"
#include "quadclass/error.hpp"
#include "quadclass/genus.hpp"
#include "quadclass/parallel.hpp"
#include "quadclass/pca.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using quadclass::arith::Int;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;

struct Common {
  unsigned threads = 0;
  bool pretty = false;
  std::string out;
};

struct Run {
  CLI::App* sub = nullptr;
  std::string dataset_checksum;
  std::optional<std::uint64_t> seed;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw quadclass::Error("cannot write " + path.string());
  out << text;
}

json manifest(const Run& run) {
  json params = json::object();
  for (const CLI::Option* opt : run.sub->get_options()) {
    if (opt->get_name() == "--help" || opt->get_name() == "-h") continue;
    if (opt->count() == 0) {
      params[opt->get_name()] = opt->get_default_str();
      continue;
    }
    const auto& res = opt->results();
    if (opt->get_type_size_max() == 0) {
      params[opt->get_name()] = true;
    } else if (res.size() == 1) {
      params[opt->get_name()] = res[0];
    } else {
      params[opt->get_name()] = res;
    }
  }
  json m;
  m["subcommand"] = run.sub->get_name();
  m["parameters"] = params;
  m["dataset_checksum"] = run.dataset_checksum.empty() ? json(nullptr) : json(run.dataset_checksum);
  m["seed"] = run.seed ? json(*run.seed) : json(nullptr);
  m["version"] = QUADCLASS_VERSION;
  m["wall_time_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - run.start).count();
  return m;
}

// Writes `name` under --out, or prints it to stdout when no directory was given.
class Sink {
 public:
  Sink(const Common& common, Run& run) : common_(common), run_(run) {
    if (!common_.out.empty()) fs::create_directories(common_.out);
  }
  void emit(const std::string& name, const std::string& text) {
    if (common_.out.empty()) {
      std::cout << text;
      if (!text.empty() && text.back() != '\n') std::cout << '\n';
    } else {
      write_text(fs::path(common_.out) / name, text);
    }
  }
  void finish() {
    const std::string text = manifest(run_).dump(common_.pretty ? 2 : -1) + "\n";
    if (common_.out.empty()) {
      std::cerr << text;
    } else {
      write_text(fs::path(common_.out) / "manifest.json", text);
    }
  }

 private:
  const Common& common_;
  Run& run_;
};

quadclass::data::Dataset open_dataset(const std::string& dir, Run& run) {
  auto ds = quadclass::data::load(dir);
  run.dataset_checksum = quadclass::to_hex(ds.checksum());
  return ds;
}

std::string dump(const json& j, bool pretty) { return j.dump(pretty ? 2 : -1) + "\n"; }

void add_common(CLI::App* sub, Common& c, bool out_required) {
  sub->add_option("--threads", c.threads, "Worker threads (default: QUADCLASS_THREADS or all cores)");
  sub->add_flag("--pretty", c.pretty, "Indent JSON output");
  auto* out = sub->add_option("--out", c.out,
                              out_required ? "Output directory"
                                           : "Output directory (default: results on stdout, manifest on stderr)");
  if (out_required) out->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Real quadratic field datasets: generation, genus checks, bubble search, classifiers, PCA"};
  app.set_version_flag("--version", std::string(QUADCLASS_VERSION));
  app.require_subcommand(1);

  Common common;
  Run run;
  std::function<int()> action;

  // generate
  quadclass::data::GenerateOptions gen;
  std::vector<Int> gen_classes{1, 2};
  auto* g = app.add_subcommand("generate", "Compute every field with D <= max-D and h in the given classes");
  g->add_option("--max-D", gen.max_D, "Discriminant bound")->capture_default_str()->check(CLI::Range(Int{5}, Int{1} << 40));
  g->add_option("--classes", gen_classes, "Class numbers to keep, comma separated")->delimiter(',')->capture_default_str();
  g->add_option("--coeff-bound", gen.coeff_bound, "Number of zeta coefficients per field")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{1}, std::size_t{1'000'000}));
  add_common(g, common, true);
  g->callback([&] {
    action = [&] {
      gen.classes = std::set<Int>(gen_classes.begin(), gen_classes.end());
      gen.threads = common.threads;
      const auto ds = quadclass::data::generate(gen);
      quadclass::data::save(ds, common.out);
      run.dataset_checksum = quadclass::to_hex(ds.checksum());
      Sink sink(common, run);
      sink.finish();
      std::cout << "records: " << ds.size() << "\n";
      return 0;
    };
  });

  // import
  std::string import_csv_path;
  quadclass::data::ImportOptions imp;
  std::vector<Int> imp_classes;
  bool imp_trust_h = false;
  auto* im = app.add_subcommand("import", "Import and validate a CSV with columns d, D, h, R (plus optional extras)");
  im->add_option("--csv", import_csv_path, "Input CSV")->required()->check(CLI::ExistingFile);
  im->add_option("--coeff-bound", imp.coeff_bound, "Number of zeta coefficients per field")->capture_default_str();
  im->add_option("--classes", imp_classes, "Keep only these class numbers")->delimiter(',');
  im->add_option("--regulator-tolerance", imp.regulator_tolerance, "Relative tolerance for R")->capture_default_str();
  im->add_flag("--trust-class-numbers", imp_trust_h, "Skip recomputing h (lets verify-genus audit the file)");
  add_common(im, common, true);
  im->callback([&] {
    action = [&] {
      imp.classes = std::set<Int>(imp_classes.begin(), imp_classes.end());
      imp.verify_class_numbers = !imp_trust_h;
      imp.threads = common.threads;
      const auto ds = quadclass::data::import_csv(import_csv_path, imp);
      quadclass::data::save(ds, common.out);
      run.dataset_checksum = quadclass::to_hex(ds.checksum());
      Sink(common, run).finish();
      std::cout << "records: " << ds.size() << "\n";
      return 0;
    };
  });

  // sample
  std::string sample_in;
  std::uint64_t sample_seed = 0;
  auto* sa = app.add_subcommand("sample", "Balanced class 1 / class 3 sample, matched per 10^5 bucket of D");
  sa->add_option("--dataset", sample_in, "Dataset directory with classes 1 and 3")->required();
  sa->add_option("--seed", sample_seed, "Sampling seed")->required();
  add_common(sa, common, true);
  sa->callback([&] {
    action = [&] {
      run.seed = sample_seed;
      const auto full = open_dataset(sample_in, run);
      const auto ds = quadclass::data::balanced_sample_13(full, sample_seed);
      quadclass::data::save(ds, common.out);
      Sink(common, run).finish();
      std::cout << "records: " << ds.size() << "\n";
      return 0;
    };
  });

  // split
  std::string split_in, split_train, split_test;
  double split_fraction = 0.7;
  std::uint64_t split_seed = 0;
  auto* sp = app.add_subcommand("split", "Stratified seeded train/test split");
  sp->add_option("--dataset", split_in, "Dataset directory")->required();
  sp->add_option("--train-fraction", split_fraction, "Training fraction")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sp->add_option("--seed", split_seed, "Split seed")->required();
  sp->add_option("--train-out", split_train, "Training set directory")->required();
  sp->add_option("--test-out", split_test, "Test set directory")->required();
  sp->add_option("--threads", common.threads, "Unused; accepted for uniformity");
  sp->callback([&] {
    action = [&] {
      run.seed = split_seed;
      const auto ds = open_dataset(split_in, run);
      const auto [train, test] = quadclass::data::split(ds, split_fraction, split_seed);
      quadclass::data::save(train, split_train);
      quadclass::data::save(test, split_test);
      write_text(fs::path(split_train) / "manifest.json", manifest(run).dump() + "\n");
      std::cout << "train: " << train.size() << "\ntest: " << test.size() << "\n";
      return 0;
    };
  });

  // stats
  std::string stats_in;
  auto* st = app.add_subcommand("stats", "Counts by small-prime coefficient values, n_d, and detected ramified primes");
  st->add_option("--dataset", stats_in, "Dataset directory")->required();
  add_common(st, common, false);
  st->callback([&] {
    action = [&] {
      const auto ds = open_dataset(stats_in, run);
      const auto s = quadclass::data::summarize(ds);
      Sink sink(common, run);
      sink.emit("small_prime_values.csv", quadclass::data::small_prime_values_csv(s));
      sink.emit("ramified.csv", quadclass::data::ramified_csv(s));
      sink.emit("detected.csv", quadclass::data::detected_csv(s));
      sink.finish();
      return 0;
    };
  });

  // correlation
  std::string corr_in;
  std::size_t corr_k = 10;
  auto* co = app.add_subcommand("correlation", "Pearson correlation matrix of a_1..a_k");
  co->add_option("--dataset", corr_in, "Dataset directory")->required();
  co->add_option("--k", corr_k, "Number of leading coefficients")->capture_default_str();
  add_common(co, common, false);
  co->callback([&] {
    action = [&] {
      const auto ds = open_dataset(corr_in, run);
      const auto m = quadclass::classify::correlation_matrix(ds, corr_k);
      Sink sink(common, run);
      sink.emit("correlation.csv", m.to_csv());
      sink.finish();
      return 0;
    };
  });

  // verify-genus
  std::string vg_in;
  auto* vg = app.add_subcommand("verify-genus", "Check parity and the genus-theory lemmas on every record");
  vg->add_option("--dataset", vg_in, "Dataset directory")->required();
  add_common(vg, common, false);
  vg->callback([&] {
    action = [&] {
      const auto ds = open_dataset(vg_in, run);
      const auto report = quadclass::genus::verify_dataset(ds, common.threads);
      Sink sink(common, run);
      sink.emit("genus_report.json", report.to_json(common.pretty));
      sink.finish();
      std::cerr << "violations: " << report.violation_count() << "\n";
      return report.violation_count() == 0 ? 0 : kExitValidation;
    };
  });

  // bubble
  std::string bub_in;
  std::vector<Int> bub_classes{1, 2};
  std::string bub_indices = "1..50";
  std::string bub_mode = "exact";
  std::uint64_t bub_budget = 0;
  std::uint64_t bub_seed = 0;
  std::size_t bub_top_k = 10;
  std::optional<std::size_t> bub_frontier;
  bool bub_at_most = false;
  std::vector<std::uint32_t> bub_chart;
  auto* bu = app.add_subcommand("bubble", "Bubble separability: triple search, pure-bubble frontier, chart data");
  bu->add_option("--dataset", bub_in, "Dataset directory")->required();
  bu->add_option("--classes", bub_classes, "Class pair i,j")->delimiter(',')->expected(2)->capture_default_str();
  bu->add_option("--indices", bub_indices, "Index set, e.g. 1..50, 3,5,7 or p:1..1000")->capture_default_str();
  bu->add_option("--mode", bub_mode, "exact or sampled")->check(CLI::IsMember({"exact", "sampled"}))->capture_default_str();
  auto* budget_opt = bu->add_option("--budget", bub_budget, "Maximum triples evaluated (required for sampled)");
  auto* bub_seed_opt = bu->add_option("--seed", bub_seed, "Sampling seed (required for sampled)");
  bu->add_option("--top-k", bub_top_k, "Ranked triples to report; 0 reports all")->capture_default_str();
  auto* frontier_opt = bu->add_option("--frontier", bub_frontier, "Pure-bubble frontier with this many pure class-i bubbles");
  bu->add_flag("--at-most", bub_at_most, "Frontier constraint is 'at most' instead of 'exactly'")->needs(frontier_opt);
  auto* chart_opt = bu->add_option("--chart", bub_chart, "Value distribution chart for one triple l,m,n")->delimiter(',')->expected(3);
  add_common(bu, common, false);
  bu->callback([&] {
    action = [&] {
      using namespace quadclass::bubble;
      const auto ds = open_dataset(bub_in, run);
      if (bub_classes[0] == bub_classes[1]) throw CLI::ValidationError("--classes", "the two classes must differ");
      const bool chart = chart_opt->count() > 0;
      // In chart mode only the charted triple is read.
      const auto indices = chart ? std::vector<std::uint32_t>(bub_chart.begin(), bub_chart.end())
                                 : parse_index_set(bub_indices);
      for (auto n : indices) {
        if (n > ds.coeff_bound())
          throw CLI::ValidationError(chart ? "--chart" : "--indices", "index " + std::to_string(n) + " exceeds the coefficient bound " +
                                                      std::to_string(ds.coeff_bound()));
      }
      Sink sink(common, run);
      if (chart) {
        const auto dist = value_distribution(ds, bub_classes[0], bub_classes[1], {bub_chart[0], bub_chart[1], bub_chart[2]});
        sink.emit("chart.csv", bubble_chart_csv(dist));
      } else if (bub_frontier) {
        const auto f = pure_frontier(ds, bub_classes[0], bub_classes[1], indices, *bub_frontier,
                                     bub_at_most ? FrontierConstraint::at_most : FrontierConstraint::exactly,
                                     common.threads);
        json j;
        j["max_pure_i"] = f.max_pure_i;
        j["constraint"] = bub_at_most ? "at_most" : "exactly";
        j["feasible"] = f.feasible;
        j["best_pure_j"] = f.best_pure_j;
        auto w = json::array();
        for (const auto& s : f.witnesses) {
          w.push_back({{"triple", s.triple}, {"g_i", s.g_i}, {"g_ij", s.g_ij}, {"g_j", s.g_j},
                       {"cost", s.cost == kInfiniteCost ? json("inf") : json(s.cost)}});
        }
        j["witnesses"] = w;
        sink.emit("frontier.json", dump(j, common.pretty));
      } else {
        SearchOptions opt;
        opt.mode = bub_mode == "exact" ? SearchMode::exact : SearchMode::sampled;
        if (opt.mode == SearchMode::sampled) {
          if (budget_opt->count() == 0) throw CLI::RequiredError("--budget (sampled mode)");
          if (bub_seed_opt->count() == 0) throw CLI::RequiredError("--seed (sampled mode)");
          run.seed = bub_seed;
        }
        if (budget_opt->count() > 0) opt.budget = bub_budget;
        opt.seed = bub_seed;
        opt.top_k = bub_top_k;
        opt.threads = common.threads;
        const auto result = search(ds, bub_classes[0], bub_classes[1], indices, opt);
        sink.emit("search.jsonl", search_jsonl(result));
        if (result.heuristic)
          std::cerr << "note: " << result.evaluated << " of " << result.total_triples
                    << " triples evaluated; ranking is heuristic\n";
      }
      sink.finish();
      return 0;
    };
  });

  // classify
  std::string cl_in;
  std::string cl_formula;
  bool cl_gbdt = false;
  std::string cl_features = "a_p";
  double cl_fraction = 0.7;
  std::uint64_t cl_seed = 0;
  std::size_t cl_importance = 0;
  quadclass::classify::GbdtConfig cl_cfg;
  auto* cl = app.add_subcommand("classify", "Threshold formulas or a boosted-tree baseline with full metrics");
  cl->add_option("--dataset", cl_in, "Dataset directory")->required();
  auto* formula_opt = cl->add_option("--formula", cl_formula, "f12, f13a or f13b")->check(CLI::IsMember({"f12", "f13a", "f13b"}));
  auto* gbdt_opt = cl->add_flag("--gbdt", cl_gbdt, "Train boosted trees instead of a formula");
  formula_opt->excludes(gbdt_opt);
  cl->add_option("--features", cl_features, "Feature tokens: a_p, a_p:K, a<n>, n_d, p_i, D, R, S_zeta, S_chi")->capture_default_str();
  cl->add_option("--train-fraction", cl_fraction, "Training fraction")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  auto* cl_seed_opt = cl->add_option("--seed", cl_seed, "Split and training seed (required with --gbdt)");
  cl->add_option("--trees", cl_cfg.trees, "Boosting rounds")->capture_default_str();
  cl->add_option("--depth", cl_cfg.depth, "Tree depth")->capture_default_str();
  cl->add_option("--rate", cl_cfg.learning_rate, "Learning rate")->capture_default_str();
  cl->add_option("--importance-repeats", cl_importance, "Permutation importance repeats (0 skips)")->capture_default_str();
  add_common(cl, common, false);
  cl->callback([&] {
    action = [&] {
      using namespace quadclass::classify;
      const auto all = open_dataset(cl_in, run);
      Sink sink(common, run);
      if (!cl_gbdt) {
        if (cl_formula.empty()) throw CLI::RequiredError("--formula or --gbdt");
        const auto pred = predictor(formula_from_string(cl_formula));
        const auto ds = all.filter_classes({pred.class_low, pred.class_high});
        if (ds.size() < all.size())
          std::cerr << "note: " << all.size() - ds.size() << " records outside classes {" << pred.class_low << ", "
                    << pred.class_high << "} skipped\n";
        const auto full = evaluate(pred, ds);
        json j;
        j["formula"] = cl_formula;
        j["threshold"] = pred.threshold;
        j["full"] = json::parse(full.to_json());
        if (cl_seed_opt->count() > 0) {
          run.seed = cl_seed;
          const auto [train, test] = quadclass::data::split(ds, cl_fraction, cl_seed);
          j["train"] = json::parse(evaluate(pred, train).to_json());
          j["test"] = json::parse(evaluate(pred, test).to_json());
        }
        sink.emit("metrics.json", dump(j, common.pretty));
        sink.emit("calibration.csv", full.calibration_csv());
        sink.emit("confusion.csv", full.confusion_csv());
      } else {
        if (cl_seed_opt->count() == 0) throw CLI::RequiredError("--seed (with --gbdt)");
        run.seed = cl_seed;
        const auto& ds = all;
        const auto classes = ds.label_classes();
        if (classes.size() != 2) throw quadclass::ValidationError("--gbdt needs a dataset with exactly two classes");
        const Int low = *classes.begin();
        const Int high = *classes.rbegin();
        const auto [train, test] = quadclass::data::split(ds, cl_fraction, cl_seed);
        cl_cfg.seed = cl_seed;
        const auto tokens = parse_feature_tokens(cl_features);
        const auto result = train_and_evaluate(train, test, tokens, low, high, cl_cfg);
        json j;
        j["features"] = result.model.feature_names;
        j["train"] = json::parse(result.train.to_json());
        j["test"] = json::parse(result.test.to_json());
        sink.emit("metrics.json", dump(j, common.pretty));
        sink.emit("calibration.csv", result.test.calibration_csv());
        sink.emit("confusion.csv", result.test.confusion_csv());
        if (!common.out.empty()) sink.emit("model.json", result.model.to_json());
        if (cl_importance > 0) {
          const auto x_test = build_features(test, tokens);
          const auto ranked = permutation_importance(result.model, x_test, binary_labels(test, low, high), cl_seed,
                                                     cl_importance, common.threads);
          sink.emit("importance.csv", importance_csv(ranked));
        }
      }
      sink.finish();
      return 0;
    };
  });

  // ablation
  std::string ab_in;
  double ab_fraction = 0.7;
  std::uint64_t ab_seed = 0;
  quadclass::classify::GbdtConfig ab_cfg;
  auto* ab = app.add_subcommand("ablation", "Boosted-tree accuracy for the fourteen 1-vs-3 feature combinations");
  ab->add_option("--dataset", ab_in, "Balanced two-class dataset directory")->required();
  ab->add_option("--train-fraction", ab_fraction, "Training fraction")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  ab->add_option("--seed", ab_seed, "Split and training seed")->required();
  ab->add_option("--trees", ab_cfg.trees, "Boosting rounds")->capture_default_str();
  ab->add_option("--depth", ab_cfg.depth, "Tree depth")->capture_default_str();
  ab->add_option("--rate", ab_cfg.learning_rate, "Learning rate")->capture_default_str();
  add_common(ab, common, false);
  ab->callback([&] {
    action = [&] {
      using namespace quadclass::classify;
      run.seed = ab_seed;
      const auto ds = open_dataset(ab_in, run);
      ab_cfg.seed = ab_seed;
      const auto rows = ablation_table(ds, standard_ablation_rows(), ab_fraction, ab_seed, ab_cfg, common.threads);
      Sink sink(common, run);
      sink.emit("ablation.csv", ablation_csv(rows));
      sink.finish();
      return 0;
    };
  });

  // pca
  std::string pca_in;
  std::string pca_indices;
  std::size_t pca_k = 3;
  auto* pc = app.add_subcommand("pca", "Covariance PCA of coefficient vectors and projection export");
  pc->add_option("--dataset", pca_in, "Dataset directory")->required();
  pc->add_option("--indices", pca_indices, "Coefficient indices (default: all), e.g. 1..1000 or p:1..1000");
  pc->add_option("--k", pca_k, "Number of components")->capture_default_str();
  add_common(pc, common, false);
  pc->callback([&] {
    action = [&] {
      const auto ds = open_dataset(pca_in, run);
      const auto indices = quadclass::bubble::parse_index_set(
          pca_indices.empty() ? "1.." + std::to_string(ds.coeff_bound()) : pca_indices);
      const auto x = quadclass::pca::coefficient_matrix(ds, indices);
      const auto model = quadclass::pca::pca_fit(x, pca_k, common.threads);
      Sink sink(common, run);
      sink.emit("projection.csv", quadclass::pca::projection_csv(ds, quadclass::pca::pca_project(model, x)));
      sink.emit("model.json", model.to_json());
      sink.finish();
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  run.sub = app.get_subcommands().front();
  try {
    return action();
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const quadclass::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
