#include "quadclass/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "quadclass/parallel.hpp"
#include "quadclass/random.hpp"

namespace quadclass::classify {

double Tree::predict(const double* row) const {
  int i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = row[n.feature] < n.threshold ? n.left : n.right;
  }
  return nodes[i].value;
}

double Tree::predict(const double* row, std::size_t swap_feature, double swap_value) const {
  int i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    const auto f = static_cast<std::size_t>(n.feature);
    const double x = f == swap_feature ? swap_value : row[f];
    i = x < n.threshold ? n.left : n.right;
  }
  return nodes[i].value;
}

bool Tree::uses(std::size_t feature) const {
  return std::any_of(nodes.begin(), nodes.end(),
                     [&](const TreeNode& n) { return n.feature == static_cast<int>(feature); });
}

double BoostedTreesModel::margin(const double* row) const {
  double m = base_margin;
  for (const auto& t : trees) m += t.predict(row);
  return m;
}

namespace {

double sigmoid(double m) { return 1.0 / (1.0 + std::exp(-m)); }

double logistic_loss(std::span<const double> margins, std::span<const std::uint8_t> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    // log(1 + exp(-s m)) with s = +-1, computed stably
    const double z = labels[i] ? margins[i] : -margins[i];
    total += z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
  }
  return margins.empty() ? 0.0 : total / static_cast<double>(margins.size());
}

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

}  // namespace

double BoostedTreesModel::probability(const double* row) const { return sigmoid(margin(row)); }

std::vector<double> BoostedTreesModel::probabilities(const FeatureMatrix& x) const {
  if (x.cols() != feature_names.size())
    throw std::invalid_argument("BoostedTreesModel: feature count " + std::to_string(x.cols()) +
                                " does not match the model's " + std::to_string(feature_names.size()));
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = probability(x.row(r));
  return out;
}

std::string BoostedTreesModel::to_json() const {
  nlohmann::ordered_json j;
  j["base_margin"] = base_margin;
  j["learning_rate"] = config.learning_rate;
  j["depth"] = config.depth;
  j["lambda"] = config.lambda;
  j["seed"] = config.seed;
  j["feature_names"] = feature_names;
  auto forest = nlohmann::ordered_json::array();
  for (const auto& t : trees) {
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& n : t.nodes) {
      if (n.feature < 0) {
        nodes.push_back({{"leaf", n.value}});
      } else {
        nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
      }
    }
    forest.push_back(nodes);
  }
  j["trees"] = forest;
  return j.dump() + "\n";
}

BoostedTreesModel gbdt_train(const FeatureMatrix& x, std::span<const std::uint8_t> labels, const GbdtConfig& config) {
  const std::size_t n = x.rows();
  const std::size_t F = x.cols();
  if (labels.size() != n) throw std::invalid_argument("gbdt_train: label count differs from row count");
  if (config.depth < 1) throw std::invalid_argument("gbdt_train: depth must be >= 1");
  if (!(config.subsample > 0.0 && config.subsample <= 1.0))
    throw std::invalid_argument("gbdt_train: subsample must be in (0, 1]");
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  if (n_pos == 0 || n_pos == n) throw std::invalid_argument("gbdt_train: training labels contain a single class");

  // Distinct sorted values per feature and each row's rank among them.
  std::vector<std::vector<double>> values(F);
  std::vector<std::uint32_t> rank(F * n);
  for (std::size_t f = 0; f < F; ++f) {
    auto& v = values[f];
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = x.at(i, f);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    for (std::size_t i = 0; i < n; ++i)
      rank[f * n + i] = static_cast<std::uint32_t>(std::lower_bound(v.begin(), v.end(), x.at(i, f)) - v.begin());
  }

  BoostedTreesModel model;
  model.config = config;
  model.feature_names = x.names();
  model.base_margin = std::log(static_cast<double>(n_pos) / static_cast<double>(n - n_pos));
  std::vector<double> margin(n, model.base_margin);
  model.train_loss.push_back(logistic_loss(margin, labels));

  Rng rng(config.seed);
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  std::vector<int> slot(n);
  std::vector<double> G;
  std::vector<double> H;
  std::vector<std::uint32_t> C;
  const double lambda = config.lambda;
  auto score = [lambda](double g, double h) { return g * g / (h + lambda); };

  for (std::size_t t = 0; t < config.trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = p - (labels[i] ? 1.0 : 0.0);
      hess[i] = std::max(p * (1.0 - p), 1e-16);
      slot[i] = (config.subsample >= 1.0 || rng.uniform() < config.subsample) ? 0 : -1;
    }

    Tree tree;
    tree.nodes.emplace_back();
    std::vector<int> level{0};  // tree node of each slot
    for (int depth = 0; !level.empty(); ++depth) {
      const std::size_t A = level.size();
      std::vector<double> total_g(A, 0.0);
      std::vector<double> total_h(A, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (slot[i] < 0) continue;
        total_g[slot[i]] += grad[i];
        total_h[slot[i]] += hess[i];
      }

      std::vector<SplitCandidate> best(A);
      if (depth < config.depth) {
        for (std::size_t f = 0; f < F; ++f) {
          const std::size_t nd = values[f].size();
          if (nd < 2) continue;
          G.assign(A * nd, 0.0);
          H.assign(A * nd, 0.0);
          C.assign(A * nd, 0);
          const std::uint32_t* rk = rank.data() + f * n;
          for (std::size_t i = 0; i < n; ++i) {
            const int s = slot[i];
            if (s < 0) continue;
            const std::size_t idx = static_cast<std::size_t>(s) * nd + rk[i];
            G[idx] += grad[i];
            H[idx] += hess[i];
            ++C[idx];
          }
          for (std::size_t s = 0; s < A; ++s) {
            const double parent = score(total_g[s], total_h[s]);
            double gl = 0.0;
            double hl = 0.0;
            std::ptrdiff_t prev = -1;
            for (std::size_t k = 0; k < nd; ++k) {
              const std::size_t idx = s * nd + k;
              if (C[idx] == 0) continue;
              if (prev >= 0) {
                const double gr = total_g[s] - gl;
                const double hr = total_h[s] - hl;
                if (hl >= config.min_child_weight && hr >= config.min_child_weight) {
                  const double gain = score(gl, hl) + score(gr, hr) - parent;
                  if (gain > best[s].gain) {
                    best[s].gain = gain;
                    best[s].feature = static_cast<int>(f);
                    best[s].threshold = 0.5 * (values[f][static_cast<std::size_t>(prev)] + values[f][k]);
                  }
                }
              }
              gl += G[idx];
              hl += H[idx];
              prev = static_cast<std::ptrdiff_t>(k);
            }
          }
        }
      }

      std::vector<int> next_level;
      std::vector<int> left_slot(A, -1);
      for (std::size_t s = 0; s < A; ++s) {
        const int node = level[s];
        if (best[s].feature < 0 || best[s].gain <= 1e-12) {
          tree.nodes[node].value = -config.learning_rate * total_g[s] / (total_h[s] + lambda);
          continue;
        }
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        tree.nodes[node].feature = best[s].feature;
        tree.nodes[node].threshold = best[s].threshold;
        tree.nodes[node].left = left;
        tree.nodes[node].right = left + 1;
        left_slot[s] = static_cast<int>(next_level.size());
        next_level.push_back(left);
        next_level.push_back(left + 1);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const int s = slot[i];
        if (s < 0) continue;
        if (left_slot[s] < 0) {
          slot[i] = -1;
          continue;
        }
        const auto& node = tree.nodes[level[s]];
        slot[i] = left_slot[s] + (x.at(i, static_cast<std::size_t>(node.feature)) < node.threshold ? 0 : 1);
      }
      level = std::move(next_level);
    }

    for (std::size_t i = 0; i < n; ++i) margin[i] += tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));
    model.train_loss.push_back(logistic_loss(margin, labels));
  }
  return model;
}

std::vector<FeatureImportance> permutation_importance(const BoostedTreesModel& model, const FeatureMatrix& x,
                                                      std::span<const std::uint8_t> labels, std::uint64_t seed,
                                                      std::size_t repeats, unsigned threads) {
  if (repeats == 0) throw std::invalid_argument("permutation_importance: repeats must be >= 1");
  if (x.cols() != model.feature_names.size())
    throw std::invalid_argument("permutation_importance: feature count does not match the model");
  if (labels.size() != x.rows()) throw std::invalid_argument("permutation_importance: label count differs");
  const std::size_t n = x.rows();
  const std::size_t F = x.cols();

  std::vector<double> base(n);
  std::size_t base_correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    base[i] = model.margin(x.row(i));
    base_correct += (base[i] >= 0.0) == static_cast<bool>(labels[i]);
  }
  const double base_acc = n ? static_cast<double>(base_correct) / static_cast<double>(n) : 0.0;

  std::vector<FeatureImportance> out(F);
  parallel_for(F, resolve_threads(threads), [&](std::size_t f) {
    auto& fi = out[f];
    fi.name = model.feature_names[f];
    fi.feature = f;
    std::vector<const Tree*> using_f;
    for (const auto& t : model.trees) {
      if (t.uses(f)) using_f.push_back(&t);
    }
    if (using_f.empty() || n == 0) return;
    Rng rng = Rng::stream(seed, f);
    std::vector<std::size_t> perm(n);
    std::vector<double> drops;
    for (std::size_t r = 0; r < repeats; ++r) {
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.row(i);
        const double v = x.at(perm[i], f);
        double m = base[i];
        for (const Tree* t : using_f) m += t->predict(row, f, v) - t->predict(row);
        correct += (m >= 0.0) == static_cast<bool>(labels[i]);
      }
      drops.push_back(base_acc - static_cast<double>(correct) / static_cast<double>(n));
    }
    const double mean = std::accumulate(drops.begin(), drops.end(), 0.0) / static_cast<double>(repeats);
    double var = 0.0;
    for (double d : drops) var += (d - mean) * (d - mean);
    fi.mean_drop = mean;
    fi.stddev = std::sqrt(var / static_cast<double>(repeats));
  });
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.mean_drop > b.mean_drop; });
  return out;
}

std::string importance_csv(const std::vector<FeatureImportance>& ranked) {
  std::string out = "rank,feature,mean_drop,stddev\n";
  char buf[64];
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    out += std::to_string(k + 1) + "," + ranked[k].name + ",";
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", ranked[k].mean_drop, ranked[k].stddev);
    out += buf;
  }
  return out;
}

}  // namespace quadclass::classify
