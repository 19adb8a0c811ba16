#include "quadclass/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace quadclass::classify {

namespace {

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

std::vector<std::size_t> order_by_score(std::span<const double> score) {
  std::vector<std::size_t> order(score.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return score[a] < score[b]; });
  return order;
}

}  // namespace

double roc_auc(std::span<const std::uint8_t> positive, std::span<const double> score) {
  const auto order = order_by_score(score);
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && score[order[j]] == score[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = order.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return 0.5;
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1) / 2.0) / (np * static_cast<double>(n_neg));
}

double ks_statistic(std::span<const std::uint8_t> positive, std::span<const double> score) {
  const auto order = order_by_score(score);
  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), std::uint8_t{1}));
  const std::size_t n_neg = positive.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return 0.0;
  double best = 0.0;
  std::size_t seen_pos = 0;
  std::size_t seen_neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && score[order[j]] == score[order[i]]) {
      (positive[order[j]] ? seen_pos : seen_neg)++;
      ++j;
    }
    const double gap = std::abs(static_cast<double>(seen_pos) / static_cast<double>(n_pos) -
                                static_cast<double>(seen_neg) / static_cast<double>(n_neg));
    best = std::max(best, gap);
    i = j;
  }
  return best;
}

MetricsReport compute_metrics(std::span<const std::uint8_t> positive, std::span<const std::uint8_t> predicted,
                              std::span<const double> prob, Int class_low, Int class_high) {
  if (positive.size() != predicted.size() || positive.size() != prob.size())
    throw std::invalid_argument("compute_metrics: input lengths differ");
  MetricsReport m;
  m.class_low = class_low;
  m.class_high = class_high;
  auto& c = m.confusion;
  double loss = 0.0;
  constexpr double kEps = 1e-15;
  m.calibration.resize(10);
  for (std::size_t b = 0; b < 10; ++b) {
    m.calibration[b].lower = static_cast<double>(b) / 10.0;
    m.calibration[b].upper = static_cast<double>(b + 1) / 10.0;
  }
  for (std::size_t i = 0; i < positive.size(); ++i) {
    const bool y = positive[i];
    const bool yhat = predicted[i];
    if (y && yhat) ++c.tp;
    if (!y && yhat) ++c.fp;
    if (!y && !yhat) ++c.tn;
    if (y && !yhat) ++c.fn;
    const double p = std::clamp(prob[i], kEps, 1.0 - kEps);
    loss -= y ? std::log(p) : std::log(1.0 - p);
    const auto bin = std::min<std::size_t>(9, static_cast<std::size_t>(std::clamp(prob[i], 0.0, 1.0) * 10.0));
    auto& cb = m.calibration[bin];
    ++cb.count;
    cb.mean_predicted += prob[i];
    cb.observed += y ? 1.0 : 0.0;
  }
  for (auto& cb : m.calibration) {
    if (cb.count == 0) continue;
    cb.mean_predicted /= static_cast<double>(cb.count);
    cb.observed /= static_cast<double>(cb.count);
  }

  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto tn = static_cast<double>(c.tn);
  const auto fn = static_cast<double>(c.fn);
  const double total = tp + fp + tn + fn;
  m.accuracy = ratio(tp + tn, total);
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.f1 = ratio(2 * m.precision * m.recall, m.precision + m.recall);
  const double mcc_den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  m.mcc = mcc_den > 0 ? (tp * tn - fp * fn) / mcc_den : 0.0;
  m.log_loss = total > 0 ? loss / total : 0.0;
  m.auc = roc_auc(positive, prob);
  m.ks = ks_statistic(positive, prob);
  return m;
}

std::string MetricsReport::to_json(bool pretty) const {
  nlohmann::ordered_json j;
  j["positive_class"] = class_low;
  j["negative_class"] = class_high;
  j["total"] = confusion.total();
  j["confusion"] = {{"tp", confusion.tp}, {"fp", confusion.fp}, {"tn", confusion.tn}, {"fn", confusion.fn}};
  j["accuracy"] = accuracy;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  j["mcc"] = mcc;
  j["auc"] = auc;
  j["log_loss"] = log_loss;
  j["ks"] = ks;
  auto bins = nlohmann::ordered_json::array();
  for (const auto& b : calibration)
    bins.push_back({{"lower", b.lower},
                    {"upper", b.upper},
                    {"count", b.count},
                    {"mean_predicted", b.mean_predicted},
                    {"observed", b.observed}});
  j["calibration"] = bins;
  j["misclassified"] = misclassified;
  return j.dump(pretty ? 2 : -1) + "\n";
}

std::string MetricsReport::calibration_csv() const {
  std::string out = "bin,lower,upper,count,mean_predicted,observed\n";
  char buf[160];
  for (std::size_t b = 0; b < calibration.size(); ++b) {
    const auto& c = calibration[b];
    std::snprintf(buf, sizeof buf, "%zu,%.1f,%.1f,%zu,%.17g,%.17g\n", b, c.lower, c.upper, c.count,
                  c.mean_predicted, c.observed);
    out += buf;
  }
  return out;
}

std::string MetricsReport::confusion_csv() const {
  const auto lo = std::to_string(class_low);
  const auto hi = std::to_string(class_high);
  return "actual,predicted,count\n" + lo + "," + lo + "," + std::to_string(confusion.tp) + "\n" + lo + "," + hi +
         "," + std::to_string(confusion.fn) + "\n" + hi + "," + lo + "," + std::to_string(confusion.fp) + "\n" + hi +
         "," + hi + "," + std::to_string(confusion.tn) + "\n";
}

}  // namespace quadclass::classify
