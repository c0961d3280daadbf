#include "rmlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rmlab/error.hpp"

namespace rmlab {

double pairwise_accuracy(const std::unordered_map<std::string, double>& rewards,
                         const std::vector<PreferencePair>& pairs) {
  if (pairs.empty()) throw DataError("pairwise_accuracy over an empty pair set");
  auto reward = [&rewards](const std::string& id) {
    auto it = rewards.find(id);
    if (it == rewards.end()) throw DataError("no reward for sample " + id);
    return it->second;
  };
  long correct = 0;
  for (const auto& pair : pairs) {
    if (pair.relation != PairRelation::Win)
      throw DataError("pairwise_accuracy expects win pairs only");
    if (reward(pair.id_i) > reward(pair.id_j)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double reward_margin(const std::unordered_map<std::string, double>& rewards,
                     const std::unordered_map<std::string, Verdict>& labels) {
  double pass_sum = 0.0, fail_sum = 0.0;
  long pass_n = 0, fail_n = 0;
  // Iterate rewards in a sorted order purely for deterministic summation.
  std::map<std::string, double> ordered(rewards.begin(), rewards.end());
  for (const auto& entry : ordered) {
    auto label = labels.find(entry.first);
    if (label == labels.end()) throw DataError("no label for sample " + entry.first);
    if (label->second == Verdict::Pass) {
      pass_sum += entry.second;
      ++pass_n;
    } else {
      fail_sum += entry.second;
      ++fail_n;
    }
  }
  if (pass_n == 0 || fail_n == 0)
    throw DataError("reward_margin needs both a Pass and a Fail class");
  return pass_sum / static_cast<double>(pass_n) - fail_sum / static_cast<double>(fail_n);
}

std::vector<double> group_advantage(const std::vector<double>& rewards, double epsilon) {
  if (rewards.size() < 2) throw DataError("group_advantage needs a group of >= 2");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;  // population variance
  const double sd = std::sqrt(var);
  std::vector<double> out(rewards.size(), 0.0);
  if (sd < epsilon) return out;  // degenerate group
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

ClusterStats clustering_stats(const std::vector<double>& scores, double quantum) {
  if (scores.empty()) throw DataError("clustering_stats over an empty score set");
  std::map<long long, long> histogram;
  for (double s : scores) ++histogram[static_cast<long long>(std::llround(s / quantum))];
  const double n = static_cast<double>(scores.size());
  ClusterStats stats;
  stats.distinct_ratio = static_cast<double>(histogram.size()) / n;
  long mode = 0;
  double entropy = 0.0;
  for (const auto& bin : histogram) {
    mode = std::max(mode, bin.second);
    const double p = static_cast<double>(bin.second) / n;
    entropy -= p * std::log(p);
  }
  stats.mode_mass = static_cast<double>(mode) / n;
  stats.entropy = entropy;
  return stats;
}

Histogram make_histogram(const std::vector<double>& values, double lo, double hi, int bins) {
  if (bins < 1 || hi <= lo) throw ConfigError("histogram needs bins >= 1 and hi > lo");
  Histogram h;
  h.lo = lo;
  h.width = (hi - lo) / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    int bin = static_cast<int>(std::floor((v - lo) / h.width));
    bin = std::max(0, std::min(bins - 1, bin));
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  return h;
}

std::string Histogram::to_csv() const {
  std::ostringstream out;
  out << "bin_left,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i)
    out << (lo + width * static_cast<double>(i)) << "," << counts[i] << "\n";
  return out.str();
}

AdvantageReport advantage_report(const std::vector<std::vector<double>>& group_rewards,
                                 double epsilon) {
  AdvantageReport report;
  std::vector<double> pooled;
  double top_sum = 0.0;
  long groups = 0;
  for (const auto& rewards : group_rewards) {
    std::vector<double> a = group_advantage(rewards, epsilon);
    const std::size_t top = static_cast<std::size_t>(
        std::max_element(rewards.begin(), rewards.end()) - rewards.begin());
    top_sum += std::fabs(a[top]);
    ++groups;
    pooled.insert(pooled.end(), a.begin(), a.end());
    report.advantages.push_back(std::move(a));
  }
  if (groups == 0) throw DataError("advantage_report over zero groups");
  report.mean_abs_top = top_sum / static_cast<double>(groups);
  report.histogram = make_histogram(pooled, -4.0, 4.0, 32);
  return report;
}

std::string iaa_band(double value) {
  if (value < 0.0) return "poor";
  if (value < 0.2) return "slight";
  if (value < 0.4) return "fair";
  if (value < 0.6) return "moderate";
  if (value < 0.8) return "substantial";
  return "almost_perfect";
}

IaaResult fleiss_kappa(const std::vector<std::vector<int>>& counts) {
  if (counts.empty()) throw DataError("fleiss_kappa over zero items");
  const std::size_t categories = counts[0].size();
  if (categories < 2) throw DataError("fleiss_kappa needs >= 2 categories");
  long raters = 0;
  for (int c : counts[0]) raters += c;
  if (raters < 2) throw DataError("fleiss_kappa needs >= 2 ratings per item");

  const double n = static_cast<double>(raters);
  const double items = static_cast<double>(counts.size());
  std::vector<double> category_mass(categories, 0.0);
  double mean_item_agreement = 0.0;
  for (const auto& row : counts) {
    if (row.size() != categories) throw DataError("ragged category counts");
    long total = 0;
    double agree = 0.0;
    for (std::size_t j = 0; j < categories; ++j) {
      if (row[j] < 0) throw DataError("negative rating count");
      total += row[j];
      agree += static_cast<double>(row[j]) * (static_cast<double>(row[j]) - 1.0);
      category_mass[j] += static_cast<double>(row[j]);
    }
    if (total != raters) throw DataError("fleiss_kappa needs an equal rater count per item");
    mean_item_agreement += agree / (n * (n - 1.0));
  }
  mean_item_agreement /= items;

  double expected = 0.0;
  for (double mass : category_mass) {
    const double p = mass / (items * n);
    expected += p * p;
  }

  IaaResult result;
  if (expected >= 1.0) {  // every rating in a single category
    result.value = 1.0;
    result.degenerate = true;
  } else {
    result.value = (mean_item_agreement - expected) / (1.0 - expected);
  }
  result.band = iaa_band(result.value);
  return result;
}

IaaResult krippendorff_alpha(const std::vector<std::vector<int>>& ratings) {
  if (ratings.empty()) throw DataError("krippendorff_alpha over zero annotators");
  const std::size_t items = ratings[0].size();
  for (const auto& row : ratings)
    if (row.size() != items) throw DataError("ragged rating matrix");

  // Coincidence matrix over the observed category values.
  std::set<int> categories;
  for (const auto& row : ratings)
    for (int v : row)
      if (v >= 0) categories.insert(v);
  std::map<int, std::map<int, double>> coincidence;

  for (std::size_t u = 0; u < items; ++u) {
    std::vector<int> values;
    for (const auto& row : ratings)
      if (row[u] >= 0) values.push_back(row[u]);
    const double m = static_cast<double>(values.size());
    if (values.size() < 2) continue;  // unpairable item
    for (std::size_t a = 0; a < values.size(); ++a)
      for (std::size_t b = 0; b < values.size(); ++b)
        if (a != b) coincidence[values[a]][values[b]] += 1.0 / (m - 1.0);
  }

  double n = 0.0, observed_disagreement = 0.0;
  std::map<int, double> marginal;
  for (const auto& row : coincidence)
    for (const auto& cell : row.second) {
      n += cell.second;
      marginal[row.first] += cell.second;
      if (row.first != cell.first) observed_disagreement += cell.second;
    }
  if (n < 2.0) throw DataError("krippendorff_alpha needs >= 2 paired ratings");

  double expected_disagreement = 0.0;
  for (const auto& a : marginal)
    for (const auto& b : marginal)
      if (a.first != b.first) expected_disagreement += a.second * b.second;
  expected_disagreement /= n * (n - 1.0);
  observed_disagreement /= n;

  IaaResult result;
  if (expected_disagreement == 0.0) {  // a single category everywhere
    result.value = 1.0;
    result.degenerate = true;
  } else {
    result.value = 1.0 - observed_disagreement / expected_disagreement;
  }
  result.band = iaa_band(result.value);
  return result;
}

double raw_agreement(const std::vector<std::vector<int>>& ratings) {
  if (ratings.size() < 2) throw DataError("raw_agreement needs >= 2 raters");
  const std::size_t items = ratings[0].size();
  for (const auto& row : ratings)
    if (row.size() != items) throw DataError("ragged rating matrix");

  double total = 0.0;
  long counted = 0;
  for (std::size_t u = 0; u < items; ++u) {
    std::vector<int> values;
    for (const auto& row : ratings)
      if (row[u] >= 0) values.push_back(row[u]);
    if (values.size() < 2) continue;
    long agree = 0, pairs = 0;
    for (std::size_t a = 0; a < values.size(); ++a)
      for (std::size_t b = a + 1; b < values.size(); ++b) {
        ++pairs;
        if (values[a] == values[b]) ++agree;
      }
    total += static_cast<double>(agree) / static_cast<double>(pairs);
    ++counted;
  }
  if (counted == 0) throw DataError("raw_agreement found no pairable items");
  return total / static_cast<double>(counted);
}

namespace {

// Deterministic item/annotator orderings for the matrix adapters.
template <typename Key>
std::unordered_map<Key, std::size_t> index_sorted(std::set<Key> keys_sorted) {
  std::unordered_map<Key, std::size_t> index;
  std::size_t i = 0;
  for (const auto& k : keys_sorted) index[k] = i++;
  return index;
}

}  // namespace

std::vector<std::vector<int>> verdict_counts(const std::vector<AnnotationRecord>& annotations) {
  std::set<std::string> item_ids;
  for (const auto& a : annotations) item_ids.insert(a.sample_id);
  auto item_index = index_sorted(item_ids);
  std::vector<std::vector<int>> counts(item_ids.size(), std::vector<int>(2, 0));
  for (const auto& a : annotations)
    ++counts[item_index[a.sample_id]][a.verdict == Verdict::Pass ? 1 : 0];
  return counts;
}

std::vector<std::vector<int>> rating_matrix(const std::vector<AnnotationRecord>& annotations) {
  std::set<std::string> item_ids, rater_ids;
  for (const auto& a : annotations) {
    item_ids.insert(a.sample_id);
    rater_ids.insert(a.annotator_id);
  }
  auto item_index = index_sorted(item_ids);
  auto rater_index = index_sorted(rater_ids);
  std::vector<std::vector<int>> matrix(rater_ids.size(),
                                       std::vector<int>(item_ids.size(), -1));
  for (const auto& a : annotations)
    matrix[rater_index[a.annotator_id]][item_index[a.sample_id]] =
        a.verdict == Verdict::Pass ? 1 : 0;
  return matrix;
}

std::string EvalReport::csv_header() {
  return "accuracy_id,accuracy_ood,margin_id,margin_ood,distinct_ratio,mode_mass,entropy,"
         "positive_score_variance";
}

std::string EvalReport::csv_row() const {
  std::ostringstream out;
  out.precision(10);
  out << accuracy_id << "," << accuracy_ood << "," << margin_id << "," << margin_ood << ","
      << clustering.distinct_ratio << "," << clustering.mode_mass << "," << clustering.entropy
      << "," << positive_score_variance;
  return out.str();
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["accuracy_id"] = accuracy_id;
  j["accuracy_ood"] = accuracy_ood;
  j["margin_id"] = margin_id;
  j["margin_ood"] = margin_ood;
  j["clustering"] = {{"distinct_ratio", clustering.distinct_ratio},
                     {"mode_mass", clustering.mode_mass},
                     {"entropy", clustering.entropy}};
  j["positive_score_variance"] = positive_score_variance;
  return j.dump();
}

}  // namespace rmlab
