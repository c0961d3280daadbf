#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "rmlab/corpus.hpp"

namespace rmlab {

// Fraction of win pairs scored strictly higher for the winner. An exact
// score tie counts as a failure: a clustered model must not get credit for
// the very degeneracy this metric exists to expose.
double pairwise_accuracy(const std::unordered_map<std::string, double>& rewards,
                         const std::vector<PreferencePair>& pairs);

// mean(r | Pass) - mean(r | Fail) over the labeled samples.
double reward_margin(const std::unordered_map<std::string, double>& rewards,
                     const std::unordered_map<std::string, Verdict>& labels);

// A_i = (r_i - mean) / population std; a group whose std falls below
// epsilon is degenerate and maps to all zeros.
std::vector<double> group_advantage(const std::vector<double>& rewards, double epsilon = 1e-8);

struct ClusterStats {
  double distinct_ratio = 0.0;  // unique quantized scores / n
  double mode_mass = 0.0;       // fraction at the most common quantized score
  double entropy = 0.0;         // natural-log entropy of the quantized histogram
};

ClusterStats clustering_stats(const std::vector<double>& scores, double quantum = 1e-6);

// Fixed-bin histogram; values outside the range land in the edge bins.
struct Histogram {
  double lo = 0.0;
  double width = 0.0;
  std::vector<long> counts;

  std::string to_csv() const;  // "bin_left,count" rows
};

Histogram make_histogram(const std::vector<double>& values, double lo, double hi, int bins);

struct AdvantageReport {
  std::vector<std::vector<double>> advantages;  // one vector per group
  double mean_abs_top = 0.0;  // mean |A| of each group's highest-reward sample
  Histogram histogram;        // all advantage values pooled
};

AdvantageReport advantage_report(const std::vector<std::vector<double>>& group_rewards,
                                 double epsilon = 1e-8);

// Agreement coefficient plus the conventional interpretation band. A
// degenerate input (no variation at all) fixes the value by convention
// instead of dividing zero by zero.
struct IaaResult {
  double value = 0.0;
  bool degenerate = false;
  std::string band;
};

std::string iaa_band(double value);  // 0.2 / 0.4 / 0.6 / 0.8 thresholds

// counts: items x categories rating-count matrix; every item must carry the
// same number of ratings (>= 2).
IaaResult fleiss_kappa(const std::vector<std::vector<int>>& counts);

// ratings: annotator x item matrix, -1 for missing; nominal disagreement,
// missing entries excluded pairwise.
IaaResult krippendorff_alpha(const std::vector<std::vector<int>>& ratings);

// Mean over items of the fraction of agreeing rater pairs.
double raw_agreement(const std::vector<std::vector<int>>& ratings);

// Adapters from annotation records to the matrix forms above. Items and
// annotators are ordered by id, so the matrices are deterministic.
std::vector<std::vector<int>> verdict_counts(const std::vector<AnnotationRecord>& annotations);
std::vector<std::vector<int>> rating_matrix(const std::vector<AnnotationRecord>& annotations);

struct EvalReport {
  double accuracy_id = 0.0;
  double accuracy_ood = 0.0;
  double margin_id = 0.0;
  double margin_ood = 0.0;
  ClusterStats clustering;         // over the id-eval scores
  double positive_score_variance = 0.0;  // population variance over Pass samples

  static std::string csv_header();
  std::string csv_row() const;
  std::string to_json() const;
};

}  // namespace rmlab
