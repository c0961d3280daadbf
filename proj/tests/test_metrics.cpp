// Evaluation statistics: hand-computed oracle values, invariance properties,
// and independent brute-force implementations of both agreement
// coefficients compared on random matrices.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "rmlab/metrics.hpp"
#include "rmlab/rng.hpp"

using namespace rmlab;

namespace {

PreferencePair win_pair(const std::string& i, const std::string& j) {
  PreferencePair p;
  p.id_i = i;
  p.id_j = j;
  p.relation = PairRelation::Win;
  return p;
}

// Brute-force kappa: expand each item's counts into a rating list, count
// agreeing pairs directly, and use pooled category frequencies for chance.
double fleiss_oracle(const std::vector<std::vector<int>>& counts) {
  const double items = static_cast<double>(counts.size());
  double mean_agreement = 0.0;
  std::vector<double> pooled(counts[0].size(), 0.0);
  double total_ratings = 0.0;
  for (const auto& row : counts) {
    std::vector<int> flat;
    for (std::size_t j = 0; j < row.size(); ++j) {
      pooled[j] += row[j];
      total_ratings += row[j];
      for (int k = 0; k < row[j]; ++k) flat.push_back(static_cast<int>(j));
    }
    long agree = 0, pairs = 0;
    for (std::size_t a = 0; a < flat.size(); ++a)
      for (std::size_t b = a + 1; b < flat.size(); ++b) {
        ++pairs;
        if (flat[a] == flat[b]) ++agree;
      }
    mean_agreement += static_cast<double>(agree) / static_cast<double>(pairs);
  }
  mean_agreement /= items;
  double chance = 0.0;
  for (double mass : pooled) {
    const double p = mass / total_ratings;
    chance += p * p;
  }
  return (mean_agreement - chance) / (1.0 - chance);
}

// Brute-force alpha: per-unit disagreement sums and pooled marginals,
// without building the coincidence matrix.
// Returns false when expected disagreement is zero (degenerate input).
bool alpha_oracle(const std::vector<std::vector<int>>& ratings, double* alpha) {
  const std::size_t items = ratings[0].size();
  double n = 0.0, observed_sum = 0.0;
  std::map<int, double> marginal;
  for (std::size_t u = 0; u < items; ++u) {
    std::vector<int> values;
    for (const auto& row : ratings)
      if (row[u] >= 0) values.push_back(row[u]);
    if (values.size() < 2) continue;
    const double m = static_cast<double>(values.size());
    n += m;
    for (int v : values) marginal[v] += 1.0;
    long disagree = 0;
    for (std::size_t a = 0; a < values.size(); ++a)
      for (std::size_t b = 0; b < values.size(); ++b)
        if (a != b && values[a] != values[b]) ++disagree;
    observed_sum += static_cast<double>(disagree) / (m - 1.0);
  }
  double expected = 0.0;
  for (const auto& a : marginal)
    for (const auto& b : marginal)
      if (a.first != b.first) expected += a.second * b.second;
  expected /= n * (n - 1.0);
  if (expected == 0.0) return false;
  *alpha = 1.0 - (observed_sum / n) / expected;
  return true;
}

}  // namespace

TEST_CASE("pairwise accuracy counts strict wins only") {
  std::unordered_map<std::string, double> rewards = {{"w", 2.0}, {"l", 1.0}};
  CHECK(pairwise_accuracy(rewards, {win_pair("w", "l")}) == 1.0);

  rewards = {{"w", 1.0}, {"l", 1.0}};
  CHECK(pairwise_accuracy(rewards, {win_pair("w", "l")}) == 0.0);  // tie = failure

  rewards = {{"a", 3.0}, {"b", 2.0}, {"c", 2.5}};
  std::vector<PreferencePair> pairs = {win_pair("a", "b"), win_pair("a", "c"),
                                       win_pair("b", "c")};
  CHECK(pairwise_accuracy(rewards, pairs) == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS_AS(pairwise_accuracy(rewards, {}), DataError);
  CHECK_THROWS_AS(pairwise_accuracy(rewards, {win_pair("a", "zzz")}), DataError);
  PreferencePair tie = win_pair("a", "b");
  tie.relation = PairRelation::Tie;
  CHECK_THROWS_AS(pairwise_accuracy(rewards, {tie}), DataError);
}

TEST_CASE("pairwise accuracy is invariant under increasing transforms") {
  Rng rng(5);
  std::unordered_map<std::string, double> rewards;
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 20; ++i) rewards["s" + std::to_string(i)] = rng.normal();
  for (int i = 0; i < 30; ++i)
    pairs.push_back(win_pair("s" + std::to_string(rng.uniform_index(20)),
                             "s" + std::to_string(rng.uniform_index(20))));
  // self-pairs are exact ties and remain ties under any transform
  const double base = pairwise_accuracy(rewards, pairs);
  std::unordered_map<std::string, double> warped, scaled;
  for (const auto& e : rewards) {
    warped[e.first] = std::exp(e.second);
    scaled[e.first] = 2.0 * e.second + 1.0;
  }
  CHECK(pairwise_accuracy(warped, pairs) == base);
  CHECK(pairwise_accuracy(scaled, pairs) == base);
}

TEST_CASE("reward margin is the difference of class means") {
  std::unordered_map<std::string, double> rewards = {{"a", 2.0}, {"b", 4.0}, {"c", 1.0}};
  std::unordered_map<std::string, Verdict> labels = {
      {"a", Verdict::Pass}, {"b", Verdict::Pass}, {"c", Verdict::Fail}};
  CHECK(reward_margin(rewards, labels) == doctest::Approx(2.0).epsilon(1e-12));

  std::unordered_map<std::string, double> shifted, stretched;
  for (const auto& e : rewards) {
    shifted[e.first] = e.second + 17.5;
    stretched[e.first] = e.second * 3.0;
  }
  CHECK(reward_margin(shifted, labels) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(reward_margin(stretched, labels) == doctest::Approx(6.0).epsilon(1e-9));

  std::unordered_map<std::string, Verdict> one_class = {
      {"a", Verdict::Pass}, {"b", Verdict::Pass}, {"c", Verdict::Pass}};
  CHECK_THROWS_AS(reward_margin(rewards, one_class), DataError);
  std::unordered_map<std::string, Verdict> incomplete = {{"a", Verdict::Pass}};
  CHECK_THROWS_AS(reward_margin(rewards, incomplete), DataError);
}

TEST_CASE("group advantage standardizes with the population deviation") {
  std::vector<double> a = group_advantage({1.0, 2.0, 3.0});
  REQUIRE(a.size() == 3);
  CHECK(a[0] == doctest::Approx(-1.224745).epsilon(1e-6));
  CHECK(a[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(a[2] == doctest::Approx(1.224745).epsilon(1e-6));

  std::vector<double> flat = group_advantage({0.7, 0.7, 0.7, 0.7});
  for (double v : flat) CHECK(v == 0.0);

  CHECK_THROWS_AS(group_advantage({1.0}), DataError);

  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> rewards;
    for (int i = 0; i < 8; ++i) rewards.push_back(rng.normal(0.0, 2.0));
    std::vector<double> adv = group_advantage(rewards);
    double mean = 0.0, var = 0.0;
    for (double v : adv) mean += v;
    mean /= 8.0;
    for (double v : adv) var += (v - mean) * (v - mean);
    var /= 8.0;
    CHECK(std::fabs(mean) < 1e-9);
    CHECK(std::fabs(var - 1.0) < 1e-9);

    std::vector<double> affine;
    for (double r : rewards) affine.push_back(2.5 * r - 7.0);
    std::vector<double> adv2 = group_advantage(affine);
    for (std::size_t i = 0; i < adv.size(); ++i)
      CHECK(adv2[i] == doctest::Approx(adv[i]).epsilon(1e-9));
  }
}

TEST_CASE("clustering stats quantize before counting") {
  std::vector<double> distinct;
  for (int i = 0; i < 100; ++i) distinct.push_back(static_cast<double>(i));
  ClusterStats s = clustering_stats(distinct);
  CHECK(s.distinct_ratio == 1.0);
  CHECK(s.mode_mass == doctest::Approx(0.01));

  std::vector<double> identical(40, 0.3);
  s = clustering_stats(identical);
  CHECK(s.distinct_ratio == doctest::Approx(1.0 / 40.0));
  CHECK(s.mode_mass == 1.0);
  CHECK(s.entropy == 0.0);

  std::vector<double> halves;
  for (int i = 0; i < 50; ++i) halves.push_back(0.0);
  for (int i = 0; i < 50; ++i) halves.push_back(1.0);
  s = clustering_stats(halves);
  CHECK(s.entropy == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(s.mode_mass == 0.5);

  // Sub-quantum jitter collapses into one bin.
  std::vector<double> jitter = {0.5, 0.5 + 2e-8, 0.5 - 3e-8};
  s = clustering_stats(jitter);
  CHECK(s.distinct_ratio == doctest::Approx(1.0 / 3.0));
  CHECK(s.mode_mass == 1.0);

  CHECK_THROWS_AS(clustering_stats({}), DataError);
}

TEST_CASE("advantage report tracks the top-ranked sample per group") {
  // Group 1: top reward 3.0 has advantage 1.224745; group 2 is degenerate.
  AdvantageReport report =
      advantage_report({{1.0, 2.0, 3.0}, {0.5, 0.5, 0.5}});
  REQUIRE(report.advantages.size() == 2);
  CHECK(report.mean_abs_top == doctest::Approx(1.224745 / 2.0).epsilon(1e-6));

  long total = 0;
  for (long c : report.histogram.counts) total += c;
  CHECK(total == 6);

  std::string csv = report.histogram.to_csv();
  CHECK(csv.rfind("bin_left,count\n", 0) == 0);

  CHECK_THROWS_AS(advantage_report({}), DataError);
}

TEST_CASE("fleiss kappa hits its hand-computed values") {
  // Perfect agreement with mixed categories across items.
  std::vector<std::vector<int>> perfect = {{3, 0}, {0, 3}, {3, 0}};
  IaaResult r = fleiss_kappa(perfect);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(!r.degenerate);
  CHECK(r.band == "almost_perfect");

  CHECK(fleiss_kappa({{2, 0}, {0, 2}}).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fleiss_kappa({{1, 1}, {1, 1}}).value == doctest::Approx(-1.0).epsilon(1e-12));

  IaaResult degenerate = fleiss_kappa({{3, 0}, {3, 0}});
  CHECK(degenerate.degenerate);
  CHECK(degenerate.value == 1.0);

  CHECK_THROWS_AS(fleiss_kappa({}), DataError);
  CHECK_THROWS_AS(fleiss_kappa({{2, 0}, {1, 2}}), DataError);  // unequal raters
  CHECK_THROWS_AS(fleiss_kappa({{1, 0}, {0, 1}}), DataError);  // single rater
}

TEST_CASE("fleiss kappa agrees with a brute-force expansion oracle") {
  Rng rng(21);
  for (int rep = 0; rep < 100; ++rep) {
    const int items = 2 + static_cast<int>(rng.uniform_index(7));
    const int raters = 2 + static_cast<int>(rng.uniform_index(4));
    const int categories = 2 + static_cast<int>(rng.uniform_index(3));
    std::vector<std::vector<int>> counts(static_cast<std::size_t>(items),
                                         std::vector<int>(static_cast<std::size_t>(categories)));
    for (auto& row : counts)
      for (int k = 0; k < raters; ++k) ++row[rng.uniform_index(static_cast<std::size_t>(categories))];

    IaaResult result = fleiss_kappa(counts);
    if (result.degenerate) continue;  // oracle would divide by zero too
    CHECK(result.value == doctest::Approx(fleiss_oracle(counts)).epsilon(1e-10));
  }
}

TEST_CASE("krippendorff alpha hits its fixed points") {
  // Two raters, perfect agreement over two distinct categories.
  std::vector<std::vector<int>> perfect = {{0, 1, 0, 1}, {0, 1, 0, 1}};
  IaaResult r = krippendorff_alpha(perfect);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(!r.degenerate);

  IaaResult degenerate = krippendorff_alpha({{1, 1}, {1, 1}});
  CHECK(degenerate.degenerate);
  CHECK(degenerate.value == 1.0);

  CHECK_THROWS_AS(krippendorff_alpha({}), DataError);
  CHECK_THROWS_AS(krippendorff_alpha({{0, -1}, {-1, 1}}), DataError);  // nothing pairable
}

TEST_CASE("krippendorff alpha of shuffled labels is near zero") {
  Rng rng(33);
  const int items = 1000;
  std::vector<std::vector<int>> ratings(2, std::vector<int>(items));
  for (int u = 0; u < items; ++u) {
    ratings[0][static_cast<std::size_t>(u)] = static_cast<int>(rng.uniform_index(2));
    ratings[1][static_cast<std::size_t>(u)] = static_cast<int>(rng.uniform_index(2));
  }
  CHECK(std::fabs(krippendorff_alpha(ratings).value) < 0.05);
}

TEST_CASE("krippendorff alpha agrees with a brute-force oracle, missing cells included") {
  // The spec's smallest interesting shape first: 3 raters x 4 items, one hole.
  std::vector<std::vector<int>> small = {{0, 1, 1, 0}, {0, 1, 0, -1}, {1, 1, 0, 0}};
  double expected = 0.0;
  REQUIRE(alpha_oracle(small, &expected));
  CHECK(krippendorff_alpha(small).value == doctest::Approx(expected).epsilon(1e-10));

  Rng rng(55);
  int compared = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int raters = 2 + static_cast<int>(rng.uniform_index(4));
    const int items = 2 + static_cast<int>(rng.uniform_index(7));
    const int categories = 2 + static_cast<int>(rng.uniform_index(3));
    std::vector<std::vector<int>> ratings(static_cast<std::size_t>(raters),
                                          std::vector<int>(static_cast<std::size_t>(items)));
    for (auto& row : ratings)
      for (int& cell : row)
        cell = rng.uniform() < 0.2 ? -1 : static_cast<int>(rng.uniform_index(
                                              static_cast<std::size_t>(categories)));
    double pairable = 0;
    for (int u = 0; u < items; ++u) {
      int m = 0;
      for (const auto& row : ratings)
        if (row[static_cast<std::size_t>(u)] >= 0) ++m;
      if (m >= 2) pairable += m;
    }
    if (pairable < 2) continue;

    double oracle = 0.0;
    IaaResult result = krippendorff_alpha(ratings);
    if (!alpha_oracle(ratings, &oracle)) {
      CHECK(result.degenerate);
      continue;
    }
    CHECK(result.value == doctest::Approx(oracle).epsilon(1e-10));
    ++compared;
  }
  CHECK(compared > 60);  // the loop must actually exercise the oracle
}

TEST_CASE("raw agreement averages agreeing pair fractions") {
  std::vector<std::vector<int>> unanimous = {{1, 0, 1}, {1, 0, 1}, {1, 0, 1}};
  CHECK(raw_agreement(unanimous) == 1.0);

  // Three raters splitting 2-vs-1 on every item: one agreeing pair of three.
  std::vector<std::vector<int>> split = {{1, 0, 1}, {1, 0, 1}, {0, 1, 0}};
  CHECK(raw_agreement(split) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  std::vector<std::vector<int>> opposed = {{1, 0, 1}, {0, 1, 0}};
  CHECK(raw_agreement(opposed) == 0.0);

  CHECK_THROWS_AS(raw_agreement({{1, 0}}), DataError);
}

TEST_CASE("annotation records convert to deterministic matrices") {
  auto record = [](const std::string& sample, const std::string& rater, Verdict v) {
    AnnotationRecord a;
    a.sample_id = sample;
    a.annotator_id = rater;
    a.dimension = "visual_quality";
    a.verdict = v;
    return a;
  };
  std::vector<AnnotationRecord> annotations = {
      record("s1", "a1", Verdict::Pass), record("s1", "a2", Verdict::Fail),
      record("s0", "a1", Verdict::Pass), record("s0", "a2", Verdict::Pass)};

  std::vector<std::vector<int>> counts = verdict_counts(annotations);
  REQUIRE(counts.size() == 2);
  CHECK(counts[0] == std::vector<int>{0, 2});  // s0: two Pass
  CHECK(counts[1] == std::vector<int>{1, 1});  // s1: split

  std::vector<std::vector<int>> matrix = rating_matrix(annotations);
  REQUIRE(matrix.size() == 2);
  CHECK(matrix[0] == std::vector<int>{1, 1});  // a1 over (s0, s1)
  CHECK(matrix[1] == std::vector<int>{1, 0});  // a2 over (s0, s1)

  // By hand: mean item agreement 0.5, chance 0.625, kappa = -1/3.
  CHECK(fleiss_kappa(counts).value == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("interpretation bands follow the conventional thresholds") {
  CHECK(iaa_band(-0.2) == "poor");
  CHECK(iaa_band(0.1) == "slight");
  CHECK(iaa_band(0.25) == "fair");
  CHECK(iaa_band(0.45) == "moderate");
  CHECK(iaa_band(0.7) == "substantial");
  CHECK(iaa_band(0.95) == "almost_perfect");
  CHECK(iaa_band(0.2) == "fair");  // boundaries belong to the upper band
  CHECK(iaa_band(0.8) == "almost_perfect");
}

TEST_CASE("eval report serializes to a flat row and a json document") {
  EvalReport report;
  report.accuracy_id = 0.9;
  report.accuracy_ood = 0.6;
  report.margin_id = 1.25;
  report.margin_ood = 0.5;
  report.clustering = clustering_stats({0.0, 0.0, 1.0, 1.0});
  report.positive_score_variance = 0.04;

  const std::string header = EvalReport::csv_header();
  const std::string row = report.csv_row();
  CHECK(std::count(header.begin(), header.end(), ',') ==
        std::count(row.begin(), row.end(), ','));

  nlohmann::json j = nlohmann::json::parse(report.to_json());
  CHECK(j["accuracy_id"].get<double>() == doctest::Approx(0.9));
  CHECK(j["clustering"]["mode_mass"].get<double>() == doctest::Approx(0.5));
  CHECK(j["positive_score_variance"].get<double>() == doctest::Approx(0.04));
}
