#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rmlab/corpus.hpp"
#include "rmlab/model.hpp"

namespace rmlab {

// Two-parameter sample generator: latent quality ~ Normal(mean_quality,
// noise^2), shortcut bit ~ Bernoulli(sigmoid(shortcut_logit)). With only
// these two knobs, shortcut exploitation is directly readable from the
// shortcut probability instead of inferred from generated artifacts.
struct ToyPolicy {
  double mean_quality = -0.5;
  double shortcut_logit = 0.0;
  double noise = 1.0;  // quality sampling spread

  void validate() const;  // throws ConfigError
};

double shortcut_probability(const ToyPolicy& policy);  // sigmoid(shortcut_logit)

// Scores a batch of emitted samples. The reward-model overloads wrap
// score_samples; tests substitute analytic oracles.
using GroupScorer = std::function<std::vector<double>(const std::vector<SyntheticSample>&)>;

struct RolloutResult {
  std::vector<SyntheticSample> samples;
  std::vector<double> rewards;
  std::vector<double> advantages;  // group-standardized rewards
};

// Draws group_size samples from the policy's generative model (feature
// family shared with the corpus generator), scores them, and standardizes
// rewards within the group. group_size must be >= 2.
RolloutResult rollout_group(const ToyPolicy& policy, int group_size, const GroupScorer& scorer,
                            const CorpusConfig& corpus, std::uint64_t seed,
                            const std::string& prompt_id = "sim0000");
RolloutResult rollout_group(const ToyPolicy& policy, int group_size, const RewardModel& rm,
                            const CorpusConfig& corpus, std::uint64_t seed,
                            const std::string& prompt_id = "sim0000");

struct SimOptions {
  int group_size = 8;
  double step_size = 0.05;
  double advantage_clip = 0.0;        // clamp |A| in the update; 0 disables
  std::string prompt_id = "sim0000";  // prompt context shared by every group

  void validate() const;  // throws ConfigError
};

struct TrajectoryPoint {
  int step = 0;
  double mean_quality = 0.0;       // policy parameter m
  double shortcut_prob = 0.0;      // sigmoid(s)
  double mean_reward = 0.0;        // over the step's emitted group
  double mean_true_quality = 0.0;  // mean latent quality of the group
  double top_advantage_abs = 0.0;  // |A| of the group's highest-reward member
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;  // steps + 1 entries; index == step

  // step,m,shortcut_prob,mean_reward,mean_quality,top_adv_abs rows.
  std::string csv() const;
};

// Score-function policy optimization with the group-standardized advantage
// as weight (no KL or ratio clipping; hacking pressure stays unfiltered).
// Point t records the policy before update t+1; the last point is
// measurement-only. Deterministic from seed. Throws NumericError naming the
// step if a policy parameter leaves the finite range.
Trajectory simulate(const ToyPolicy& policy0, const GroupScorer& scorer,
                    const CorpusConfig& corpus, int steps, const SimOptions& options,
                    std::uint64_t seed);
Trajectory simulate(const ToyPolicy& policy0, const RewardModel& rm, const CorpusConfig& corpus,
                    int steps, const SimOptions& options, std::uint64_t seed);

// Shortcut-probability drift of a run minus the drift of a reference run
// (typically a quality-oracle run of equal length); positive values mean
// shortcut exploitation beyond baseline wander.
double hacking_index(const Trajectory& trajectory, const Trajectory& reference);

// Two equal-length runs column-by-column for side-by-side plots.
std::string side_by_side_csv(const Trajectory& a, const std::string& name_a, const Trajectory& b,
                             const std::string& name_b);

}  // namespace rmlab
