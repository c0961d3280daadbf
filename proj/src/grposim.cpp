#include "rmlab/grposim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rmlab/metrics.hpp"
#include "rmlab/rng.hpp"

namespace rmlab {

void ToyPolicy::validate() const {
  if (!std::isfinite(mean_quality) || !std::isfinite(shortcut_logit))
    throw ConfigError("policy parameters must be finite");
  if (!(noise > 0.0) || !std::isfinite(noise))
    throw ConfigError("policy noise must be positive and finite");
}

double shortcut_probability(const ToyPolicy& policy) {
  const double s = policy.shortcut_logit;
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

void SimOptions::validate() const {
  if (group_size < 2) throw ConfigError("simulator group size must be >= 2");
  if (step_size < 0.0 || !std::isfinite(step_size))
    throw ConfigError("simulator step size must be >= 0");
  if (advantage_clip < 0.0) throw ConfigError("advantage clip must be >= 0");
  if (prompt_id.empty()) throw ConfigError("simulator prompt id must be non-empty");
}

RolloutResult rollout_group(const ToyPolicy& policy, int group_size, const GroupScorer& scorer,
                            const CorpusConfig& corpus, std::uint64_t seed,
                            const std::string& prompt_id) {
  policy.validate();
  if (group_size < 2) throw ConfigError("rollout group size must be >= 2");

  Rng rng(derive_seed(seed, "rollout"));
  const auto dirs = feature_directions(corpus);
  const double shortcut_p = shortcut_probability(policy);

  RolloutResult out;
  out.samples.reserve(static_cast<std::size_t>(group_size));
  for (int k = 0; k < group_size; ++k) {
    SyntheticSample sample;
    sample.sample_id = prompt_id + "_g" + std::to_string(k);
    sample.prompt_id = prompt_id;
    sample.dimension = corpus.dimension;
    const double q = policy.mean_quality + policy.noise * rng.normal();
    sample.latent_quality = q;
    sample.shortcut = rng.bernoulli(shortcut_p) ? 1 : 0;
    sample.features = synthesize_features(visible_quality(q, corpus), dirs, corpus, rng);
    out.samples.push_back(std::move(sample));
  }

  out.rewards = scorer(out.samples);
  if (out.rewards.size() != out.samples.size())
    throw DataError("scorer returned " + std::to_string(out.rewards.size()) + " rewards for " +
                    std::to_string(out.samples.size()) + " samples");
  out.advantages = group_advantage(out.rewards);
  return out;
}

namespace {

GroupScorer model_scorer(const RewardModel& rm) {
  return [&rm](const std::vector<SyntheticSample>& samples) {
    std::vector<const SyntheticSample*> ptrs;
    ptrs.reserve(samples.size());
    for (const auto& s : samples) ptrs.push_back(&s);
    return score_samples(rm, ptrs);
  };
}

double mean_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

}  // namespace

RolloutResult rollout_group(const ToyPolicy& policy, int group_size, const RewardModel& rm,
                            const CorpusConfig& corpus, std::uint64_t seed,
                            const std::string& prompt_id) {
  return rollout_group(policy, group_size, model_scorer(rm), corpus, seed, prompt_id);
}

Trajectory simulate(const ToyPolicy& policy0, const GroupScorer& scorer,
                    const CorpusConfig& corpus, int steps, const SimOptions& options,
                    std::uint64_t seed) {
  policy0.validate();
  options.validate();
  if (steps < 0) throw ConfigError("simulation steps must be >= 0");

  ToyPolicy policy = policy0;
  Trajectory out;
  out.points.reserve(static_cast<std::size_t>(steps) + 1);
  for (int t = 0; t <= steps; ++t) {
    RolloutResult roll =
        rollout_group(policy, options.group_size, scorer, corpus,
                      derive_seed(seed, "sim_step:" + std::to_string(t)), options.prompt_id);

    TrajectoryPoint point;
    point.step = t;
    point.mean_quality = policy.mean_quality;
    point.shortcut_prob = shortcut_probability(policy);
    point.mean_reward = mean_of(roll.rewards);
    std::vector<double> qualities;
    qualities.reserve(roll.samples.size());
    for (const auto& s : roll.samples) qualities.push_back(s.latent_quality);
    point.mean_true_quality = mean_of(qualities);
    point.top_advantage_abs = advantage_report({roll.rewards}).mean_abs_top;
    out.points.push_back(point);
    if (t == steps) break;  // the final point is measurement-only

    // REINFORCE on the group: grad_m log p(q) = (q - m) / noise^2,
    // grad_s log p(b) = b - sigmoid(s); the standardized advantage already
    // carries the group baseline.
    const double inv_noise2 = 1.0 / (policy.noise * policy.noise);
    double grad_m = 0.0;
    double grad_s = 0.0;
    for (std::size_t k = 0; k < roll.samples.size(); ++k) {
      double a = roll.advantages[k];
      if (options.advantage_clip > 0.0)
        a = std::clamp(a, -options.advantage_clip, options.advantage_clip);
      grad_m += a * (roll.samples[k].latent_quality - policy.mean_quality) * inv_noise2;
      grad_s += a * (static_cast<double>(roll.samples[k].shortcut) - point.shortcut_prob);
    }
    const double scale = options.step_size / static_cast<double>(options.group_size);
    policy.mean_quality += scale * grad_m;
    policy.shortcut_logit += scale * grad_s;
    if (!std::isfinite(policy.mean_quality) || !std::isfinite(policy.shortcut_logit))
      throw NumericError("policy diverged at step " + std::to_string(t + 1));
  }
  return out;
}

Trajectory simulate(const ToyPolicy& policy0, const RewardModel& rm, const CorpusConfig& corpus,
                    int steps, const SimOptions& options, std::uint64_t seed) {
  return simulate(policy0, model_scorer(rm), corpus, steps, options, seed);
}

double hacking_index(const Trajectory& trajectory, const Trajectory& reference) {
  if (trajectory.points.empty() || reference.points.empty())
    throw DataError("hacking_index needs non-empty trajectories");
  if (trajectory.points.size() != reference.points.size())
    throw DataError("trajectory length " + std::to_string(trajectory.points.size()) +
                    " does not match reference length " +
                    std::to_string(reference.points.size()));
  const double drift =
      trajectory.points.back().shortcut_prob - trajectory.points.front().shortcut_prob;
  const double ref_drift =
      reference.points.back().shortcut_prob - reference.points.front().shortcut_prob;
  return drift - ref_drift;
}

std::string Trajectory::csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "step,m,shortcut_prob,mean_reward,mean_quality,top_adv_abs\n";
  for (const auto& p : points)
    out << p.step << "," << p.mean_quality << "," << p.shortcut_prob << "," << p.mean_reward
        << "," << p.mean_true_quality << "," << p.top_advantage_abs << "\n";
  return out.str();
}

std::string side_by_side_csv(const Trajectory& a, const std::string& name_a, const Trajectory& b,
                             const std::string& name_b) {
  if (a.points.size() != b.points.size())
    throw DataError("side-by-side export needs equal-length trajectories");
  std::ostringstream out;
  out.precision(10);
  auto cols = [&out](const std::string& name) {
    out << ",m_" << name << ",shortcut_prob_" << name << ",mean_reward_" << name
        << ",mean_quality_" << name << ",top_adv_abs_" << name;
  };
  out << "step";
  cols(name_a);
  cols(name_b);
  out << "\n";
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    auto row = [&out](const TrajectoryPoint& p) {
      out << "," << p.mean_quality << "," << p.shortcut_prob << "," << p.mean_reward << ","
          << p.mean_true_quality << "," << p.top_advantage_abs;
    };
    out << a.points[i].step;
    row(a.points[i]);
    row(b.points[i]);
    out << "\n";
  }
  return out.str();
}

}  // namespace rmlab
