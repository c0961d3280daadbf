#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "rmlab/backbone.hpp"
#include "rmlab/heads.hpp"

namespace rmlab {

// Encoder + reward head + their joint parameter set.
struct RewardModel {
  BackboneConfig backbone;
  HeadConfig head;
  ParamStore params;
};

RewardModel init_reward_model(const BackboneConfig& backbone, const HeadConfig& head,
                              std::uint64_t seed);

// Full differentiable pass over a sample batch; returns the [B] reward node.
NodeId reward_forward(Tape& tape, const ParamBinding& params, const RewardModel& model,
                      const std::vector<const SyntheticSample*>& batch);

// Gradient-free scoring. Batched internally; order matches the input.
std::vector<double> score_samples(const RewardModel& model,
                                  const std::vector<const SyntheticSample*>& samples);
double score_sample(const RewardModel& model, const SyntheticSample& sample);
std::unordered_map<std::string, double> score_by_id(const RewardModel& model,
                                                    const std::vector<SyntheticSample>& samples);

}  // namespace rmlab
