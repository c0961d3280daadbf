#include "rmlab/model.hpp"

#include "rmlab/error.hpp"
#include "rmlab/rng.hpp"

namespace rmlab {

RewardModel init_reward_model(const BackboneConfig& backbone, const HeadConfig& head,
                              std::uint64_t seed) {
  backbone.validate();
  head.validate(backbone);
  RewardModel model;
  model.backbone = backbone;
  model.head = head;
  model.params = init_backbone_params(backbone, derive_seed(seed, "backbone"));
  model.params.absorb(init_head_params(head, backbone, derive_seed(seed, "head")));
  return model;
}

NodeId reward_forward(Tape& tape, const ParamBinding& params, const RewardModel& model,
                      const std::vector<const SyntheticSample*>& batch) {
  Tensor tokens = embed_batch(batch, model.backbone);
  std::vector<NodeId> states = encode(tape, params, model.backbone, tokens);
  return head_forward(tape, params, model.head, model.backbone, states);
}

std::vector<double> score_samples(const RewardModel& model,
                                  const std::vector<const SyntheticSample*>& samples) {
  constexpr std::size_t kChunk = 256;
  std::vector<double> out;
  out.reserve(samples.size());
  for (std::size_t begin = 0; begin < samples.size(); begin += kChunk) {
    std::size_t end = std::min(samples.size(), begin + kChunk);
    std::vector<const SyntheticSample*> chunk(samples.begin() + begin, samples.begin() + end);
    Tape tape;
    ParamBinding binding =
        bind_params(tape, model.params, [](const std::string&) { return false; });
    NodeId rewards = reward_forward(tape, binding, model, chunk);
    const Tensor& value = tape.value(rewards);
    out.insert(out.end(), value.data.begin(), value.data.end());
  }
  return out;
}

double score_sample(const RewardModel& model, const SyntheticSample& sample) {
  return score_samples(model, {&sample}).front();
}

std::unordered_map<std::string, double> score_by_id(const RewardModel& model,
                                                    const std::vector<SyntheticSample>& samples) {
  std::vector<const SyntheticSample*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s);
  std::vector<double> scores = score_samples(model, ptrs);
  std::unordered_map<std::string, double> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out.emplace(samples[i].sample_id, scores[i]);
  return out;
}

}  // namespace rmlab
