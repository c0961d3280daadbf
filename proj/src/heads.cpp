#include "rmlab/heads.hpp"

#include <cmath>

#include "rmlab/rng.hpp"

namespace rmlab {

std::string head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::Hpqa: return "hpqa";
    case HeadKind::LinearLastToken: return "linear_last_token";
    case HeadKind::SpecialToken: return "special_token";
    case HeadKind::YesTokenLogit: return "yes_token_logit";
  }
  throw Error("unreachable head kind");
}

HeadKind head_kind_from_name(const std::string& name) {
  if (name == "hpqa") return HeadKind::Hpqa;
  if (name == "linear_last_token") return HeadKind::LinearLastToken;
  if (name == "special_token") return HeadKind::SpecialToken;
  if (name == "yes_token_logit") return HeadKind::YesTokenLogit;
  throw ConfigError("unknown head kind: " + name);
}

std::vector<int> default_layer_indices(int layers, int count) {
  std::vector<int> out;
  for (int k = 1; k <= count; ++k)
    out.push_back(static_cast<int>(std::lround(static_cast<double>(k) * layers / count)));
  return out;
}

std::vector<int> HeadConfig::resolved_indices(int layers) const {
  if (!layer_indices.empty()) return layer_indices;
  // Fewer than 3 layers cannot host 3 distinct stages; shrink the default.
  return default_layer_indices(layers, std::min(3, layers));
}

int HeadConfig::resolved_heads(const BackboneConfig& config) const {
  return attn_heads > 0 ? attn_heads : config.heads;
}

void HeadConfig::validate(const BackboneConfig& config) const {
  if (kind == HeadKind::Hpqa) {
    const auto idx = resolved_indices(config.layers);
    if (idx.empty()) throw ConfigError("head.layer_indices must be non-empty");
    int prev = -1;
    for (int l : idx) {
      if (l < 0 || l > config.layers)
        throw ConfigError("head.layer_indices entry " + std::to_string(l) +
                          " outside [0, " + std::to_string(config.layers) + "]");
      if (l <= prev) throw ConfigError("head.layer_indices must be strictly increasing");
      prev = l;
    }
    const int h = resolved_heads(config);
    if (h < 1 || config.model_dim % h != 0)
      throw ConfigError("backbone.model_dim must be divisible by head.attn_heads");
  }
  if (kind == HeadKind::SpecialToken && !config.special_token)
    throw ConfigError("special_token head requires backbone.special_token = true");
}

namespace {

Tensor init_weight(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.normal(0.0, sd);
  return t;
}

void add_mha_params(ParamStore& p, const std::string& prefix, int D, Rng& rng) {
  p.add(prefix + ".wq", init_weight({D, D}, D, rng));
  p.add(prefix + ".bq", Tensor::zeros({D}));
  p.add(prefix + ".wk", init_weight({D, D}, D, rng));
  p.add(prefix + ".wv", init_weight({D, D}, D, rng));
  p.add(prefix + ".bv", Tensor::zeros({D}));
  p.add(prefix + ".wo", init_weight({D, D}, D, rng));
  p.add(prefix + ".bo", Tensor::zeros({D}));
}

MhaWeights mha_at(const ParamBinding& p, const std::string& prefix) {
  return MhaWeights{p.at(prefix + ".wq"), p.at(prefix + ".bq"), p.at(prefix + ".wk"),
                    p.at(prefix + ".wv"), p.at(prefix + ".bv"), p.at(prefix + ".wo"),
                    p.at(prefix + ".bo")};
}

}  // namespace

ParamStore init_head_params(const HeadConfig& head, const BackboneConfig& config,
                            std::uint64_t seed) {
  head.validate(config);
  Rng rng(derive_seed(seed, "head_init"));
  const int D = config.model_dim;
  ParamStore p;

  switch (head.kind) {
    case HeadKind::Hpqa: {
      const auto idx = head.resolved_indices(config.layers);
      p.add("head.q0", init_weight({1, 1, D}, D, rng));
      p.add("head.q_res", init_weight({1, 1, D}, D, rng));
      for (std::size_t k = 0; k < idx.size(); ++k)
        add_mha_params(p, "head.stage" + std::to_string(k + 1), D, rng);
      add_mha_params(p, "head.res", D, rng);
      p.add("head.reward.w1", init_weight({D, D}, D, rng));
      p.add("head.reward.b1", Tensor::zeros({D}));
      p.add("head.reward.w2", init_weight({D, 1}, D, rng));
      p.add("head.reward.b2", Tensor::zeros({1}));  // zero-initialized scalar bias
      break;
    }
    case HeadKind::LinearLastToken:
      p.add("head.linear.w", init_weight({D, 1}, D, rng));
      p.add("head.linear.b", Tensor::zeros({1}));
      break;
    case HeadKind::SpecialToken:
      p.add("head.special.w", init_weight({D, 1}, D, rng));
      p.add("head.special.b", Tensor::zeros({1}));
      break;
    case HeadKind::YesTokenLogit:
      p.add("head.yes.w", init_weight({D, 2}, D, rng));
      p.add("head.yes.b", Tensor::zeros({2}));
      break;
  }
  return p;
}

NodeId hpqa_forward(Tape& tape, const ParamBinding& params, const HeadConfig& head,
                    const BackboneConfig& config, const std::vector<NodeId>& hidden_states,
                    HpqaTrace* trace) {
  const auto idx = head.resolved_indices(config.layers);
  if (idx.empty()) throw ConfigError("progressive head needs at least one layer index");
  for (int l : idx)
    if (l < 0 || l >= static_cast<int>(hidden_states.size()))
      throw ConfigError("layer index " + std::to_string(l) + " outside the hidden-state list");

  const int heads = head.resolved_heads(config);
  const int B = tape.value(hidden_states[0]).shape[0];
  const int D = config.model_dim;

  if (trace) *trace = HpqaTrace{};

  // Progressive branch: the learnable query attends to the first selected
  // state, then the refined query re-attends at each later selected state.
  NodeId q = tape.expand_leading(params.at("head.q0"), B);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::string prefix = "head.stage" + std::to_string(k + 1);
    q = multi_head_attention(tape, q, hidden_states[static_cast<std::size_t>(idx[k])],
                             hidden_states[static_cast<std::size_t>(idx[k])],
                             mha_at(params, prefix), heads);
    if (trace) {
      ++trace->stage_count;
      trace->stage_layers.push_back(idx[k]);
    }
  }

  // Residual branch: an independent query attends to the final state.
  const int last = static_cast<int>(hidden_states.size()) - 1;
  NodeId q_res = tape.expand_leading(params.at("head.q_res"), B);
  NodeId o_res = multi_head_attention(tape, q_res, hidden_states[static_cast<std::size_t>(last)],
                                      hidden_states[static_cast<std::size_t>(last)],
                                      mha_at(params, "head.res"), heads);
  if (trace) trace->residual_layer = last;

  NodeId summed = tape.reshape(tape.add(q, o_res), {B, D});
  NodeId hidden = tape.gelu(
      affine(tape, summed, params.at("head.reward.w1"), params.at("head.reward.b1")));
  NodeId reward =
      affine(tape, hidden, params.at("head.reward.w2"), params.at("head.reward.b2"));
  return tape.reshape(reward, {B});
}

NodeId baseline_forward(Tape& tape, const ParamBinding& params, const HeadConfig& head,
                        const BackboneConfig& config, const std::vector<NodeId>& hidden_states) {
  const NodeId h_last = hidden_states.back();
  const Tensor& hs = tape.value(h_last);
  const int B = hs.shape[0];

  switch (head.kind) {
    case HeadKind::LinearLastToken: {
      NodeId last = tape.select_position(h_last, hs.shape[1] - 1);  // [B, D]
      NodeId r = affine(tape, last, params.at("head.linear.w"), params.at("head.linear.b"));
      return tape.reshape(r, {B});
    }
    case HeadKind::SpecialToken: {
      if (!config.special_token)
        throw ConfigError("special_token head requires backbone.special_token = true");
      NodeId slot = tape.select_position(h_last, 0);  // [B, D]
      NodeId r = affine(tape, slot, params.at("head.special.w"), params.at("head.special.b"));
      return tape.reshape(r, {B});
    }
    case HeadKind::YesTokenLogit: {
      NodeId pooled = tape.mean_rows(h_last);  // [B, D]
      NodeId logits = affine(tape, pooled, params.at("head.yes.w"), params.at("head.yes.b"));
      // reward = the "yes" class logit; raw rather than the saturating
      // probability so the head can actually train at this scale
      return tape.reshape(tape.slice_lastdim(logits, 0, 1), {B});
    }
    case HeadKind::Hpqa:
      throw ConfigError("baseline_forward called with the progressive head kind");
  }
  throw Error("unreachable head kind");
}

NodeId head_forward(Tape& tape, const ParamBinding& params, const HeadConfig& head,
                    const BackboneConfig& config, const std::vector<NodeId>& hidden_states,
                    HpqaTrace* trace) {
  if (hidden_states.size() != static_cast<std::size_t>(config.layers) + 1)
    throw ShapeError("head_forward expects L+1 hidden states");
  if (head.kind == HeadKind::Hpqa)
    return hpqa_forward(tape, params, head, config, hidden_states, trace);
  return baseline_forward(tape, params, head, config, hidden_states);
}

}  // namespace rmlab
