#include "rmlab/backbone.hpp"

#include <cmath>

#include "rmlab/rng.hpp"

namespace rmlab {

void BackboneConfig::validate() const {
  if (layers < 2) throw ConfigError("backbone.layers must be >= 2");
  if (model_dim < 1) throw ConfigError("backbone.model_dim must be >= 1");
  if (heads < 1 || model_dim % heads != 0)
    throw ConfigError("backbone.model_dim must be divisible by backbone.heads");
  if (seq_len < 3) throw ConfigError("backbone.seq_len must be >= 3 (prompt + shortcut + payload)");
  if (feature_dim < 1) throw ConfigError("backbone.feature_dim must be >= 1");
  if (ffn_mult < 1) throw ConfigError("backbone.ffn_mult must be >= 1");
}

namespace {

Tensor init_weight(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.normal(0.0, sd);
  return t;
}

std::string layer_prefix(int i) { return "backbone.layer" + std::to_string(i) + "."; }

}  // namespace

ParamStore init_backbone_params(const BackboneConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, "backbone_init"));
  const int D = config.model_dim;
  const int F = config.feature_dim;
  const int H = config.ffn_mult * D;

  ParamStore p;
  p.add("backbone.embed.w", init_weight({F, D}, F, rng));
  p.add("backbone.embed.b", Tensor::zeros({D}));
  // Positional rows carry real signal (they are the only thing that
  // distinguishes the special slot), so they get a full-scale init.
  p.add("backbone.pos", init_weight({config.eff_seq_len(), D}, D, rng));

  for (int i = 0; i < config.layers; ++i) {
    const std::string lp = layer_prefix(i);
    p.add(lp + "ln1.gain", Tensor::full({D}, 1.0));
    p.add(lp + "ln1.bias", Tensor::zeros({D}));
    p.add(lp + "attn.wq", init_weight({D, D}, D, rng));
    p.add(lp + "attn.bq", Tensor::zeros({D}));
    p.add(lp + "attn.wk", init_weight({D, D}, D, rng));
    p.add(lp + "attn.wv", init_weight({D, D}, D, rng));
    p.add(lp + "attn.bv", Tensor::zeros({D}));
    p.add(lp + "attn.wo", init_weight({D, D}, D, rng));
    p.add(lp + "attn.bo", Tensor::zeros({D}));
    p.add(lp + "ln2.gain", Tensor::full({D}, 1.0));
    p.add(lp + "ln2.bias", Tensor::zeros({D}));
    p.add(lp + "ffn.w1", init_weight({D, H}, D, rng));
    p.add(lp + "ffn.b1", Tensor::zeros({H}));
    p.add(lp + "ffn.w2", init_weight({H, D}, H, rng));
    p.add(lp + "ffn.b2", Tensor::zeros({D}));
  }
  return p;
}

bool is_backbone_param(const std::string& name) {
  return name.rfind("backbone.", 0) == 0;
}

Tensor embed_sample(const SyntheticSample& sample, const BackboneConfig& config) {
  std::vector<const SyntheticSample*> one = {&sample};
  Tensor batch = embed_batch(one, config);
  Tensor out = Tensor::zeros({config.eff_seq_len(), config.feature_dim});
  out.data = std::move(batch.data);
  return out;
}

Tensor embed_batch(const std::vector<const SyntheticSample*>& samples,
                   const BackboneConfig& config) {
  config.validate();
  if (samples.empty()) throw DataError("embed_batch of zero samples");
  const int S = config.eff_seq_len();
  const int F = config.feature_dim;
  const int payload = config.payload_tokens();
  const int B = static_cast<int>(samples.size());
  Tensor out = Tensor::zeros({B, S, F});

  for (int b = 0; b < B; ++b) {
    const SyntheticSample& sample = *samples[static_cast<std::size_t>(b)];
    if (static_cast<int>(sample.features.size()) != payload * F)
      throw DataError("sample " + sample.sample_id + " carries " +
                      std::to_string(sample.features.size()) + " feature values, config wants " +
                      std::to_string(payload * F));
    int row = 0;
    if (config.special_token) ++row;  // all-zero feature row; content comes from its pos row

    // Prompt token: hash embedding, stable across corpora and processes.
    Rng prompt_rng(derive_seed(fnv1a64(sample.prompt_id), "prompt_embed"));
    for (int d = 0; d < F; ++d) out.at(b, row, d) = 0.5 * prompt_rng.normal();
    ++row;

    // Shortcut token: +-1 pattern.
    const double bit = sample.shortcut ? 1.0 : -1.0;
    for (int d = 0; d < F; ++d) out.at(b, row, d) = bit;
    ++row;

    for (int t = 0; t < payload; ++t)
      for (int d = 0; d < F; ++d)
        out.at(b, row + t, d) = sample.features[static_cast<std::size_t>(t * F + d)];
  }
  return out;
}

namespace {

MhaWeights layer_attn(const ParamBinding& p, const std::string& lp) {
  return MhaWeights{p.at(lp + "attn.wq"), p.at(lp + "attn.bq"), p.at(lp + "attn.wk"),
                    p.at(lp + "attn.wv"), p.at(lp + "attn.bv"), p.at(lp + "attn.wo"),
                    p.at(lp + "attn.bo")};
}

}  // namespace

std::vector<NodeId> encode(Tape& tape, const ParamBinding& params, const BackboneConfig& config,
                           const Tensor& tokens) {
  config.validate();
  Tensor input = tokens;
  if (input.dim() == 2) input.shape = {1, input.shape[0], input.shape[1]};
  require_shape(input.dim() == 3, "encode input must be [B,S,F] or [S,F], got " +
                                      shape_str(tokens.shape));
  require_shape(input.shape[1] == config.eff_seq_len() && input.shape[2] == config.feature_dim,
                "encode input " + shape_str(tokens.shape) + " does not match config [*, " +
                    std::to_string(config.eff_seq_len()) + ", " +
                    std::to_string(config.feature_dim) + "]");

  NodeId x = affine(tape, tape.constant(std::move(input)), params.at("backbone.embed.w"),
                    params.at("backbone.embed.b"));
  x = tape.add_suffix(x, params.at("backbone.pos"));

  std::vector<NodeId> states;
  states.reserve(static_cast<std::size_t>(config.layers) + 1);
  states.push_back(x);

  for (int i = 0; i < config.layers; ++i) {
    const std::string lp = layer_prefix(i);
    NodeId normed =
        tape.layer_norm(x, params.at(lp + "ln1.gain"), params.at(lp + "ln1.bias"));
    NodeId attn =
        multi_head_attention(tape, normed, normed, normed, layer_attn(params, lp), config.heads);
    x = tape.add(x, attn);

    NodeId normed2 =
        tape.layer_norm(x, params.at(lp + "ln2.gain"), params.at(lp + "ln2.bias"));
    NodeId hidden = tape.gelu(affine(tape, normed2, params.at(lp + "ffn.w1"),
                                     params.at(lp + "ffn.b1")));
    NodeId ffn = affine(tape, hidden, params.at(lp + "ffn.w2"), params.at(lp + "ffn.b2"));
    x = tape.add(x, ffn);
    states.push_back(x);
  }
  return states;
}

}  // namespace rmlab
