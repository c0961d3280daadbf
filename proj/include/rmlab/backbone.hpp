#pragma once

#include <cstdint>
#include <vector>

#include "rmlab/corpus.hpp"
#include "rmlab/params.hpp"
#include "rmlab/tape.hpp"

namespace rmlab {

// Small transformer-style encoder. Token layout per sample:
//   [special slot (optional)] [prompt token] [shortcut token] [payload tokens]
// The special slot is an all-zero feature row whose learnable content lives
// in its positional-embedding row.
struct BackboneConfig {
  int layers = 6;      // L
  int model_dim = 32;  // D
  int heads = 4;
  int seq_len = 16;  // tokens per sample, excluding the special slot
  int feature_dim = 8;
  int ffn_mult = 4;
  bool special_token = false;

  int eff_seq_len() const { return seq_len + (special_token ? 1 : 0); }
  int payload_tokens() const { return seq_len - 2; }
  void validate() const;  // throws ConfigError
};

// Deterministic initialization; parameter names are "backbone.*".
ParamStore init_backbone_params(const BackboneConfig& config, std::uint64_t seed);

bool is_backbone_param(const std::string& name);

// Maps one sample to its [S_eff, F] token matrix. Pure function of
// (sample, config): the prompt token is a hash embedding of prompt_id, the
// shortcut token is a +-1 pattern, payload rows come straight from
// sample.features.
Tensor embed_sample(const SyntheticSample& sample, const BackboneConfig& config);

// Stacks samples into a [B, S_eff, F] batch.
Tensor embed_batch(const std::vector<const SyntheticSample*>& samples,
                   const BackboneConfig& config);

// Runs the encoder on a [B, S_eff, F] token batch (a [S_eff, F] matrix is
// accepted as batch size 1) and returns the L+1 hidden states H_0 ... H_L,
// each [B, S_eff, D].
std::vector<NodeId> encode(Tape& tape, const ParamBinding& params, const BackboneConfig& config,
                           const Tensor& tokens);

}  // namespace rmlab
