#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rmlab/backbone.hpp"
#include "rmlab/params.hpp"
#include "rmlab/tape.hpp"

namespace rmlab {

enum class HeadKind { Hpqa, LinearLastToken, SpecialToken, YesTokenLogit };
std::string head_kind_name(HeadKind k);
HeadKind head_kind_from_name(const std::string& name);

// Evenly spaced layer indices over [1, L], ending at L (for L=6, N=3:
// [2, 4, 6]).
std::vector<int> default_layer_indices(int layers, int count = 3);

struct HeadConfig {
  HeadKind kind = HeadKind::Hpqa;
  // Strictly increasing indices into the hidden-state list H_0..H_L.
  // Empty means "use the default spacing".
  std::vector<int> layer_indices;
  int attn_heads = 0;  // attention heads inside the adapter; 0 = backbone's

  std::vector<int> resolved_indices(int layers) const;
  int resolved_heads(const BackboneConfig& config) const;
  void validate(const BackboneConfig& config) const;  // throws ConfigError
};

// Deterministic initialization; parameter names are "head.*".
ParamStore init_head_params(const HeadConfig& head, const BackboneConfig& config,
                            std::uint64_t seed);

// Introspection record of one progressive-query forward pass.
struct HpqaTrace {
  int stage_count = 0;
  std::vector<int> stage_layers;  // hidden-state index consumed per stage
  int residual_layer = -1;        // hidden-state index of the residual branch
};

// Progressive-query reward: a learnable query attends to the hidden state of
// the first selected layer, the result re-attends at each subsequent
// selected layer, a second query attends to the final state, and a two-layer
// feed-forward head maps the summed vectors to a scalar. States are
// [B, S, D]; the result is [B] (one reward per batch row).
NodeId hpqa_forward(Tape& tape, const ParamBinding& params, const HeadConfig& head,
                    const BackboneConfig& config, const std::vector<NodeId>& hidden_states,
                    HpqaTrace* trace = nullptr);

// The three comparison heads: affine map of H_L's last position, affine map
// of the special-token position, or the "yes" logit of a 2-way classifier
// over mean-pooled H_L. Result is [B].
NodeId baseline_forward(Tape& tape, const ParamBinding& params, const HeadConfig& head,
                        const BackboneConfig& config, const std::vector<NodeId>& hidden_states);

// Dispatch on head.kind.
NodeId head_forward(Tape& tape, const ParamBinding& params, const HeadConfig& head,
                    const BackboneConfig& config, const std::vector<NodeId>& hidden_states,
                    HpqaTrace* trace = nullptr);

}  // namespace rmlab
