#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "rmlab/corpus.hpp"
#include "rmlab/tape.hpp"

namespace rmlab {

enum class LossKind { Bt, BtWt, Btt };
std::string loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);

struct LossConfig {
  LossKind kind = LossKind::BtWt;
  double bce_weight = 0.0;  // lambda; 0 disables the per-sample penalty
  double btt_tie_theta = 2.718281828459045;  // tie width; > 1
  double bt_margin = 0.0;  // optional hinge shift inside the win term
  void validate() const;   // throws ConfigError
};

// Scalar reference forms. All use the stable softplus branch; a saturated
// pair (|delta| ~ 50) yields a tiny but finite loss and gradient.
double bt_loss(double r_w, double r_l, double margin = 0.0);
double bt_wt_loss(double r_i, double r_j, PairRelation relation, double margin = 0.0);

// Three-outcome tie model: strengths e^r with tie width theta.
//   P(i wins) = e^{r_i} / (e^{r_i} + theta e^{r_j})
//   P(tie)    = (theta^2 - 1) e^{r_i + r_j}
//               / ((e^{r_i} + theta e^{r_j}) (theta e^{r_i} + e^{r_j}))
enum class BttOutcome { IWin, JWin, Tie };
double btt_loss(double r_i, double r_j, BttOutcome outcome, double theta);

double bce_penalty(double r, int label);  // label: pass = 1, fail = 0

// Tape forms; each takes scalar reward nodes and returns a scalar loss node.
NodeId bt_loss_node(Tape& tape, NodeId r_w, NodeId r_l, double margin = 0.0);
NodeId bt_wt_loss_node(Tape& tape, NodeId r_i, NodeId r_j, PairRelation relation,
                       double margin = 0.0);
NodeId btt_loss_node(Tape& tape, NodeId r_i, NodeId r_j, BttOutcome outcome, double theta);
NodeId bce_penalty_node(Tape& tape, NodeId r, int label);

// Mean per-pair loss over a batch, plus bce_weight times the mean per-sample
// penalty over the batch's unique samples (the rows of `rewards`) when
// bce_weight > 0. `index_of` maps sample ids to rows of the [B] rewards
// node; `labels` supplies pass/fail for the penalty and may be empty when
// bce_weight = 0. Tie pairs under the plain BT kind are a config error.
NodeId batch_loss(Tape& tape, const std::vector<const PreferencePair*>& pairs, NodeId rewards,
                  const std::unordered_map<std::string, int>& index_of,
                  const std::unordered_map<std::string, Verdict>& labels,
                  const LossConfig& config);

}  // namespace rmlab
