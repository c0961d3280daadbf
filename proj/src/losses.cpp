#include "rmlab/losses.hpp"

#include <cmath>

#include "rmlab/error.hpp"

namespace rmlab {

std::string loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::Bt: return "bt";
    case LossKind::BtWt: return "bt_wt";
    case LossKind::Btt: return "btt";
  }
  throw Error("unreachable loss kind");
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "bt") return LossKind::Bt;
  if (name == "bt_wt") return LossKind::BtWt;
  if (name == "btt") return LossKind::Btt;
  throw ConfigError("unknown loss kind: " + name);
}

void LossConfig::validate() const {
  if (bce_weight < 0.0) throw ConfigError("loss.bce_weight must be >= 0");
  if (btt_tie_theta <= 1.0) throw ConfigError("loss.btt_tie_theta must be > 1");
  if (bt_margin < 0.0) throw ConfigError("loss.bt_margin must be >= 0");
}

namespace {

// log(1 + e^x) without overflow on either tail.
double softplus_ref(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite reward fed to ") + what);
}

}  // namespace

double bt_loss(double r_w, double r_l, double margin) {
  require_finite(r_w, "bt_loss");
  require_finite(r_l, "bt_loss");
  // -log sigma(delta - m) = softplus(m - delta)
  return softplus_ref(margin - (r_w - r_l));
}

double bt_wt_loss(double r_i, double r_j, PairRelation relation, double margin) {
  if (relation == PairRelation::Win) return bt_loss(r_i, r_j, margin);
  require_finite(r_i, "bt_wt_loss");
  require_finite(r_j, "bt_wt_loss");
  const double delta = r_i - r_j;
  return 0.5 * softplus_ref(-delta) + 0.5 * softplus_ref(delta);
}

double btt_loss(double r_i, double r_j, BttOutcome outcome, double theta) {
  if (theta <= 1.0) throw ConfigError("btt tie width theta must be > 1");
  require_finite(r_i, "btt_loss");
  require_finite(r_j, "btt_loss");
  const double delta = r_i - r_j;
  const double log_theta = std::log(theta);
  switch (outcome) {
    // -log P(i wins) = log(e^{r_i} + theta e^{r_j}) - r_i
    case BttOutcome::IWin: return softplus_ref(log_theta - delta);
    case BttOutcome::JWin: return softplus_ref(log_theta + delta);
    // -log P(tie); both normalizer terms appear, one per ordering.
    case BttOutcome::Tie:
      return softplus_ref(log_theta - delta) + softplus_ref(log_theta + delta) -
             std::log(theta * theta - 1.0);
  }
  throw Error("unreachable btt outcome");
}

double bce_penalty(double r, int label) {
  require_finite(r, "bce_penalty");
  return label != 0 ? softplus_ref(-r) : softplus_ref(r);
}

namespace {

// softplus(c - delta) as a tape node; covers every win/tie term above.
NodeId softplus_shift(Tape& tape, NodeId delta, double c, bool negate_delta) {
  NodeId d = negate_delta ? tape.neg(delta) : delta;
  return tape.softplus(tape.add_scalar(d, c));
}

}  // namespace

NodeId bt_loss_node(Tape& tape, NodeId r_w, NodeId r_l, double margin) {
  NodeId delta = tape.sub(r_w, r_l);
  return softplus_shift(tape, delta, margin, /*negate_delta=*/true);
}

NodeId bt_wt_loss_node(Tape& tape, NodeId r_i, NodeId r_j, PairRelation relation, double margin) {
  if (relation == PairRelation::Win) return bt_loss_node(tape, r_i, r_j, margin);
  NodeId delta = tape.sub(r_i, r_j);
  NodeId down = softplus_shift(tape, delta, 0.0, true);
  NodeId up = softplus_shift(tape, delta, 0.0, false);
  return tape.scale(tape.add(down, up), 0.5);
}

NodeId btt_loss_node(Tape& tape, NodeId r_i, NodeId r_j, BttOutcome outcome, double theta) {
  if (theta <= 1.0) throw ConfigError("btt tie width theta must be > 1");
  const double log_theta = std::log(theta);
  NodeId delta = tape.sub(r_i, r_j);
  switch (outcome) {
    case BttOutcome::IWin: return softplus_shift(tape, delta, log_theta, true);
    case BttOutcome::JWin: return softplus_shift(tape, delta, log_theta, false);
    case BttOutcome::Tie: {
      NodeId lose_i = softplus_shift(tape, delta, log_theta, true);
      NodeId lose_j = softplus_shift(tape, delta, log_theta, false);
      return tape.add_scalar(tape.add(lose_i, lose_j), -std::log(theta * theta - 1.0));
    }
  }
  throw Error("unreachable btt outcome");
}

NodeId bce_penalty_node(Tape& tape, NodeId r, int label) {
  return label != 0 ? tape.softplus(tape.neg(r)) : tape.softplus(r);
}

NodeId batch_loss(Tape& tape, const std::vector<const PreferencePair*>& pairs, NodeId rewards,
                  const std::unordered_map<std::string, int>& index_of,
                  const std::unordered_map<std::string, Verdict>& labels,
                  const LossConfig& config) {
  config.validate();
  if (pairs.empty()) throw DataError("batch_loss over an empty pair batch");

  auto reward_at = [&](const std::string& id) {
    auto it = index_of.find(id);
    if (it == index_of.end()) throw DataError("pair references unknown sample " + id);
    return tape.element(rewards, it->second);
  };

  std::vector<NodeId> terms;
  terms.reserve(pairs.size());
  for (const PreferencePair* pair : pairs) {
    NodeId r_i = reward_at(pair->id_i);
    NodeId r_j = reward_at(pair->id_j);
    switch (config.kind) {
      case LossKind::Bt:
        if (pair->relation == PairRelation::Tie)
          throw ConfigError("bt loss cannot consume tie pairs; use bt_wt or btt");
        terms.push_back(bt_loss_node(tape, r_i, r_j, config.bt_margin));
        break;
      case LossKind::BtWt:
        terms.push_back(bt_wt_loss_node(tape, r_i, r_j, pair->relation, config.bt_margin));
        break;
      case LossKind::Btt:
        terms.push_back(btt_loss_node(
            tape, r_i, r_j,
            pair->relation == PairRelation::Win ? BttOutcome::IWin : BttOutcome::Tie,
            config.btt_tie_theta));
        break;
    }
  }
  NodeId loss = tape.scale(tape.sum_nodes(terms), 1.0 / static_cast<double>(terms.size()));

  if (config.bce_weight > 0.0) {
    const int rows = tape.value(rewards).shape[0];
    // Penalize rows in index order so the reduction is deterministic.
    std::vector<std::string> id_of(static_cast<std::size_t>(rows));
    for (const auto& entry : index_of) {
      if (entry.second < 0 || entry.second >= rows)
        throw DataError("reward index for " + entry.first + " out of range");
      id_of[static_cast<std::size_t>(entry.second)] = entry.first;
    }
    std::vector<NodeId> penalties;
    penalties.reserve(static_cast<std::size_t>(rows));
    for (int row = 0; row < rows; ++row) {
      const std::string& id = id_of[static_cast<std::size_t>(row)];
      if (id.empty()) throw DataError("reward row " + std::to_string(row) + " has no sample id");
      auto label = labels.find(id);
      if (label == labels.end()) throw DataError("no pass/fail label for sample " + id);
      penalties.push_back(bce_penalty_node(tape, tape.element(rewards, row),
                                           label->second == Verdict::Pass ? 1 : 0));
    }
    NodeId mean_penalty =
        tape.scale(tape.sum_nodes(penalties), 1.0 / static_cast<double>(penalties.size()));
    loss = tape.add(loss, tape.scale(mean_penalty, config.bce_weight));
  }
  return loss;
}

}  // namespace rmlab
