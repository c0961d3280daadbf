#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "rmlab/corpus.hpp"
#include "rmlab/losses.hpp"
#include "rmlab/metrics.hpp"
#include "rmlab/model.hpp"

namespace rmlab {

struct TrainConfig {
  BackboneConfig backbone;
  HeadConfig head;
  LossConfig loss;
  double learning_rate = 1e-3;
  int epochs = 3;
  int batch_pairs = 32;      // pairs per micro-batch
  int grad_accum_steps = 1;  // micro-batches folded into one optimizer step
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.01;     // decoupled, applied once per step
  double warmup_fraction = 0.05;  // linear warmup, then linear decay
  std::uint64_t seed = 1;
  bool freeze_backbone = false;
  int eval_every = 0;  // optimizer steps between extra eval ticks; 0 = per epoch only

  void validate() const;  // throws ConfigError
};

// Corpus + labels + per-split preference pairs, the trainer's working set.
struct Dataset {
  std::vector<SyntheticSample> samples;
  std::unordered_map<std::string, Verdict> labels;
  std::vector<PreferencePair> train_pairs;
  std::vector<PreferencePair> id_eval_pairs;
  std::vector<PreferencePair> ood_eval_pairs;
};

// Pairs every split of a generated corpus with one spec; labels are the
// generator's noiseless threshold labels.
Dataset build_dataset(const GeneratedCorpus& corpus, const PairBuildSpec& spec);

struct EvalTick {
  int step = 0;
  EvalReport report;
};

struct TrainHistory {
  std::vector<double> step_loss;  // one entry per optimizer step
  std::vector<EvalTick> evals;
  int best_step = -1;
  double best_accuracy_id = -1.0;

  std::string loss_csv() const;  // "step,loss" rows
};

struct TrainResult {
  RewardModel model;  // final parameters
  RewardModel best;   // best-by-ID-accuracy checkpoint
  TrainHistory history;
};

// Deterministic full training run. Throws NumericError naming the step if
// the loss leaves the finite range.
TrainResult train(const TrainConfig& config, const Dataset& dataset);

// Split-level statistics for one model; throws DataError on an empty split.
struct SplitEval {
  double accuracy = 0.0;
  double margin = 0.0;
  ClusterStats clustering;
  double positive_score_variance = 0.0;
};

SplitEval evaluate_split(const RewardModel& model, const Dataset& dataset, Split split);

// Both eval splits folded into the flat report (clustering and positive
// variance come from the id split).
EvalReport evaluate(const RewardModel& model, const Dataset& dataset);

// Loss-ablation table: each seed builds one corpus + pair pool shared by
// every variant; a variant using the plain pairwise kind drops tie pairs.
struct LossVariant {
  std::string name;
  LossConfig loss;
};

struct CompareCell {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // failed cells stay in the table
  EvalReport report;
};

struct CompareRow {
  std::string variant;
  std::vector<CompareCell> cells;
  double acc_id_mean = 0.0, acc_id_std = 0.0;
  double acc_ood_mean = 0.0, acc_ood_std = 0.0;
  double margin_id_mean = 0.0, margin_id_std = 0.0;
  double pos_variance_mean = 0.0, pos_variance_std = 0.0;
  double mode_mass_mean = 0.0;
};

std::vector<CompareRow> compare_losses(const TrainConfig& base, const CorpusConfig& corpus,
                                       const PairBuildSpec& pair_spec,
                                       const std::vector<LossVariant>& variants,
                                       const std::vector<std::uint64_t>& seeds);

std::string compare_csv(const std::vector<CompareRow>& rows);

}  // namespace rmlab
