#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "rmlab/error.hpp"
#include "rmlab/rng.hpp"

namespace rmlab {

enum class Split { Train, IdEval, OodEval };
std::string split_name(Split s);
Split split_from_name(const std::string& name);

enum class Verdict { Pass, Fail };
std::string verdict_name(Verdict v);
Verdict verdict_from_name(const std::string& name);

enum class PairRelation { Win, Tie };
std::string relation_name(PairRelation r);
PairRelation relation_from_name(const std::string& name);

// Provenance tag on an emitted pair: whether its two members share a prompt.
enum class Pairing { InPrompt, CrossPrompt };
std::string pairing_name(Pairing p);
Pairing pairing_from_name(const std::string& name);

// One synthetic "video": a latent quality scalar drives both the feature
// payload and the ground-truth label; an independent shortcut bit is
// correlated with the label at a configurable strength.
struct SyntheticSample {
  std::string sample_id;
  std::string prompt_id;
  std::string dimension;
  double latent_quality = 0.0;
  int shortcut = 0;  // 0 or 1
  std::vector<double> features;  // payload_tokens * feature_dim, row-major
  Split split = Split::Train;
  std::string extra;  // unknown JSONL fields, kept as a JSON object dump
};

struct AnnotationRecord {
  std::string sample_id;
  std::string annotator_id;
  std::string dimension;
  Verdict verdict = Verdict::Fail;
  std::string extra;
};

struct PreferencePair {
  std::string id_i;
  std::string id_j;
  PairRelation relation = PairRelation::Win;
  Pairing pairing = Pairing::CrossPrompt;
  std::string extra;
};

struct CorpusConfig {
  int prompts = 200;
  int samples_per_prompt = 10;
  // Fraction of prompts truncated to a single sample; exercises the
  // cross-prompt data-utilization case.
  double single_prompt_fraction = 0.0;
  std::string dimension = "visual_quality";
  double pass_threshold = 0.0;  // tau on latent quality
  int annotators = 3;
  double annotator_noise = 0.1;
  // Latent quality is resampled until it clears tau by at least this margin,
  // which keeps the two classes separable by construction.
  double boundary_margin = 0.25;
  double feature_noise = 0.5;
  // Phi correlation between the shortcut bit and the pass label.
  double shortcut_rho_train = 0.9;
  double shortcut_rho_ood = 0.0;
  double train_fraction = 0.70;
  double id_eval_fraction = 0.15;  // remainder is ood_eval
  // When false, visible quality is compressed to a plateau above tau, so
  // Pass samples genuinely look alike (the tie-suitability construction).
  // When true, quality stays fully graded above tau.
  bool graded_pass = false;
  double pass_compression = 0.15;
  int payload_tokens = 14;
  int feature_dim = 8;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

struct GeneratedCorpus {
  std::vector<SyntheticSample> samples;
  // Noise-free threshold labels (q >= tau), keyed by sample_id.
  std::unordered_map<std::string, Verdict> labels;
};

// Pure function of the config (including its seed).
GeneratedCorpus generate_corpus(const CorpusConfig& config);

// The shared feature model, split out so the policy simulator emits samples
// from exactly the family the generator draws from.
//
// Unit feature direction per payload token; a pure function of the corpus
// seed.
std::vector<std::vector<double>> feature_directions(const CorpusConfig& config);

// Visible quality: Pass samples sit on a compressed plateau unless graded
// mode is on, so ties among Pass members are true near-equals.
double visible_quality(double latent_quality, const CorpusConfig& config);

// Payload rows for one sample: visible quality along each token direction
// plus isotropic noise.
std::vector<double> synthesize_features(double vis_quality,
                                        const std::vector<std::vector<double>>& dirs,
                                        const CorpusConfig& config, Rng& rng);

// Each annotator votes (q + personal noise >= tau) per sample, with an
// independent draw per (annotator, sample). noise is the standard deviation
// of the perturbation; zero noise yields unanimous verdicts.
std::vector<AnnotationRecord> simulate_annotators(const std::vector<SyntheticSample>& samples,
                                                  const CorpusConfig& config, int k,
                                                  double noise, std::uint64_t seed);

// Majority vote over the annotations when every sample has >= 3 verdicts;
// otherwise (or on an exact tie) the noise-free threshold label.
std::unordered_map<std::string, Verdict> consensus_labels(
    const std::vector<SyntheticSample>& samples,
    const std::vector<AnnotationRecord>& annotations, const CorpusConfig& config);

enum class PairStrategy { InPrompt, CrossPrompt, Hybrid };
std::string pair_strategy_name(PairStrategy s);
PairStrategy pair_strategy_from_name(const std::string& name);

struct PairBuildSpec {
  PairStrategy strategy = PairStrategy::Hybrid;
  // Requested counts; sampling is without replacement up to availability.
  // kExhaustive emits every candidate pair.
  int n_win_lose = 3500;
  int n_win_tie = 1500;
  int n_lose_tie = 0;  // only meaningful for tie-aware training variants
  std::uint64_t seed = 1;

  static constexpr int kExhaustive = -1;
};

// Builds preference pairs among the samples of one split. Win pairs order
// the Pass member first; tie pairs are canonicalized (id_i < id_j) and never
// duplicated. The pairing tag records whether the members share a prompt.
std::vector<PreferencePair> build_pairs(const std::vector<SyntheticSample>& samples,
                                        const std::unordered_map<std::string, Verdict>& labels,
                                        Split split, const PairBuildSpec& spec);

// Convenience index over samples by id.
std::unordered_map<std::string, const SyntheticSample*> index_samples(
    const std::vector<SyntheticSample>& samples);

}  // namespace rmlab
