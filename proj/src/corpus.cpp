#include "rmlab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "rmlab/rng.hpp"

namespace rmlab {

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::IdEval: return "id_eval";
    case Split::OodEval: return "ood_eval";
  }
  throw Error("unreachable split value");
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "id_eval") return Split::IdEval;
  if (name == "ood_eval") return Split::OodEval;
  throw DataError("unknown split: " + name);
}

std::string verdict_name(Verdict v) { return v == Verdict::Pass ? "Pass" : "Fail"; }

Verdict verdict_from_name(const std::string& name) {
  if (name == "Pass") return Verdict::Pass;
  if (name == "Fail") return Verdict::Fail;
  throw DataError("unknown verdict: " + name);
}

std::string relation_name(PairRelation r) { return r == PairRelation::Win ? "Win" : "Tie"; }

PairRelation relation_from_name(const std::string& name) {
  if (name == "Win") return PairRelation::Win;
  if (name == "Tie") return PairRelation::Tie;
  throw DataError("unknown relation: " + name);
}

std::string pairing_name(Pairing p) { return p == Pairing::InPrompt ? "InPrompt" : "CrossPrompt"; }

Pairing pairing_from_name(const std::string& name) {
  if (name == "InPrompt") return Pairing::InPrompt;
  if (name == "CrossPrompt") return Pairing::CrossPrompt;
  throw DataError("unknown pairing: " + name);
}

std::string pair_strategy_name(PairStrategy s) {
  switch (s) {
    case PairStrategy::InPrompt: return "in_prompt";
    case PairStrategy::CrossPrompt: return "cross_prompt";
    case PairStrategy::Hybrid: return "hybrid";
  }
  throw Error("unreachable strategy value");
}

PairStrategy pair_strategy_from_name(const std::string& name) {
  if (name == "in_prompt") return PairStrategy::InPrompt;
  if (name == "cross_prompt") return PairStrategy::CrossPrompt;
  if (name == "hybrid") return PairStrategy::Hybrid;
  throw ConfigError("unknown pair strategy: " + name);
}

void CorpusConfig::validate() const {
  if (prompts < 1) throw ConfigError("corpus.prompts must be >= 1");
  if (samples_per_prompt < 1) throw ConfigError("corpus.samples_per_prompt must be >= 1");
  if (single_prompt_fraction < 0.0 || single_prompt_fraction > 1.0)
    throw ConfigError("corpus.single_prompt_fraction must be in [0,1]");
  if (annotators < 1) throw ConfigError("corpus.annotators must be >= 1");
  if (annotator_noise < 0.0) throw ConfigError("corpus.annotator_noise must be >= 0");
  if (boundary_margin < 0.0 || boundary_margin >= 3.0)
    throw ConfigError("corpus.boundary_margin must be in [0,3)");
  if (feature_noise < 0.0) throw ConfigError("corpus.feature_noise must be >= 0");
  if (shortcut_rho_train < 0.0 || shortcut_rho_train > 1.0)
    throw ConfigError("corpus.shortcut_rho_train must be in [0,1]");
  if (shortcut_rho_ood < 0.0 || shortcut_rho_ood > 1.0)
    throw ConfigError("corpus.shortcut_rho_ood must be in [0,1]");
  if (train_fraction < 0.0 || id_eval_fraction < 0.0 ||
      train_fraction + id_eval_fraction > 1.0)
    throw ConfigError("corpus split fractions must be non-negative and sum to <= 1");
  if (pass_compression <= 0.0 || pass_compression > 1.0)
    throw ConfigError("corpus.pass_compression must be in (0,1]");
  if (payload_tokens < 1) throw ConfigError("corpus.payload_tokens must be >= 1");
  if (feature_dim < 1) throw ConfigError("corpus.feature_dim must be >= 1");
}

namespace {

std::string prompt_name(int p) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "p%04d", p);
  return buf;
}

std::string sample_name(const std::string& prompt, int s) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_v%02d", s);
  return prompt + buf;
}

}  // namespace

std::vector<std::vector<double>> feature_directions(const CorpusConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "feature_dirs"));
  std::vector<std::vector<double>> dirs(static_cast<std::size_t>(cfg.payload_tokens));
  for (auto& dir : dirs) {
    dir.resize(static_cast<std::size_t>(cfg.feature_dim));
    double norm2 = 0.0;
    for (double& v : dir) {
      v = rng.normal();
      norm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : dir) v *= inv;
  }
  return dirs;
}

double visible_quality(double latent_quality, const CorpusConfig& config) {
  if (config.graded_pass || latent_quality < config.pass_threshold) return latent_quality;
  return config.pass_threshold +
         (latent_quality - config.pass_threshold) * config.pass_compression;
}

std::vector<double> synthesize_features(double vis_quality,
                                        const std::vector<std::vector<double>>& dirs,
                                        const CorpusConfig& config, Rng& rng) {
  std::vector<double> features(
      static_cast<std::size_t>(config.payload_tokens * config.feature_dim));
  for (int t = 0; t < config.payload_tokens; ++t)
    for (int d = 0; d < config.feature_dim; ++d)
      features[static_cast<std::size_t>(t * config.feature_dim + d)] =
          vis_quality * dirs[static_cast<std::size_t>(t)][static_cast<std::size_t>(d)] +
          config.feature_noise * rng.normal();
  return features;
}

GeneratedCorpus generate_corpus(const CorpusConfig& config) {
  config.validate();
  const auto dirs = feature_directions(config);
  const int train_cut = static_cast<int>(std::lround(config.prompts * config.train_fraction));
  const int id_cut = static_cast<int>(
      std::lround(config.prompts * (config.train_fraction + config.id_eval_fraction)));

  GeneratedCorpus out;
  for (int p = 0; p < config.prompts; ++p) {
    const std::string prompt = prompt_name(p);
    Rng rng(derive_seed(config.seed, "prompt:" + prompt));
    const Split split = p < train_cut ? Split::Train
                        : p < id_cut  ? Split::IdEval
                                      : Split::OodEval;
    const double rho =
        split == Split::OodEval ? config.shortcut_rho_ood : config.shortcut_rho_train;
    const int count =
        rng.bernoulli(config.single_prompt_fraction) ? 1 : config.samples_per_prompt;

    for (int s = 0; s < count; ++s) {
      SyntheticSample sample;
      sample.sample_id = sample_name(prompt, s);
      sample.prompt_id = prompt;
      sample.dimension = config.dimension;
      sample.split = split;

      // Latent quality, kept clear of the decision boundary.
      double q = rng.normal();
      while (std::fabs(q - config.pass_threshold) < config.boundary_margin) q = rng.normal();
      sample.latent_quality = q;
      const bool pass = q >= config.pass_threshold;

      const double q_vis = visible_quality(q, config);

      // Shortcut bit with phi correlation rho against the pass label
      // (agreement probability (1+rho)/2; exact for the balanced tau=0 case).
      const bool agree = rng.bernoulli(0.5 * (1.0 + rho));
      sample.shortcut = (pass == agree) ? 1 : 0;

      sample.features = synthesize_features(q_vis, dirs, config, rng);

      out.labels.emplace(sample.sample_id, pass ? Verdict::Pass : Verdict::Fail);
      out.samples.push_back(std::move(sample));
    }
  }
  return out;
}

std::vector<AnnotationRecord> simulate_annotators(const std::vector<SyntheticSample>& samples,
                                                  const CorpusConfig& config, int k,
                                                  double noise, std::uint64_t seed) {
  if (k < 1) throw ConfigError("annotator count must be >= 1");
  if (noise < 0.0) throw ConfigError("annotator noise must be >= 0");
  Rng rng(derive_seed(seed, "annotations"));
  std::vector<AnnotationRecord> out;
  out.reserve(samples.size() * static_cast<std::size_t>(k));
  for (const auto& sample : samples) {
    for (int a = 0; a < k; ++a) {
      AnnotationRecord rec;
      rec.sample_id = sample.sample_id;
      rec.annotator_id = "a" + std::to_string(a);
      rec.dimension = sample.dimension;
      const double seen = sample.latent_quality + noise * rng.normal();
      rec.verdict = seen >= config.pass_threshold ? Verdict::Pass : Verdict::Fail;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::unordered_map<std::string, Verdict> consensus_labels(
    const std::vector<SyntheticSample>& samples,
    const std::vector<AnnotationRecord>& annotations, const CorpusConfig& config) {
  std::unordered_map<std::string, std::pair<int, int>> votes;  // id -> (pass, total)
  for (const auto& rec : annotations) {
    auto& v = votes[rec.sample_id];
    if (rec.verdict == Verdict::Pass) ++v.first;
    ++v.second;
  }
  std::unordered_map<std::string, Verdict> out;
  for (const auto& sample : samples) {
    const bool threshold_pass = sample.latent_quality >= config.pass_threshold;
    Verdict label = threshold_pass ? Verdict::Pass : Verdict::Fail;
    auto it = votes.find(sample.sample_id);
    // Majority vote only once at least three verdicts exist; an exact tie
    // falls back to the threshold label.
    if (it != votes.end() && it->second.second >= 3) {
      const int pass = it->second.first;
      const int fail = it->second.second - pass;
      if (pass > fail) label = Verdict::Pass;
      else if (fail > pass) label = Verdict::Fail;
    }
    out.emplace(sample.sample_id, label);
  }
  return out;
}

namespace {

struct Member {
  const SyntheticSample* sample;
};

// Ordered candidate pairs (winner, loser) or canonical unordered ties,
// stored as index pairs into a member list.
using IndexPair = std::pair<int, int>;

std::vector<IndexPair> ordered_candidates(const std::vector<int>& winners,
                                          const std::vector<int>& losers,
                                          const std::vector<const SyntheticSample*>& members,
                                          bool same_prompt_only) {
  std::vector<IndexPair> out;
  for (int w : winners)
    for (int l : losers) {
      if (same_prompt_only &&
          members[static_cast<std::size_t>(w)]->prompt_id !=
              members[static_cast<std::size_t>(l)]->prompt_id)
        continue;
      out.emplace_back(w, l);
    }
  return out;
}

std::vector<IndexPair> unordered_candidates(const std::vector<int>& group,
                                            const std::vector<const SyntheticSample*>& members,
                                            bool same_prompt_only) {
  std::vector<IndexPair> out;
  for (std::size_t a = 0; a < group.size(); ++a)
    for (std::size_t b = a + 1; b < group.size(); ++b) {
      const int i = group[a], j = group[b];
      if (same_prompt_only &&
          members[static_cast<std::size_t>(i)]->prompt_id !=
              members[static_cast<std::size_t>(j)]->prompt_id)
        continue;
      out.emplace_back(i, j);
    }
  return out;
}

// Draws `want` pairs for one relation under the given strategy. Hybrid
// splits the request between the in-prompt and unrestricted samplers and
// deduplicates the union, topping up from the unrestricted pool if the
// in-prompt pool runs dry.
std::vector<IndexPair> draw_pairs(const std::vector<IndexPair>& in_prompt_pool,
                                  const std::vector<IndexPair>& full_pool, PairStrategy strategy,
                                  int want, Rng& rng) {
  auto take = [&rng](std::vector<IndexPair> pool, int n) {
    rng.shuffle(pool);
    if (n >= 0 && static_cast<std::size_t>(n) < pool.size()) pool.resize(static_cast<std::size_t>(n));
    return pool;
  };
  if (want == 0) return {};
  if (strategy == PairStrategy::InPrompt) return take(in_prompt_pool, want);
  if (strategy == PairStrategy::CrossPrompt) return take(full_pool, want);

  if (want == PairBuildSpec::kExhaustive) return take(full_pool, want);
  const int half_in = (want + 1) / 2;
  auto picked = take(in_prompt_pool, half_in);
  std::unordered_set<long long> seen;
  const long long stride = 1LL << 32;
  for (const auto& pr : picked) seen.insert(pr.first * stride + pr.second);
  auto rest = take(full_pool, PairBuildSpec::kExhaustive);
  for (const auto& pr : rest) {
    if (static_cast<int>(picked.size()) >= want) break;
    if (seen.insert(pr.first * stride + pr.second).second) picked.push_back(pr);
  }
  return picked;
}

}  // namespace

std::vector<PreferencePair> build_pairs(const std::vector<SyntheticSample>& samples,
                                        const std::unordered_map<std::string, Verdict>& labels,
                                        Split split, const PairBuildSpec& spec) {
  std::vector<const SyntheticSample*> members;
  for (const auto& s : samples)
    if (s.split == split) members.push_back(&s);
  std::sort(members.begin(), members.end(),
            [](const SyntheticSample* a, const SyntheticSample* b) {
              return a->sample_id < b->sample_id;
            });

  std::vector<int> winners, losers;
  for (std::size_t i = 0; i < members.size(); ++i) {
    auto it = labels.find(members[i]->sample_id);
    if (it == labels.end())
      throw DataError("no consensus label for sample " + members[i]->sample_id);
    (it->second == Verdict::Pass ? winners : losers).push_back(static_cast<int>(i));
  }

  const bool want_wl = spec.n_win_lose != 0;
  const bool want_wt = spec.n_win_tie != 0;
  const bool want_lt = spec.n_lose_tie != 0;
  if (want_wl && (winners.empty() || losers.empty()))
    throw DataError("win-lose pairs need at least one Pass and one Fail in split " +
                    split_name(split));
  if (want_wt && winners.size() < 2)
    throw DataError("win-tie pairs need at least two Pass samples in split " +
                    split_name(split));
  if (want_lt && losers.size() < 2)
    throw DataError("lose-tie pairs need at least two Fail samples in split " +
                    split_name(split));

  Rng rng(derive_seed(spec.seed, "pairs:" + split_name(split)));
  std::vector<PreferencePair> out;

  auto emit = [&members, &out](const std::vector<IndexPair>& picked, PairRelation relation) {
    for (const auto& pr : picked) {
      const SyntheticSample* a = members[static_cast<std::size_t>(pr.first)];
      const SyntheticSample* b = members[static_cast<std::size_t>(pr.second)];
      if (relation == PairRelation::Tie && b->sample_id < a->sample_id) std::swap(a, b);
      PreferencePair pair;
      pair.id_i = a->sample_id;
      pair.id_j = b->sample_id;
      pair.relation = relation;
      pair.pairing = a->prompt_id == b->prompt_id ? Pairing::InPrompt : Pairing::CrossPrompt;
      out.push_back(std::move(pair));
    }
  };

  if (want_wl) {
    auto in_pool = ordered_candidates(winners, losers, members, true);
    auto full_pool = ordered_candidates(winners, losers, members, false);
    emit(draw_pairs(in_pool, full_pool, spec.strategy, spec.n_win_lose, rng), PairRelation::Win);
  }
  if (want_wt) {
    auto in_pool = unordered_candidates(winners, members, true);
    auto full_pool = unordered_candidates(winners, members, false);
    emit(draw_pairs(in_pool, full_pool, spec.strategy, spec.n_win_tie, rng), PairRelation::Tie);
  }
  if (want_lt) {
    auto in_pool = unordered_candidates(losers, members, true);
    auto full_pool = unordered_candidates(losers, members, false);
    emit(draw_pairs(in_pool, full_pool, spec.strategy, spec.n_lose_tie, rng), PairRelation::Tie);
  }
  return out;
}

std::unordered_map<std::string, const SyntheticSample*> index_samples(
    const std::vector<SyntheticSample>& samples) {
  std::unordered_map<std::string, const SyntheticSample*> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!out.emplace(s.sample_id, &s).second)
      throw DataError("duplicate sample_id: " + s.sample_id);
  }
  return out;
}

}  // namespace rmlab
