#include "rmlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rmlab/rng.hpp"

namespace rmlab {

void TrainConfig::validate() const {
  backbone.validate();
  head.validate(backbone);
  loss.validate();
  if (learning_rate <= 0.0) throw ConfigError("train.learning_rate must be > 0");
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (batch_pairs < 1) throw ConfigError("train.batch_pairs must be >= 1");
  if (grad_accum_steps < 1) throw ConfigError("train.grad_accum_steps must be >= 1");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("train.beta1/beta2 must lie in [0, 1)");
  if (adam_epsilon <= 0.0) throw ConfigError("train.adam_epsilon must be > 0");
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0)
    throw ConfigError("train.warmup_fraction must lie in [0, 1]");
  if (eval_every < 0) throw ConfigError("train.eval_every must be >= 0");
}

Dataset build_dataset(const GeneratedCorpus& corpus, const PairBuildSpec& spec) {
  Dataset d;
  d.samples = corpus.samples;
  d.labels = corpus.labels;
  d.train_pairs = build_pairs(d.samples, d.labels, Split::Train, spec);
  d.id_eval_pairs = build_pairs(d.samples, d.labels, Split::IdEval, spec);
  d.ood_eval_pairs = build_pairs(d.samples, d.labels, Split::OodEval, spec);
  return d;
}

std::string TrainHistory::loss_csv() const {
  std::ostringstream out;
  out.precision(12);
  out << "step,loss\n";
  for (std::size_t i = 0; i < step_loss.size(); ++i)
    out << (i + 1) << "," << step_loss[i] << "\n";
  return out.str();
}

namespace {

const std::vector<PreferencePair>& split_pairs(const Dataset& dataset, Split split) {
  switch (split) {
    case Split::Train: return dataset.train_pairs;
    case Split::IdEval: return dataset.id_eval_pairs;
    case Split::OodEval: return dataset.ood_eval_pairs;
  }
  throw Error("unreachable split");
}

// Unique sample pointers for a pair batch, in first-appearance order so the
// forward batch layout is a pure function of the pair order.
struct PairBatch {
  std::vector<const PreferencePair*> pairs;
  std::vector<const SyntheticSample*> samples;
  std::unordered_map<std::string, int> index_of;
};

PairBatch collect_batch(const std::vector<const PreferencePair*>& pairs,
                        const std::unordered_map<std::string, const SyntheticSample*>& by_id) {
  PairBatch batch;
  batch.pairs = pairs;
  auto touch = [&batch, &by_id](const std::string& id) {
    if (batch.index_of.count(id)) return;
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("pair references unknown sample " + id);
    batch.index_of.emplace(id, static_cast<int>(batch.samples.size()));
    batch.samples.push_back(it->second);
  };
  for (const PreferencePair* pair : pairs) {
    touch(pair->id_i);
    touch(pair->id_j);
  }
  return batch;
}

double population_std(const std::vector<double>& xs, double mean) {
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace

SplitEval evaluate_split(const RewardModel& model, const Dataset& dataset, Split split) {
  std::vector<const SyntheticSample*> members;
  for (const auto& s : dataset.samples)
    if (s.split == split) members.push_back(&s);
  if (members.empty()) throw DataError("split " + split_name(split) + " has no samples");

  std::vector<double> scores = score_samples(model, members);
  std::unordered_map<std::string, double> rewards;
  for (std::size_t i = 0; i < members.size(); ++i) rewards[members[i]->sample_id] = scores[i];

  std::vector<PreferencePair> win_pairs;
  for (const auto& pair : split_pairs(dataset, split))
    if (pair.relation == PairRelation::Win) win_pairs.push_back(pair);
  if (win_pairs.empty()) throw DataError("split " + split_name(split) + " has no win pairs");

  SplitEval eval;
  eval.accuracy = pairwise_accuracy(rewards, win_pairs);
  eval.margin = reward_margin(rewards, dataset.labels);
  eval.clustering = clustering_stats(scores);

  std::vector<double> positives;
  for (std::size_t i = 0; i < members.size(); ++i) {
    auto label = dataset.labels.find(members[i]->sample_id);
    if (label == dataset.labels.end())
      throw DataError("no label for sample " + members[i]->sample_id);
    if (label->second == Verdict::Pass) positives.push_back(scores[i]);
  }
  if (!positives.empty()) {
    double mean = std::accumulate(positives.begin(), positives.end(), 0.0) /
                  static_cast<double>(positives.size());
    const double sd = population_std(positives, mean);
    eval.positive_score_variance = sd * sd;
  }
  return eval;
}

EvalReport evaluate(const RewardModel& model, const Dataset& dataset) {
  SplitEval id = evaluate_split(model, dataset, Split::IdEval);
  SplitEval ood = evaluate_split(model, dataset, Split::OodEval);
  EvalReport report;
  report.accuracy_id = id.accuracy;
  report.accuracy_ood = ood.accuracy;
  report.margin_id = id.margin;
  report.margin_ood = ood.margin;
  report.clustering = id.clustering;
  report.positive_score_variance = id.positive_score_variance;
  return report;
}

TrainResult train(const TrainConfig& config, const Dataset& dataset) {
  config.validate();
  if (dataset.train_pairs.empty()) throw DataError("no training pairs");

  TrainResult result;
  result.model = init_reward_model(config.backbone, config.head, derive_seed(config.seed, "model"));
  RewardModel& model = result.model;
  auto trainable = [&config](const std::string& name) {
    return !(config.freeze_backbone && is_backbone_param(name));
  };

  ParamStore m = model.params.zeros_like();
  ParamStore v = model.params.zeros_like();
  const auto by_id = index_samples(dataset.samples);

  const long n_pairs = static_cast<long>(dataset.train_pairs.size());
  const long pairs_per_step = static_cast<long>(config.batch_pairs) * config.grad_accum_steps;
  const long steps_per_epoch = (n_pairs + pairs_per_step - 1) / pairs_per_step;
  const long total_steps = steps_per_epoch * config.epochs;
  const long warmup_steps =
      static_cast<long>(std::ceil(config.warmup_fraction * static_cast<double>(total_steps)));

  auto lr_at = [&](long step) {  // step is 1-based
    if (warmup_steps > 0 && step <= warmup_steps)
      return config.learning_rate * static_cast<double>(step) /
             static_cast<double>(warmup_steps);
    // Linear decay that ends above zero so the last step still moves.
    return config.learning_rate * static_cast<double>(total_steps - step + 1) /
           static_cast<double>(total_steps - warmup_steps);
  };

  result.best = model;
  TrainHistory& history = result.history;

  auto run_eval = [&](int step) {
    if (!history.evals.empty() && history.evals.back().step == step) return;
    EvalTick tick;
    tick.step = step;
    tick.report = evaluate(model, dataset);
    if (tick.report.accuracy_id > history.best_accuracy_id) {
      history.best_accuracy_id = tick.report.accuracy_id;
      history.best_step = step;
      result.best = model;
    }
    history.evals.push_back(std::move(tick));
  };

  std::vector<std::size_t> order(static_cast<std::size_t>(n_pairs));
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(derive_seed(config.seed, "batch_shuffle"));

  long step = 0;
  double beta1_pow = 1.0, beta2_pow = 1.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (long start = 0; start < n_pairs; start += pairs_per_step) {
      ++step;

      ParamStore grad_sum = model.params.zeros_like();
      double loss_sum = 0.0;
      int micro_count = 0;
      for (int micro = 0; micro < config.grad_accum_steps; ++micro) {
        const long lo = start + static_cast<long>(micro) * config.batch_pairs;
        if (lo >= n_pairs || lo >= start + pairs_per_step) break;
        const long hi = std::min({n_pairs, lo + config.batch_pairs, start + pairs_per_step});

        std::vector<const PreferencePair*> micro_pairs;
        micro_pairs.reserve(static_cast<std::size_t>(hi - lo));
        for (long p = lo; p < hi; ++p)
          micro_pairs.push_back(&dataset.train_pairs[order[static_cast<std::size_t>(p)]]);
        PairBatch batch = collect_batch(micro_pairs, by_id);

        double value = 0.0;
        try {
          Tape tape;
          ParamBinding binding = bind_params(tape, model.params, trainable);
          NodeId rewards = reward_forward(tape, binding, model, batch.samples);
          NodeId loss =
              batch_loss(tape, batch.pairs, rewards, batch.index_of, dataset.labels, config.loss);
          value = tape.value(loss).scalar_value();
          tape.backward(loss);
          for (const auto& name : model.params.names()) {
            if (!trainable(name)) continue;
            const Tensor& g = tape.grad(binding.at(name));
            Tensor& acc = grad_sum.get(name);
            for (std::size_t i = 0; i < g.data.size(); ++i) acc.data[i] += g.data[i];
          }
        } catch (const NumericError& e) {
          throw NumericError("training diverged at step " + std::to_string(step) + ": " +
                             e.what());
        }
        loss_sum += value;
        ++micro_count;
      }

      const double step_loss = loss_sum / static_cast<double>(micro_count);
      if (!std::isfinite(step_loss))
        throw NumericError("training diverged at step " + std::to_string(step));
      history.step_loss.push_back(step_loss);

      // AdamW with decoupled decay, one update per optimizer step.
      const double lr = lr_at(step);
      const double grad_scale = 1.0 / static_cast<double>(micro_count);
      beta1_pow *= config.beta1;
      beta2_pow *= config.beta2;
      for (const auto& name : model.params.names()) {
        if (!trainable(name)) continue;
        Tensor& theta = model.params.get(name);
        Tensor& m1 = m.get(name);
        Tensor& m2 = v.get(name);
        const Tensor& g_sum = grad_sum.get(name);
        for (std::size_t i = 0; i < theta.data.size(); ++i) {
          const double g = g_sum.data[i] * grad_scale;
          m1.data[i] = config.beta1 * m1.data[i] + (1.0 - config.beta1) * g;
          m2.data[i] = config.beta2 * m2.data[i] + (1.0 - config.beta2) * g * g;
          const double m_hat = m1.data[i] / (1.0 - beta1_pow);
          const double v_hat = m2.data[i] / (1.0 - beta2_pow);
          theta.data[i] = theta.data[i] * (1.0 - lr * config.weight_decay) -
                          lr * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
        }
      }

      if (config.eval_every > 0 && step % config.eval_every == 0)
        run_eval(static_cast<int>(step));
    }
    run_eval(static_cast<int>(step));
  }
  return result;
}

std::vector<CompareRow> compare_losses(const TrainConfig& base, const CorpusConfig& corpus,
                                       const PairBuildSpec& pair_spec,
                                       const std::vector<LossVariant>& variants,
                                       const std::vector<std::uint64_t>& seeds) {
  if (variants.empty()) throw ConfigError("compare_losses needs at least one variant");
  if (seeds.empty()) throw ConfigError("compare_losses needs at least one seed");

  std::vector<CompareRow> rows(variants.size());
  for (std::size_t i = 0; i < variants.size(); ++i) rows[i].variant = variants[i].name;

  for (std::uint64_t seed : seeds) {
    // One corpus and one pair pool per seed, shared by every variant.
    CorpusConfig corpus_config = corpus;
    corpus_config.seed = derive_seed(seed, "compare_corpus");
    PairBuildSpec spec = pair_spec;
    spec.seed = derive_seed(seed, "compare_pairs");
    Dataset dataset = build_dataset(generate_corpus(corpus_config), spec);

    for (std::size_t i = 0; i < variants.size(); ++i) {
      CompareCell cell;
      cell.seed = seed;
      TrainConfig config = base;
      config.loss = variants[i].loss;
      config.seed = derive_seed(seed, "compare_train");
      try {
        Dataset working = dataset;
        if (config.loss.kind == LossKind::Bt) {
          // The plain pairwise kind discards tie pairs instead of erroring.
          auto drop_ties = [](std::vector<PreferencePair>& pairs) {
            pairs.erase(std::remove_if(pairs.begin(), pairs.end(),
                                       [](const PreferencePair& p) {
                                         return p.relation == PairRelation::Tie;
                                       }),
                        pairs.end());
          };
          drop_ties(working.train_pairs);
        }
        TrainResult result = train(config, working);
        cell.report = evaluate(result.best, working);
        cell.ok = true;
      } catch (const Error& e) {
        cell.error = e.what();  // the cell fails, the table survives
      }
      rows[i].cells.push_back(std::move(cell));
    }
  }

  for (auto& row : rows) {
    std::vector<double> acc_id, acc_ood, margin, pos_var, mode_mass;
    for (const auto& cell : row.cells) {
      if (!cell.ok) continue;
      acc_id.push_back(cell.report.accuracy_id);
      acc_ood.push_back(cell.report.accuracy_ood);
      margin.push_back(cell.report.margin_id);
      pos_var.push_back(cell.report.positive_score_variance);
      mode_mass.push_back(cell.report.clustering.mode_mass);
    }
    if (acc_id.empty()) continue;
    auto mean_of = [](const std::vector<double>& xs) {
      return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    };
    row.acc_id_mean = mean_of(acc_id);
    row.acc_id_std = population_std(acc_id, row.acc_id_mean);
    row.acc_ood_mean = mean_of(acc_ood);
    row.acc_ood_std = population_std(acc_ood, row.acc_ood_mean);
    row.margin_id_mean = mean_of(margin);
    row.margin_id_std = population_std(margin, row.margin_id_mean);
    row.pos_variance_mean = mean_of(pos_var);
    row.pos_variance_std = population_std(pos_var, row.pos_variance_mean);
    row.mode_mass_mean = mean_of(mode_mass);
  }
  return rows;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "variant,acc_id,acc_ood,margin,pos_variance,acc_id_std,acc_ood_std,margin_std,"
         "pos_variance_std,mode_mass,runs_ok,runs_total\n";
  for (const auto& row : rows) {
    long ok = 0;
    for (const auto& cell : row.cells) ok += cell.ok ? 1 : 0;
    out << row.variant << "," << row.acc_id_mean << "," << row.acc_ood_mean << ","
        << row.margin_id_mean << "," << row.pos_variance_mean << "," << row.acc_id_std << ","
        << row.acc_ood_std << "," << row.margin_id_std << "," << row.pos_variance_std << ","
        << row.mode_mass_mean << "," << ok << "," << row.cells.size() << "\n";
  }
  return out.str();
}

}  // namespace rmlab
