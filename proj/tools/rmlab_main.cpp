// Experiment driver: wires corpus generation, pair building, reward-model
// training, evaluation, agreement analysis, policy simulation, and the
// loss-comparison table into reproducible, file-based commands.
//
// Every command reads one JSON config (flags > file > defaults), resolves
// all nested seeds from the root seed, prints a machine-readable JSON
// summary to stdout, and writes its artifacts under --out. Exit codes:
// 0 success, 2 config error, 3 data error, 4 numeric divergence, 1 other.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rmlab/checkpoint.hpp"
#include "rmlab/config_json.hpp"
#include "rmlab/grposim.hpp"
#include "rmlab/jsonl.hpp"
#include "rmlab/metrics.hpp"
#include "rmlab/rng.hpp"
#include "rmlab/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rmlab;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool strict = false;
  std::string checkpoint;  // eval/sim only
};

void add_common_flags(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "JSON experiment config file");
  cmd->add_option("--out", args->out_dir, "output directory (overrides the config)");
  cmd->add_option("--seed", args->seed, "root seed (overrides the config)")
      ->each([args](const std::string&) { args->seed_set = true; });
  cmd->add_flag("--strict", args->strict,
                "reject unknown config fields and unknown JSONL fields");
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig config;
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw ConfigError("cannot read config file: " + args.config_path);
    const std::string text((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    try {
      config = experiment_from_json(text, args.strict);
    } catch (const ConfigError& e) {
      throw ConfigError(args.config_path + ": " + e.what());
    }
  }
  if (args.seed_set) config.seed = args.seed;
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  config.resolve_seeds();
  config.validate();
  return config;
}

std::string out_path(const ExperimentConfig& config, const std::string& name) {
  return (fs::path(config.out_dir) / name).string();
}

void ensure_out_dir(const ExperimentConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw Error("cannot create output directory " + config.out_dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
  out.flush();
  if (!out) throw Error("failed writing " + path);
}

json summary_base(const std::string& command, const ExperimentConfig& config) {
  return json{{"command", command}, {"config_hash", config_hash(config)}, {"seed", config.seed}};
}

void print_summary(const json& summary) { std::cout << summary.dump(2) << "\n"; }

// Labels come from annotator consensus when the annotation file exists and
// fall back to the noise-free threshold labels otherwise.
std::unordered_map<std::string, Verdict> load_labels(const ExperimentConfig& config,
                                                     const std::vector<SyntheticSample>& samples,
                                                     bool strict) {
  const std::string annotations_path = out_path(config, "annotations.jsonl");
  if (fs::exists(annotations_path)) {
    const auto annotations = read_annotations(annotations_path, strict);
    return consensus_labels(samples, annotations, config.corpus);
  }
  std::unordered_map<std::string, Verdict> labels;
  for (const auto& s : samples)
    labels[s.sample_id] =
        s.latent_quality >= config.corpus.pass_threshold ? Verdict::Pass : Verdict::Fail;
  return labels;
}

// Input bundle shared by train/eval: the gen + pairs artifacts.
Dataset load_dataset(const ExperimentConfig& config, bool strict) {
  Dataset out;
  out.samples = read_samples(out_path(config, "samples.jsonl"), strict);
  out.labels = load_labels(config, out.samples, strict);
  out.train_pairs = read_pairs(out_path(config, "pairs_train.jsonl"), strict);
  out.id_eval_pairs = read_pairs(out_path(config, "pairs_id_eval.jsonl"), strict);
  out.ood_eval_pairs = read_pairs(out_path(config, "pairs_ood_eval.jsonl"), strict);
  return out;
}

json report_to_node(const EvalReport& report) { return json::parse(report.to_json()); }

GroupScorer quality_oracle() {
  return [](const std::vector<SyntheticSample>& samples) {
    std::vector<double> r;
    r.reserve(samples.size());
    for (const auto& s : samples) r.push_back(s.latent_quality);
    return r;
  };
}

int cmd_gen(const CommonArgs& args) {
  const ExperimentConfig config = load_config(args);
  ensure_out_dir(config);

  const GeneratedCorpus corpus = generate_corpus(config.corpus);
  const auto annotations =
      simulate_annotators(corpus.samples, config.corpus, config.corpus.annotators,
                          config.corpus.annotator_noise, derive_seed(config.seed, "annotations"));
  write_samples(out_path(config, "samples.jsonl"), corpus.samples);
  write_annotations(out_path(config, "annotations.jsonl"), annotations);

  std::map<std::string, std::pair<long, long>> by_dimension;  // pass, total
  for (const auto& s : corpus.samples) {
    auto& counts = by_dimension[s.dimension];
    counts.first += corpus.labels.at(s.sample_id) == Verdict::Pass ? 1 : 0;
    counts.second += 1;
  }
  json pass_rates = json::object();
  for (const auto& [dimension, counts] : by_dimension)
    pass_rates[dimension] = static_cast<double>(counts.first) /
                            static_cast<double>(counts.second);

  json summary = summary_base("gen", config);
  summary["samples"] = corpus.samples.size();
  summary["annotations"] = annotations.size();
  summary["pass_rate"] = pass_rates;
  summary["files"] = {out_path(config, "samples.jsonl"), out_path(config, "annotations.jsonl")};
  print_summary(summary);
  return 0;
}

int cmd_pairs(const CommonArgs& args) {
  const ExperimentConfig config = load_config(args);
  ensure_out_dir(config);

  const auto samples = read_samples(out_path(config, "samples.jsonl"), args.strict);
  const auto labels = load_labels(config, samples, args.strict);

  json splits = json::object();
  std::vector<std::string> files;
  const std::pair<Split, std::string> plan[] = {{Split::Train, "pairs_train.jsonl"},
                                                {Split::IdEval, "pairs_id_eval.jsonl"},
                                                {Split::OodEval, "pairs_ood_eval.jsonl"}};
  for (const auto& [split, file] : plan) {
    const auto pairs = build_pairs(samples, labels, split, config.pairs);
    long wins = 0, ties = 0;
    for (const auto& p : pairs) (p.relation == PairRelation::Win ? wins : ties) += 1;
    write_pairs(out_path(config, file), pairs);
    splits[split_name(split)] = {{"total", pairs.size()}, {"win", wins}, {"tie", ties}};
    files.push_back(out_path(config, file));
  }

  json summary = summary_base("pairs", config);
  summary["pairs"] = splits;
  summary["files"] = files;
  print_summary(summary);
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const ExperimentConfig config = load_config(args);
  ensure_out_dir(config);

  const Dataset dataset = load_dataset(config, args.strict);
  const TrainResult result = train(config.train, dataset);

  save_checkpoint(out_path(config, "checkpoint_final.bin"), result.model);
  save_checkpoint(out_path(config, "checkpoint_best.bin"), result.best);
  write_text(out_path(config, "history.csv"), result.history.loss_csv());
  std::string ticks;
  for (const auto& tick : result.history.evals) {
    json line{{"step", tick.step}, {"report", report_to_node(tick.report)}};
    ticks += line.dump() + "\n";
  }
  write_text(out_path(config, "eval_ticks.jsonl"), ticks);

  json summary = summary_base("train", config);
  summary["optimizer_steps"] = result.history.step_loss.size();
  summary["final_loss"] =
      result.history.step_loss.empty() ? json() : json(result.history.step_loss.back());
  summary["best_step"] = result.history.best_step;
  summary["best_accuracy_id"] = result.history.best_accuracy_id;
  summary["final_eval"] = result.history.evals.empty()
                              ? json()
                              : report_to_node(result.history.evals.back().report);
  summary["files"] = {out_path(config, "checkpoint_final.bin"),
                      out_path(config, "checkpoint_best.bin"), out_path(config, "history.csv"),
                      out_path(config, "eval_ticks.jsonl")};
  print_summary(summary);
  return 0;
}

int cmd_eval(const CommonArgs& args) {
  const ExperimentConfig config = load_config(args);
  ensure_out_dir(config);

  const std::string checkpoint =
      args.checkpoint.empty() ? out_path(config, "checkpoint_final.bin") : args.checkpoint;
  const RewardModel model = load_checkpoint(checkpoint);
  const Dataset dataset = load_dataset(config, args.strict);
  const EvalReport report = evaluate(model, dataset);

  write_text(out_path(config, "eval.json"), report.to_json() + "\n");

  json summary = summary_base("eval", config);
  summary["checkpoint"] = checkpoint;
  summary["report"] = report_to_node(report);
  summary["files"] = {out_path(config, "eval.json")};
  print_summary(summary);
  return 0;
}

int cmd_iaa(const CommonArgs& args) {
  const ExperimentConfig config = load_config(args);
  ensure_out_dir(config);

  const auto annotations = read_annotations(out_path(config, "annotations.jsonl"), args.strict);
  const auto counts = verdict_counts(annotations);
  const auto ratings = rating_matrix(annotations);
  const IaaResult kappa = fleiss_kappa(counts);
  const IaaResult alpha = krippendorff_alpha(ratings);
  const double agreement = raw_agreement(ratings);

  auto iaa_node = [](const IaaResult& r) {
    return json{{"value", r.value}, {"degenerate", r.degenerate}, {"band", r.band}};
  };
  json summary = summary_base("iaa", config);
  summary["annotations"] = annotations.size();
  summary["fleiss_kappa"] = iaa_node(kappa);
  summary["krippendorff_alpha"] = iaa_node(alpha);
  summary["raw_agreement"] = agreement;
  write_text(out_path(config, "iaa.json"),
             json{{"fleiss_kappa", iaa_node(kappa)},
                  {"krippendorff_alpha", iaa_node(alpha)},
                  {"raw_agreement", agreement}}
                     .dump(2) +
                 "\n");
  summary["files"] = {out_path(config, "iaa.json")};
  print_summary(summary);
  return 0;
}

int cmd_sim(const CommonArgs& args) {
  const ExperimentConfig config = load_config(args);
  ensure_out_dir(config);

  const std::string checkpoint =
      args.checkpoint.empty() ? out_path(config, "checkpoint_best.bin") : args.checkpoint;
  const RewardModel model = load_checkpoint(checkpoint);
  const std::uint64_t sim_seed = derive_seed(config.seed, "sim");

  const Trajectory run = simulate(config.sim.policy, model, config.corpus, config.sim.steps,
                                  config.sim.options, sim_seed);
  const Trajectory reference = simulate(config.sim.policy, quality_oracle(), config.corpus,
                                        config.sim.steps, config.sim.options, sim_seed);
  const double index = hacking_index(run, reference);

  write_text(out_path(config, "sim_rm.csv"), run.csv());
  write_text(out_path(config, "sim_reference.csv"), reference.csv());
  write_text(out_path(config, "sim_side_by_side.csv"),
             side_by_side_csv(run, "rm", reference, "oracle"));

  auto endpoint = [](const Trajectory& t) {
    return json{{"mean_quality", t.points.back().mean_quality},
                {"shortcut_prob", t.points.back().shortcut_prob},
                {"mean_reward", t.points.back().mean_reward}};
  };
  json summary = summary_base("sim", config);
  summary["checkpoint"] = checkpoint;
  summary["steps"] = config.sim.steps;
  summary["hacking_index"] = index;
  summary["final"] = {{"rm", endpoint(run)}, {"oracle", endpoint(reference)}};
  summary["files"] = {out_path(config, "sim_rm.csv"), out_path(config, "sim_reference.csv"),
                      out_path(config, "sim_side_by_side.csv")};
  print_summary(summary);
  return 0;
}

int cmd_compare(const CommonArgs& args) {
  const ExperimentConfig config = load_config(args);
  ensure_out_dir(config);

  std::vector<LossVariant> variants;
  for (const auto& name : config.compare_variants) {
    LossVariant v;
    v.name = name;
    v.loss = config.train.loss;
    v.loss.kind = loss_kind_from_name(name);
    variants.push_back(std::move(v));
  }
  const std::vector<CompareRow> rows =
      compare_losses(config.train, config.corpus, config.pairs, variants, config.compare_seeds);
  write_text(out_path(config, "compare.csv"), compare_csv(rows));

  json table = json::array();
  for (const auto& row : rows) {
    long ok = 0;
    json errors = json::array();
    for (const auto& cell : row.cells) {
      ok += cell.ok ? 1 : 0;
      if (!cell.ok) errors.push_back({{"seed", cell.seed}, {"error", cell.error}});
    }
    table.push_back({{"variant", row.variant},
                     {"acc_id", row.acc_id_mean},
                     {"acc_id_std", row.acc_id_std},
                     {"acc_ood", row.acc_ood_mean},
                     {"acc_ood_std", row.acc_ood_std},
                     {"margin", row.margin_id_mean},
                     {"margin_std", row.margin_id_std},
                     {"pos_variance", row.pos_variance_mean},
                     {"pos_variance_std", row.pos_variance_std},
                     {"mode_mass", row.mode_mass_mean},
                     {"runs_ok", ok},
                     {"runs_total", row.cells.size()},
                     {"errors", errors}});
  }
  json summary = summary_base("compare", config);
  summary["rows"] = table;
  summary["files"] = {out_path(config, "compare.csv")};
  print_summary(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic-preference reward-model laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  int (*run)(const CommonArgs&) = nullptr;

  auto wire = [&](const char* name, const char* help, int (*fn)(const CommonArgs&),
                  bool with_checkpoint = false) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common_flags(cmd, &args);
    if (with_checkpoint)
      cmd->add_option("--checkpoint", args.checkpoint, "checkpoint file to load");
    cmd->callback([&run, fn]() { run = fn; });
    return cmd;
  };

  wire("gen", "generate the synthetic corpus and annotations", cmd_gen);
  wire("pairs", "build preference pairs per split from gen artifacts", cmd_pairs);
  wire("train", "train the reward model on built pairs", cmd_train);
  wire("eval", "evaluate a checkpoint on the eval splits", cmd_eval, true);
  wire("iaa", "inter-annotator agreement over the annotations file", cmd_iaa);
  wire("sim", "policy-optimization simulation against a checkpoint", cmd_sim, true);
  wire("compare", "loss-variant comparison table over fresh corpora", cmd_compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are config errors
  }

  try {
    return run(args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
