#include "rmlab/config_json.hpp"

#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rmlab/rng.hpp"

namespace rmlab {
namespace {

using nlohmann::json;

// One JSON object during parsing: consumed keys are tracked so strict mode
// can name every leftover, and every type error carries its dotted path.
class Fields {
 public:
  Fields(const json& obj, std::string path, bool strict)
      : obj_(obj), path_(std::move(path)), strict_(strict) {
    if (!obj_.is_object())
      throw ConfigError("config node '" + (path_.empty() ? "<root>" : path_) +
                        "' must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    seen_.insert(key);
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config field '" + dotted(key) + "' has the wrong type (got " +
                        std::string(it->type_name()) + ")");
    }
  }

  void get_enum(const char* key, std::string* out) { get(key, *out); }

  const json* child(const char* key) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  std::string dotted(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    if (!strict_) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError("unknown config field '" + dotted(it.key()) + "'");
  }

  bool strict() const { return strict_; }

 private:
  const json& obj_;
  std::string path_;
  bool strict_;
  std::set<std::string> seen_;
};

json corpus_to_json(const CorpusConfig& c) {
  return json{{"prompts", c.prompts},
              {"samples_per_prompt", c.samples_per_prompt},
              {"single_prompt_fraction", c.single_prompt_fraction},
              {"dimension", c.dimension},
              {"pass_threshold", c.pass_threshold},
              {"annotators", c.annotators},
              {"annotator_noise", c.annotator_noise},
              {"boundary_margin", c.boundary_margin},
              {"feature_noise", c.feature_noise},
              {"shortcut_rho_train", c.shortcut_rho_train},
              {"shortcut_rho_ood", c.shortcut_rho_ood},
              {"train_fraction", c.train_fraction},
              {"id_eval_fraction", c.id_eval_fraction},
              {"graded_pass", c.graded_pass},
              {"pass_compression", c.pass_compression},
              {"payload_tokens", c.payload_tokens},
              {"feature_dim", c.feature_dim},
              {"seed", c.seed}};
}

void corpus_from_json(const json& node, const std::string& path, bool strict, CorpusConfig* c) {
  Fields f(node, path, strict);
  f.get("prompts", c->prompts);
  f.get("samples_per_prompt", c->samples_per_prompt);
  f.get("single_prompt_fraction", c->single_prompt_fraction);
  f.get("dimension", c->dimension);
  f.get("pass_threshold", c->pass_threshold);
  f.get("annotators", c->annotators);
  f.get("annotator_noise", c->annotator_noise);
  f.get("boundary_margin", c->boundary_margin);
  f.get("feature_noise", c->feature_noise);
  f.get("shortcut_rho_train", c->shortcut_rho_train);
  f.get("shortcut_rho_ood", c->shortcut_rho_ood);
  f.get("train_fraction", c->train_fraction);
  f.get("id_eval_fraction", c->id_eval_fraction);
  f.get("graded_pass", c->graded_pass);
  f.get("pass_compression", c->pass_compression);
  f.get("payload_tokens", c->payload_tokens);
  f.get("feature_dim", c->feature_dim);
  f.get("seed", c->seed);
  f.finish();
}

json backbone_to_json(const BackboneConfig& b) {
  return json{{"layers", b.layers},           {"model_dim", b.model_dim},
              {"heads", b.heads},             {"seq_len", b.seq_len},
              {"feature_dim", b.feature_dim}, {"ffn_mult", b.ffn_mult},
              {"special_token", b.special_token}};
}

void backbone_from_json(const json& node, const std::string& path, bool strict,
                        BackboneConfig* b) {
  Fields f(node, path, strict);
  f.get("layers", b->layers);
  f.get("model_dim", b->model_dim);
  f.get("heads", b->heads);
  f.get("seq_len", b->seq_len);
  f.get("feature_dim", b->feature_dim);
  f.get("ffn_mult", b->ffn_mult);
  f.get("special_token", b->special_token);
  f.finish();
}

json head_to_json(const HeadConfig& h) {
  return json{{"kind", head_kind_name(h.kind)},
              {"layer_indices", h.layer_indices},
              {"attn_heads", h.attn_heads}};
}

void head_from_json(const json& node, const std::string& path, bool strict, HeadConfig* h) {
  Fields f(node, path, strict);
  std::string kind = head_kind_name(h->kind);
  f.get("kind", kind);
  try {
    h->kind = head_kind_from_name(kind);
  } catch (const ConfigError& e) {
    throw ConfigError("config field '" + f.dotted("kind") + "': " + e.what());
  }
  f.get("layer_indices", h->layer_indices);
  f.get("attn_heads", h->attn_heads);
  f.finish();
}

json loss_to_json(const LossConfig& l) {
  return json{{"kind", loss_kind_name(l.kind)},
              {"bce_weight", l.bce_weight},
              {"btt_tie_theta", l.btt_tie_theta},
              {"bt_margin", l.bt_margin}};
}

void loss_from_json(const json& node, const std::string& path, bool strict, LossConfig* l) {
  Fields f(node, path, strict);
  std::string kind = loss_kind_name(l->kind);
  f.get("kind", kind);
  try {
    l->kind = loss_kind_from_name(kind);
  } catch (const ConfigError& e) {
    throw ConfigError("config field '" + f.dotted("kind") + "': " + e.what());
  }
  f.get("bce_weight", l->bce_weight);
  f.get("btt_tie_theta", l->btt_tie_theta);
  f.get("bt_margin", l->bt_margin);
  f.finish();
}

json train_to_json(const TrainConfig& t) {
  return json{{"backbone", backbone_to_json(t.backbone)},
              {"head", head_to_json(t.head)},
              {"loss", loss_to_json(t.loss)},
              {"learning_rate", t.learning_rate},
              {"epochs", t.epochs},
              {"batch_pairs", t.batch_pairs},
              {"grad_accum_steps", t.grad_accum_steps},
              {"beta1", t.beta1},
              {"beta2", t.beta2},
              {"adam_epsilon", t.adam_epsilon},
              {"weight_decay", t.weight_decay},
              {"warmup_fraction", t.warmup_fraction},
              {"seed", t.seed},
              {"freeze_backbone", t.freeze_backbone},
              {"eval_every", t.eval_every}};
}

void train_from_json(const json& node, const std::string& path, bool strict, TrainConfig* t) {
  Fields f(node, path, strict);
  if (const json* b = f.child("backbone"))
    backbone_from_json(*b, f.dotted("backbone"), strict, &t->backbone);
  if (const json* h = f.child("head")) head_from_json(*h, f.dotted("head"), strict, &t->head);
  if (const json* l = f.child("loss")) loss_from_json(*l, f.dotted("loss"), strict, &t->loss);
  f.get("learning_rate", t->learning_rate);
  f.get("epochs", t->epochs);
  f.get("batch_pairs", t->batch_pairs);
  f.get("grad_accum_steps", t->grad_accum_steps);
  f.get("beta1", t->beta1);
  f.get("beta2", t->beta2);
  f.get("adam_epsilon", t->adam_epsilon);
  f.get("weight_decay", t->weight_decay);
  f.get("warmup_fraction", t->warmup_fraction);
  f.get("seed", t->seed);
  f.get("freeze_backbone", t->freeze_backbone);
  f.get("eval_every", t->eval_every);
  f.finish();
}

json pairs_to_json(const PairBuildSpec& p) {
  return json{{"strategy", pair_strategy_name(p.strategy)},
              {"n_win_lose", p.n_win_lose},
              {"n_win_tie", p.n_win_tie},
              {"n_lose_tie", p.n_lose_tie},
              {"seed", p.seed}};
}

void pairs_from_json(const json& node, const std::string& path, bool strict, PairBuildSpec* p) {
  Fields f(node, path, strict);
  std::string strategy = pair_strategy_name(p->strategy);
  f.get("strategy", strategy);
  try {
    p->strategy = pair_strategy_from_name(strategy);
  } catch (const ConfigError& e) {
    throw ConfigError("config field '" + f.dotted("strategy") + "': " + e.what());
  }
  f.get("n_win_lose", p->n_win_lose);
  f.get("n_win_tie", p->n_win_tie);
  f.get("n_lose_tie", p->n_lose_tie);
  f.get("seed", p->seed);
  f.finish();
}

json sim_to_json(const SimSettings& s) {
  return json{{"policy",
               {{"mean_quality", s.policy.mean_quality},
                {"shortcut_logit", s.policy.shortcut_logit},
                {"noise", s.policy.noise}}},
              {"group_size", s.options.group_size},
              {"step_size", s.options.step_size},
              {"advantage_clip", s.options.advantage_clip},
              {"prompt_id", s.options.prompt_id},
              {"steps", s.steps}};
}

void sim_from_json(const json& node, const std::string& path, bool strict, SimSettings* s) {
  Fields f(node, path, strict);
  if (const json* p = f.child("policy")) {
    Fields pf(*p, f.dotted("policy"), strict);
    pf.get("mean_quality", s->policy.mean_quality);
    pf.get("shortcut_logit", s->policy.shortcut_logit);
    pf.get("noise", s->policy.noise);
    pf.finish();
  }
  f.get("group_size", s->options.group_size);
  f.get("step_size", s->options.step_size);
  f.get("advantage_clip", s->options.advantage_clip);
  f.get("prompt_id", s->options.prompt_id);
  f.get("steps", s->steps);
  f.finish();
}

}  // namespace

void SimSettings::validate() const {
  policy.validate();
  options.validate();
  if (steps < 0) throw ConfigError("sim.steps must be >= 0");
}

void ExperimentConfig::resolve_seeds() {
  corpus.seed = derive_seed(seed, "corpus");
  pairs.seed = derive_seed(seed, "pairs");
  train.seed = derive_seed(seed, "train");
}

void ExperimentConfig::validate() const {
  corpus.validate();
  train.validate();
  sim.validate();
  if (out_dir.empty()) throw ConfigError("out_dir must be non-empty");
  if (compare_variants.empty()) throw ConfigError("compare_variants must be non-empty");
  if (compare_seeds.empty()) throw ConfigError("compare_seeds must be non-empty");
  for (const auto& name : compare_variants) loss_kind_from_name(name);  // throws on junk
}

ExperimentConfig experiment_from_json(const std::string& text, bool strict) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  ExperimentConfig config;
  Fields f(doc, "", strict);
  if (const json* c = f.child("corpus")) corpus_from_json(*c, "corpus", strict, &config.corpus);
  if (const json* p = f.child("pairs")) pairs_from_json(*p, "pairs", strict, &config.pairs);
  if (const json* t = f.child("train")) train_from_json(*t, "train", strict, &config.train);
  if (const json* s = f.child("sim")) sim_from_json(*s, "sim", strict, &config.sim);
  f.get("compare_variants", config.compare_variants);
  f.get("compare_seeds", config.compare_seeds);
  f.get("out_dir", config.out_dir);
  f.get("seed", config.seed);
  f.finish();
  return config;
}

std::string experiment_to_json(const ExperimentConfig& config) {
  json doc{{"corpus", corpus_to_json(config.corpus)},
           {"pairs", pairs_to_json(config.pairs)},
           {"train", train_to_json(config.train)},
           {"sim", sim_to_json(config.sim)},
           {"compare_variants", config.compare_variants},
           {"compare_seeds", config.compare_seeds},
           {"out_dir", config.out_dir},
           {"seed", config.seed}};
  return doc.dump(2);
}

std::string config_hash(const ExperimentConfig& config) {
  const std::uint64_t h = fnv1a64(experiment_to_json(config));
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::string model_config_json(const BackboneConfig& backbone, const HeadConfig& head) {
  json doc{{"backbone", backbone_to_json(backbone)}, {"head", head_to_json(head)}};
  return doc.dump();
}

void parse_model_config_json(const std::string& text, BackboneConfig* backbone,
                             HeadConfig* head) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint config header is not valid JSON: ") + e.what());
  }
  Fields f(doc, "checkpoint", true);
  if (const json* b = f.child("backbone"))
    backbone_from_json(*b, "checkpoint.backbone", true, backbone);
  if (const json* h = f.child("head")) head_from_json(*h, "checkpoint.head", true, head);
  f.finish();
}

}  // namespace rmlab
