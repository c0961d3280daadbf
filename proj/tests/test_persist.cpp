// Config JSON round-trips, strict parsing, config hashing, and the binary
// checkpoint format including its corruption detection.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "rmlab/checkpoint.hpp"
#include "rmlab/config_json.hpp"
#include "rmlab/rng.hpp"

using namespace rmlab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "rmlab_persist_test") {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

ExperimentConfig tweaked_config() {
  ExperimentConfig c;
  c.corpus.prompts = 33;
  c.corpus.samples_per_prompt = 7;
  c.corpus.dimension = "temporal_consistency";
  c.corpus.shortcut_rho_train = 0.8;
  c.corpus.graded_pass = true;
  c.pairs.strategy = PairStrategy::CrossPrompt;
  c.pairs.n_win_lose = 123;
  c.train.backbone.layers = 3;
  c.train.backbone.model_dim = 24;
  c.train.head.kind = HeadKind::LinearLastToken;
  c.train.loss.kind = LossKind::Btt;
  c.train.loss.bce_weight = 0.25;
  c.train.learning_rate = 7e-4;
  c.train.freeze_backbone = true;
  c.sim.policy.mean_quality = 0.125;
  c.sim.options.group_size = 4;
  c.sim.steps = 55;
  c.compare_variants = {"btt", "bt"};
  c.compare_seeds = {9, 10};
  c.out_dir = "results";
  c.seed = 777;
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

RewardModel small_model(std::uint64_t seed) {
  BackboneConfig backbone;
  backbone.layers = 2;
  backbone.model_dim = 16;
  backbone.heads = 4;
  backbone.seq_len = 8;
  backbone.feature_dim = 8;
  backbone.ffn_mult = 2;
  HeadConfig head;
  head.layer_indices = {1, 2};
  head.attn_heads = 2;
  return init_reward_model(backbone, head, seed);
}

}  // namespace

TEST_CASE("experiment config survives a json round trip") {
  const ExperimentConfig original = tweaked_config();
  const std::string text = experiment_to_json(original);
  const ExperimentConfig parsed = experiment_from_json(text, true);
  CHECK(experiment_to_json(parsed) == text);
  CHECK(config_hash(parsed) == config_hash(original));
  CHECK(parsed.corpus.dimension == "temporal_consistency");
  CHECK(parsed.train.head.kind == HeadKind::LinearLastToken);
  CHECK(parsed.train.loss.kind == LossKind::Btt);
  CHECK(parsed.pairs.strategy == PairStrategy::CrossPrompt);
  CHECK(parsed.compare_seeds == std::vector<std::uint64_t>{9, 10});
}

TEST_CASE("partial documents fall back to defaults") {
  const ExperimentConfig parsed = experiment_from_json(R"({"seed": 9})", true);
  const ExperimentConfig defaults;
  CHECK(parsed.seed == 9);
  CHECK(parsed.corpus.prompts == defaults.corpus.prompts);
  CHECK(parsed.train.learning_rate == defaults.train.learning_rate);
  CHECK(parsed.out_dir == defaults.out_dir);

  const ExperimentConfig nested =
      experiment_from_json(R"({"train": {"loss": {"kind": "btt"}}})", true);
  CHECK(nested.train.loss.kind == LossKind::Btt);
  CHECK(nested.train.loss.bce_weight == defaults.train.loss.bce_weight);
}

TEST_CASE("config hash is sixteen hex digits and tracks content") {
  const ExperimentConfig a;
  ExperimentConfig b;
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) == config_hash(b));
  b.corpus.prompts += 1;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("strict parsing names unknown fields with their dotted path") {
  CHECK_NOTHROW(experiment_from_json(R"({"unknown_knob": 1})", false));
  bool threw = false;
  try {
    experiment_from_json(R"({"unknown_knob": 1})", true);
  } catch (const ConfigError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("unknown_knob") != std::string::npos);
  }
  CHECK(threw);

  threw = false;
  try {
    experiment_from_json(R"({"corpus": {"promts": 3}})", true);
  } catch (const ConfigError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("corpus.promts") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("type and enum errors carry the field path in both modes") {
  for (bool strict : {false, true}) {
    bool threw = false;
    try {
      experiment_from_json(R"({"corpus": {"prompts": "many"}})", strict);
    } catch (const ConfigError& e) {
      threw = true;
      CHECK(std::string(e.what()).find("corpus.prompts") != std::string::npos);
    }
    CHECK(threw);
    CHECK_THROWS_AS(experiment_from_json(R"({"train": {"loss": {"kind": "hinge"}}})", strict),
                    ConfigError);
    CHECK_THROWS_AS(experiment_from_json(R"({"train": {"head": {"kind": "mlp"}}})", strict),
                    ConfigError);
    CHECK_THROWS_AS(experiment_from_json(R"({"pairs": {"strategy": "random"}})", strict),
                    ConfigError);
    CHECK_THROWS_AS(experiment_from_json("not json at all", strict), ConfigError);
    CHECK_THROWS_AS(experiment_from_json(R"(["an","array"])", strict), ConfigError);
  }
}

TEST_CASE("the root seed deterministically stamps every nested seed") {
  ExperimentConfig a;
  a.seed = 11;
  a.resolve_seeds();
  ExperimentConfig b;
  b.seed = 11;
  b.corpus.seed = 999;  // overwritten by resolve
  b.resolve_seeds();
  CHECK(a.corpus.seed == b.corpus.seed);
  CHECK(a.pairs.seed == b.pairs.seed);
  CHECK(a.train.seed == b.train.seed);
  CHECK(a.corpus.seed != a.pairs.seed);

  ExperimentConfig c;
  c.seed = 12;
  c.resolve_seeds();
  CHECK(c.corpus.seed != a.corpus.seed);
}

TEST_CASE("experiment validation rejects bad variant names and empty fields") {
  ExperimentConfig config;
  CHECK_NOTHROW(config.validate());
  config.compare_variants = {"bt", "nonsense"};
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = ExperimentConfig{};
  config.out_dir.clear();
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = ExperimentConfig{};
  config.compare_seeds.clear();
  CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("model config header round trips non-default architectures") {
  BackboneConfig backbone;
  backbone.layers = 3;
  backbone.model_dim = 24;
  backbone.special_token = true;
  HeadConfig head;
  head.kind = HeadKind::SpecialToken;
  head.layer_indices = {1, 3};
  head.attn_heads = 2;

  BackboneConfig backbone2;
  HeadConfig head2;
  parse_model_config_json(model_config_json(backbone, head), &backbone2, &head2);
  CHECK(backbone2.layers == 3);
  CHECK(backbone2.model_dim == 24);
  CHECK(backbone2.special_token == true);
  CHECK(head2.kind == HeadKind::SpecialToken);
  CHECK(head2.layer_indices == std::vector<int>{1, 3});
  CHECK(head2.attn_heads == 2);

  CHECK_THROWS_AS(parse_model_config_json("{]", &backbone2, &head2), DataError);
}

TEST_CASE("checkpoints round trip bitwise") {
  TempDir tmp;
  const RewardModel model = small_model(404);
  const std::string path = tmp.file("model.ckpt");
  save_checkpoint(path, model);

  const RewardModel loaded = load_checkpoint(path);
  CHECK(loaded.backbone.layers == model.backbone.layers);
  CHECK(loaded.backbone.model_dim == model.backbone.model_dim);
  CHECK(loaded.head.kind == model.head.kind);
  CHECK(loaded.head.layer_indices == model.head.layer_indices);
  REQUIRE(loaded.params.names() == model.params.names());
  for (const auto& name : model.params.names()) {
    const Tensor& a = model.params.get(name);
    const Tensor& b = loaded.params.get(name);
    REQUIRE(a.shape == b.shape);
    for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == b.data[i]);
  }

  // Saving the loaded model reproduces the file byte-for-byte.
  const std::string path2 = tmp.file("model2.ckpt");
  save_checkpoint(path2, loaded);
  CHECK(read_file(path) == read_file(path2));
}

TEST_CASE("loading rejects corruption, truncation, and junk") {
  TempDir tmp;
  const std::string path = tmp.file("model.ckpt");
  save_checkpoint(path, small_model(7));
  const std::string good = read_file(path);

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(tmp.file("nope.ckpt")), DataError);
  }
  SUBCASE("wrong magic") {
    std::string bad = good;
    bad[0] = 'X';
    write_file(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), DataError);
  }
  SUBCASE("flipped payload byte fails the checksum") {
    std::string bad = good;
    bad[bad.size() / 2] = static_cast<char>(bad[bad.size() / 2] ^ 0x40);
    write_file(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), DataError);
  }
  SUBCASE("truncation") {
    write_file(path, good.substr(0, good.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(path), DataError);
  }
  SUBCASE("unsupported version, with a valid checksum") {
    std::string bad = good;
    bad[4] = 99;  // version u32 starts right after the magic
    // Re-sign the body so the version gate itself is what rejects the file.
    const std::string body = bad.substr(4, bad.size() - 4 - 8);
    const std::uint64_t sum = fnv1a64(body);
    char tail[8];
    std::memcpy(tail, &sum, 8);
    bad.replace(bad.size() - 8, 8, tail, 8);
    write_file(path, bad);
    bool threw = false;
    try {
      load_checkpoint(path);
    } catch (const DataError& e) {
      threw = true;
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
    CHECK(threw);
  }
  SUBCASE("trailing bytes") {
    write_file(path, good + "junk");
    CHECK_THROWS_AS(load_checkpoint(path), DataError);
  }
}
