// Corpus generation, annotator simulation, pair construction, and JSONL
// round-trips, checked against the documented contracts.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_set>

#include "doctest.h"
#include "rmlab/corpus.hpp"
#include "rmlab/jsonl.hpp"

using namespace rmlab;

namespace {

bool same_sample(const SyntheticSample& a, const SyntheticSample& b) {
  return a.sample_id == b.sample_id && a.prompt_id == b.prompt_id &&
         a.dimension == b.dimension && a.latent_quality == b.latent_quality &&
         a.shortcut == b.shortcut && a.features == b.features && a.split == b.split &&
         a.extra == b.extra;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

std::string temp_path(const char* name) {
  return std::string("/tmp/rmlab_test_") + name;
}

SyntheticSample mini_sample(const std::string& id, const std::string& prompt, Split split) {
  SyntheticSample s;
  s.sample_id = id;
  s.prompt_id = prompt;
  s.dimension = "visual_quality";
  s.features = {0.0};
  s.split = split;
  return s;
}

}  // namespace

TEST_CASE("corpus generation is a pure function of the config") {
  CorpusConfig cfg;
  cfg.prompts = 20;
  cfg.samples_per_prompt = 5;
  cfg.seed = 77;
  auto a = generate_corpus(cfg);
  auto b = generate_corpus(cfg);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    CHECK(same_sample(a.samples[i], b.samples[i]));
  CHECK(a.labels == b.labels);

  cfg.seed = 78;
  auto c = generate_corpus(cfg);
  bool differs = false;
  for (std::size_t i = 0; i < a.samples.size() && i < c.samples.size(); ++i)
    differs |= !same_sample(a.samples[i], c.samples[i]);
  CHECK(differs);
}

TEST_CASE("threshold at -100 passes everything") {
  CorpusConfig cfg;
  cfg.prompts = 10;
  cfg.samples_per_prompt = 4;
  cfg.pass_threshold = -100.0;
  auto gen = generate_corpus(cfg);
  for (const auto& [id, v] : gen.labels) CHECK(v == Verdict::Pass);
}

TEST_CASE("empirical shortcut correlation tracks rho") {
  CorpusConfig cfg;
  cfg.prompts = 1000;
  cfg.samples_per_prompt = 10;
  cfg.train_fraction = 1.0;
  cfg.id_eval_fraction = 0.0;
  cfg.shortcut_rho_train = 0.9;
  cfg.seed = 5;
  auto gen = generate_corpus(cfg);
  REQUIRE(gen.samples.size() == 10000);
  std::vector<double> bits, passes;
  for (const auto& s : gen.samples) {
    bits.push_back(s.shortcut);
    passes.push_back(gen.labels.at(s.sample_id) == Verdict::Pass ? 1.0 : 0.0);
  }
  CHECK(std::fabs(pearson(bits, passes) - 0.9) < 0.05);

  cfg.train_fraction = 0.0;  // everything lands in ood_eval
  cfg.shortcut_rho_ood = 0.0;
  auto ood = generate_corpus(cfg);
  bits.clear();
  passes.clear();
  for (const auto& s : ood.samples) {
    CHECK(s.split == Split::OodEval);
    bits.push_back(s.shortcut);
    passes.push_back(ood.labels.at(s.sample_id) == Verdict::Pass ? 1.0 : 0.0);
  }
  CHECK(std::fabs(pearson(bits, passes)) < 0.05);
}

TEST_CASE("latent quality respects the boundary margin") {
  CorpusConfig cfg;
  cfg.prompts = 50;
  cfg.samples_per_prompt = 10;
  cfg.boundary_margin = 0.4;
  auto gen = generate_corpus(cfg);
  for (const auto& s : gen.samples)
    CHECK(std::fabs(s.latent_quality - cfg.pass_threshold) >= 0.4);
}

TEST_CASE("degenerate corpus configs are rejected") {
  CorpusConfig cfg;
  cfg.prompts = 0;
  CHECK_THROWS_AS(generate_corpus(cfg), ConfigError);
  cfg.prompts = 5;
  cfg.shortcut_rho_train = 1.5;
  CHECK_THROWS_AS(generate_corpus(cfg), ConfigError);
  cfg.shortcut_rho_train = 0.9;
  cfg.train_fraction = 0.9;
  cfg.id_eval_fraction = 0.2;
  CHECK_THROWS_AS(generate_corpus(cfg), ConfigError);
}

TEST_CASE("zero annotator noise is unanimous and matches threshold labels") {
  CorpusConfig cfg;
  cfg.prompts = 10;
  cfg.samples_per_prompt = 5;
  auto gen = generate_corpus(cfg);
  auto ann = simulate_annotators(gen.samples, cfg, 4, 0.0, 9);
  REQUIRE(ann.size() == gen.samples.size() * 4);
  std::unordered_map<std::string, std::set<Verdict>> verdicts;
  for (const auto& r : ann) verdicts[r.sample_id].insert(r.verdict);
  for (const auto& [id, vs] : verdicts) {
    CHECK(vs.size() == 1);
    CHECK(*vs.begin() == gen.labels.at(id));
  }
}

TEST_CASE("moderate annotator noise yields partial agreement") {
  CorpusConfig cfg;
  cfg.prompts = 100;
  cfg.samples_per_prompt = 10;
  cfg.boundary_margin = 0.0;  // let samples sit near the threshold
  auto gen = generate_corpus(cfg);
  auto ann = simulate_annotators(gen.samples, cfg, 2, 0.5, 3);
  // pairwise agreement across the two annotators
  std::unordered_map<std::string, std::vector<Verdict>> by_sample;
  for (const auto& r : ann) by_sample[r.sample_id].push_back(r.verdict);
  int agree = 0, total = 0;
  for (const auto& [id, vs] : by_sample) {
    REQUIRE(vs.size() == 2);
    agree += vs[0] == vs[1];
    ++total;
  }
  const double frac = static_cast<double>(agree) / total;
  CHECK(frac > 0.5);
  CHECK(frac < 1.0);
}

TEST_CASE("consensus uses majority only with three or more votes") {
  CorpusConfig cfg;
  cfg.prompts = 30;
  cfg.samples_per_prompt = 5;
  cfg.boundary_margin = 0.0;
  auto gen = generate_corpus(cfg);

  // k=2: falls back to threshold labels even under heavy noise
  auto two = simulate_annotators(gen.samples, cfg, 2, 5.0, 4);
  auto labels2 = consensus_labels(gen.samples, two, cfg);
  for (const auto& s : gen.samples) CHECK(labels2.at(s.sample_id) == gen.labels.at(s.sample_id));

  // k=5 under heavy noise: majority must flip at least one label
  auto five = simulate_annotators(gen.samples, cfg, 5, 5.0, 4);
  auto labels5 = consensus_labels(gen.samples, five, cfg);
  int flipped = 0;
  for (const auto& s : gen.samples)
    flipped += labels5.at(s.sample_id) != gen.labels.at(s.sample_id);
  CHECK(flipped > 0);

  // and the majority is what it claims to be
  std::unordered_map<std::string, std::pair<int, int>> votes;
  for (const auto& r : five) {
    auto& v = votes[r.sample_id];
    v.first += r.verdict == Verdict::Pass;
    ++v.second;
  }
  for (const auto& s : gen.samples) {
    const auto& v = votes.at(s.sample_id);
    if (2 * v.first > v.second) CHECK(labels5.at(s.sample_id) == Verdict::Pass);
    if (2 * v.first < v.second) CHECK(labels5.at(s.sample_id) == Verdict::Fail);
  }
}

TEST_CASE("two winners one loser enumerate exactly") {
  std::vector<SyntheticSample> samples = {mini_sample("w1", "pA", Split::Train),
                                          mini_sample("w2", "pB", Split::Train),
                                          mini_sample("l", "pC", Split::Train)};
  std::unordered_map<std::string, Verdict> labels = {
      {"w1", Verdict::Pass}, {"w2", Verdict::Pass}, {"l", Verdict::Fail}};
  PairBuildSpec spec;
  spec.strategy = PairStrategy::CrossPrompt;
  spec.n_win_lose = PairBuildSpec::kExhaustive;
  spec.n_win_tie = PairBuildSpec::kExhaustive;
  auto pairs = build_pairs(samples, labels, Split::Train, spec);
  REQUIRE(pairs.size() == 3);
  std::set<std::tuple<std::string, std::string, std::string>> got;
  for (const auto& p : pairs)
    got.insert({p.id_i, p.id_j, relation_name(p.relation)});
  std::set<std::tuple<std::string, std::string, std::string>> expect = {
      {"w1", "l", "Win"}, {"w2", "l", "Win"}, {"w1", "w2", "Tie"}};
  CHECK(got == expect);
}

TEST_CASE("single winner and loser cross-prompt pair") {
  std::vector<SyntheticSample> samples = {mini_sample("a", "p1", Split::Train),
                                          mini_sample("b", "p2", Split::Train)};
  std::unordered_map<std::string, Verdict> labels = {{"a", Verdict::Pass},
                                                     {"b", Verdict::Fail}};
  PairBuildSpec spec;
  spec.strategy = PairStrategy::CrossPrompt;
  spec.n_win_lose = 1;
  spec.n_win_tie = 0;
  auto pairs = build_pairs(samples, labels, Split::Train, spec);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].id_i == "a");
  CHECK(pairs[0].id_j == "b");
  CHECK(pairs[0].relation == PairRelation::Win);
  CHECK(pairs[0].pairing == Pairing::CrossPrompt);
}

TEST_CASE("pair label invariants hold on a generated corpus") {
  CorpusConfig cfg;
  cfg.prompts = 40;
  cfg.samples_per_prompt = 8;
  auto gen = generate_corpus(cfg);
  for (PairStrategy st :
       {PairStrategy::InPrompt, PairStrategy::CrossPrompt, PairStrategy::Hybrid}) {
    PairBuildSpec spec;
    spec.strategy = st;
    spec.n_win_lose = 300;
    spec.n_win_tie = 150;
    spec.seed = 11;
    auto pairs = build_pairs(gen.samples, gen.labels, Split::Train, spec);
    CHECK(!pairs.empty());
    auto index = index_samples(gen.samples);
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    for (const auto& p : pairs) {
      if (p.relation == PairRelation::Win) {
        CHECK(gen.labels.at(p.id_i) == Verdict::Pass);
        CHECK(gen.labels.at(p.id_j) == Verdict::Fail);
      } else {
        CHECK(gen.labels.at(p.id_i) == Verdict::Pass);
        CHECK(gen.labels.at(p.id_j) == Verdict::Pass);
        CHECK(p.id_i < p.id_j);
      }
      CHECK(p.id_i != p.id_j);
      const bool same_prompt =
          index.at(p.id_i)->prompt_id == index.at(p.id_j)->prompt_id;
      CHECK((p.pairing == Pairing::InPrompt) == same_prompt);
      if (st == PairStrategy::InPrompt) CHECK(same_prompt);
      CHECK(seen.insert({p.id_i, p.id_j, relation_name(p.relation)}).second);
    }
  }
}

TEST_CASE("requests beyond availability are capped and counts bounded") {
  CorpusConfig cfg;
  cfg.prompts = 6;
  cfg.samples_per_prompt = 4;
  cfg.train_fraction = 1.0;
  cfg.id_eval_fraction = 0.0;
  auto gen = generate_corpus(cfg);
  int W = 0, L = 0;
  for (const auto& [id, v] : gen.labels) (v == Verdict::Pass ? W : L)++;
  PairBuildSpec spec;
  spec.strategy = PairStrategy::CrossPrompt;
  spec.n_win_lose = 1000000;
  spec.n_win_tie = 1000000;
  auto pairs = build_pairs(gen.samples, gen.labels, Split::Train, spec);
  const std::size_t bound =
      static_cast<std::size_t>(W) * L + static_cast<std::size_t>(W) * (W - 1) / 2;
  CHECK(pairs.size() == bound);
}

TEST_CASE("single-video prompts feed cross-prompt but not in-prompt pairing") {
  CorpusConfig cfg;
  cfg.prompts = 40;
  cfg.samples_per_prompt = 1;  // every prompt yields a single sample
  cfg.train_fraction = 1.0;
  cfg.id_eval_fraction = 0.0;
  auto gen = generate_corpus(cfg);

  PairBuildSpec spec;
  spec.strategy = PairStrategy::InPrompt;
  spec.n_win_lose = PairBuildSpec::kExhaustive;
  spec.n_win_tie = PairBuildSpec::kExhaustive;
  auto in_prompt = build_pairs(gen.samples, gen.labels, Split::Train, spec);
  CHECK(in_prompt.empty());

  spec.strategy = PairStrategy::CrossPrompt;
  auto cross = build_pairs(gen.samples, gen.labels, Split::Train, spec);
  CHECK(!cross.empty());
}

TEST_CASE("missing classes raise a data error") {
  std::vector<SyntheticSample> samples = {mini_sample("a", "p1", Split::Train),
                                          mini_sample("b", "p2", Split::Train)};
  std::unordered_map<std::string, Verdict> labels = {{"a", Verdict::Pass},
                                                     {"b", Verdict::Pass}};
  PairBuildSpec spec;
  spec.n_win_lose = 5;
  spec.n_win_tie = 0;
  CHECK_THROWS_AS(build_pairs(samples, labels, Split::Train, spec), DataError);
  spec.n_win_lose = 0;
  spec.n_win_tie = 5;
  CHECK_NOTHROW(build_pairs(samples, labels, Split::Train, spec));
  spec.n_lose_tie = 2;
  CHECK_THROWS_AS(build_pairs(samples, labels, Split::Train, spec), DataError);
}

TEST_CASE("lose-tie pairs only appear when requested") {
  CorpusConfig cfg;
  cfg.prompts = 20;
  cfg.samples_per_prompt = 6;
  auto gen = generate_corpus(cfg);
  PairBuildSpec spec;
  spec.n_win_lose = 50;
  spec.n_win_tie = 20;
  spec.n_lose_tie = 0;
  auto base = build_pairs(gen.samples, gen.labels, Split::Train, spec);
  for (const auto& p : base)
    if (p.relation == PairRelation::Tie) CHECK(gen.labels.at(p.id_i) == Verdict::Pass);

  spec.n_lose_tie = 15;
  auto extended = build_pairs(gen.samples, gen.labels, Split::Train, spec);
  int lose_ties = 0;
  for (const auto& p : extended)
    if (p.relation == PairRelation::Tie && gen.labels.at(p.id_i) == Verdict::Fail) {
      CHECK(gen.labels.at(p.id_j) == Verdict::Fail);
      ++lose_ties;
    }
  CHECK(lose_ties == 15);
}

TEST_CASE("jsonl round trip preserves every field") {
  CorpusConfig cfg;
  cfg.prompts = 10;
  cfg.samples_per_prompt = 10;
  auto gen = generate_corpus(cfg);
  REQUIRE(gen.samples.size() == 100);
  const std::string path = temp_path("samples.jsonl");
  write_samples(path, gen.samples);
  auto back = read_samples(path);
  REQUIRE(back.size() == gen.samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(same_sample(back[i], gen.samples[i]));

  // writing what was read reproduces the file byte for byte
  const std::string path2 = temp_path("samples2.jsonl");
  write_samples(path2, back);
  std::ifstream f1(path), f2(path2);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}

TEST_CASE("empty jsonl file reads as empty") {
  const std::string path = temp_path("empty.jsonl");
  std::ofstream(path).close();
  CHECK(read_samples(path).empty());
  CHECK(read_annotations(path).empty());
  CHECK(read_pairs(path).empty());
}

TEST_CASE("schema violations name the field and line") {
  const std::string path = temp_path("bad_verdict.jsonl");
  {
    std::ofstream out(path);
    out << R"({"sample_id":"s1","annotator_id":"a0","dimension":"d","verdict":"Pass"})" << "\n";
    out << R"({"sample_id":"s2","annotator_id":"a0","dimension":"d","verdict":"Maybe"})" << "\n";
  }
  try {
    read_annotations(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("verdict") != std::string::npos);
    CHECK(msg.find(":2") != std::string::npos);
    CHECK(msg.find("Maybe") != std::string::npos);
  }
}

TEST_CASE("malformed lines report their line number") {
  const std::string path = temp_path("malformed.jsonl");
  {
    std::ofstream out(path);
    out << R"({"id_i":"a","id_j":"b","relation":"Win","pairing":"InPrompt"})" << "\n";
    out << "{not json\n";
  }
  try {
    read_pairs(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("unknown fields are kept unless strict") {
  const std::string path = temp_path("extra_field.jsonl");
  {
    std::ofstream out(path);
    out << R"({"id_i":"a","id_j":"b","note":"hand checked","relation":"Win","pairing":"CrossPrompt"})"
        << "\n";
  }
  auto pairs = read_pairs(path, false);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].extra.find("hand checked") != std::string::npos);

  const std::string path2 = temp_path("extra_field2.jsonl");
  write_pairs(path2, pairs);
  auto again = read_pairs(path2, false);
  REQUIRE(again.size() == 1);
  CHECK(again[0].extra == pairs[0].extra);

  CHECK_THROWS_AS(read_pairs(path, true), DataError);
}

TEST_CASE("missing required fields are fatal") {
  const std::string path = temp_path("missing_field.jsonl");
  {
    std::ofstream out(path);
    out << R"({"sample_id":"s1","annotator_id":"a0","dimension":"d"})" << "\n";
  }
  try {
    read_annotations(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("verdict") != std::string::npos);
  }
}
