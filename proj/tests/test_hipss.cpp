#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "hindsight/harness.hpp"
#include "hindsight/hipss.hpp"
#include "json.hpp"

using namespace hindsight;

namespace {

StateSequence ramp(std::size_t length, std::size_t dim, double offset) {
  StateSequence s(length, std::vector<double>(dim));
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t d = 0; d < dim; ++d) s[t][d] = std::sin(offset + 0.3 * static_cast<double>(t) + static_cast<double>(d));
  return s;
}

HipssConfig small_config() {
  HipssConfig c;
  c.hidden = 16;
  c.embedding_dim = 8;
  c.batch = 8;
  return c;
}

}  // namespace

TEST_CASE("subsample keeps stride, final state and the last max states") {
  std::vector<std::vector<double>> states;
  for (int i = 0; i < 10; ++i) states.push_back({static_cast<double>(i)});
  auto s = subsample_states(states, 2, 32);
  std::vector<double> got;
  for (const auto& v : s) got.push_back(v[0]);
  CHECK(got == std::vector<double>{0, 2, 4, 6, 8, 9});

  s = subsample_states(std::span(states).first(9), 2, 32);
  got.clear();
  for (const auto& v : s) got.push_back(v[0]);
  CHECK(got == std::vector<double>{0, 2, 4, 6, 8});

  s = subsample_states(states, 2, 3);
  got.clear();
  for (const auto& v : s) got.push_back(v[0]);
  CHECK(got == std::vector<double>{6, 8, 9});

  CHECK(subsample_states(std::span(states).first(1), 2, 4).size() == 1);
  CHECK_THROWS_AS(subsample_states({}, 2, 4), std::invalid_argument);
}

TEST_CASE("dataset split keeps one in six within one sample, deterministic per seed") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (std::size_t n : {1u, 5u, 6u, 7u, 100u, 1001u}) {
      Rng rng(seed);
      HipssDataset d(6, rng);
      for (std::size_t i = 0; i < n; ++i) d.add({{{static_cast<double>(i)}}, {kEos}});
      CHECK(d.train().size() + d.validation().size() == n);
      const double expected = static_cast<double>(n) / 6.0;
      CHECK(std::abs(static_cast<double>(d.validation().size()) - expected) <= 1.0);

      Rng again(seed);
      HipssDataset e(6, again);
      for (std::size_t i = 0; i < n; ++i) e.add({{{static_cast<double>(i)}}, {kEos}});
      REQUIRE(e.validation().size() == d.validation().size());
      for (std::size_t i = 0; i < e.validation().size(); ++i) CHECK(e.validation()[i].states == d.validation()[i].states);
    }
  }
  Rng rng(0);
  CHECK_THROWS_AS(HipssDataset(1, rng), std::invalid_argument);
}

TEST_CASE("dataset serializes one JSON object per sample") {
  Rng rng(3);
  HipssDataset d(2, rng);
  d.add({{{0.5, 1.0}}, {3, 6, 7, 10, kEos}});
  d.add({{{0.25, 2.0}, {1.0, 1.0}}, {4, 6, 8, 11, kEos}});
  std::stringstream out;
  d.write(out);
  std::string line;
  int train = 0, val = 0;
  while (std::getline(out, line)) {
    auto j = nlohmann::json::parse(line);
    (j["split"] == "train" ? train : val)++;
    CHECK(j["tokens"].size() == 5);
    CHECK(j["states"].is_array());
  }
  CHECK(train == 1);
  CHECK(val == 1);
}

TEST_CASE("sequence likelihood factorizes into per-word probabilities") {
  Rng rng(11);
  const Vocabulary vocab(TaskMode::Default);
  Seq2Seq model(7, vocab.size(), small_config(), rng);
  for (int trial = 0; trial < 20; ++trial) {
    const auto states = ramp(3 + trial % 9, 7, 0.1 * trial);
    std::vector<Token> target{static_cast<Token>(3 + trial % 2), 6, 7, static_cast<Token>(10 + trial % 3), kEos};
    const auto r = model.teacher_forced(states, target);
    REQUIRE(r.probabilities.rows() == target.size());
    double product = 1.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      double row_sum = 0.0;
      for (std::size_t v = 0; v < vocab.size(); ++v) row_sum += r.probabilities.at(i, v);
      CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(r.target_probability[i] == r.probabilities.at(i, target[i]));
      product *= r.target_probability[i];
    }
    CHECK(std::abs(std::exp(-r.loss) - product) <= 1e-10);
  }
}

TEST_CASE("batched loss equals the mean of single-sample losses") {
  Rng rng(5);
  Seq2Seq model(4, 13, small_config(), rng);
  std::vector<HipssSample> samples;
  for (int i = 0; i < 5; ++i)
    samples.push_back({ramp(2 + 3 * i, 4, i), {static_cast<Token>(3 + i % 2), 6, 7, 10, kEos}});
  samples[2].tokens = {kEos};  // shorter target exercises the mask
  std::vector<const HipssSample*> ptrs;
  double expected = 0.0;
  for (const auto& s : samples) {
    ptrs.push_back(&s);
    expected += model.teacher_forced(s.states, s.tokens).loss;
  }
  Graph g;
  Binding bind(g, static_cast<const ParameterSet&>(model.params()));
  CHECK(model.loss(bind, ptrs).value().item() == doctest::Approx(expected / 5.0).epsilon(1e-12));
}

TEST_CASE("untrained model is near chance and accuracy is a fraction") {
  Rng rng(2);
  const Vocabulary vocab(TaskMode::ColorShape);
  Seq2Seq model(9, vocab.size(), small_config(), rng);
  std::vector<HipssSample> samples;
  Rng pick(9);
  const auto goals = enumerate_goals(TaskMode::ColorShape);
  for (int i = 0; i < 200; ++i) {
    const auto inst = sample_instruction(vocab, goals[uniform_index(pick, 0, goals.size() - 1)], pick);
    samples.push_back({ramp(5, 9, i), inst.tokens});
  }
  const double acc = word_accuracy(model, samples);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  CHECK(acc < 0.35);
  CHECK_THROWS_AS(word_accuracy(model, std::span<const HipssSample>{}), std::invalid_argument);
}

TEST_CASE("overfits a small scripted corpus") {
  const EpisodeConfig ep;
  HipssConfig cfg;
  const auto data = generate_corpus(TaskMode::Default, ep, cfg, 40, 7);
  std::vector<HipssSample> samples(data.train().begin(), data.train().end());
  samples.insert(samples.end(), data.validation().begin(), data.validation().end());
  samples.resize(std::min<std::size_t>(samples.size(), 16));
  REQUIRE(samples.size() == 16);
  Rng rng(1);
  Seq2Seq model(feature_dim(TaskMode::Default), Vocabulary(TaskMode::Default).size(), cfg, rng);
  Adam opt(model.params(), {.lr = cfg.lr});
  double acc = 0.0;
  for (int epoch = 0; epoch < 400 && acc < 1.0; ++epoch) {
    train_epoch(model, samples, opt, rng);
    if (epoch % 10 == 9) acc = word_accuracy(model, samples);
  }
  CHECK(acc == 1.0);
}

TEST_CASE("training is deterministic for a seed") {
  const auto data = generate_corpus(TaskMode::Default, {}, {}, 30, 3);
  auto run = [&] {
    Rng rng(4);
    Seq2Seq model(feature_dim(TaskMode::Default), 13, small_config(), rng);
    Adam opt(model.params(), {.lr = 1e-3});
    train_steps(model, data.train(), opt, rng, 5);
    return model.params()[0].value;
  };
  CHECK(run() == run());
}

TEST_CASE("greedy prediction is bounded and parsed") {
  Rng rng(8);
  const Vocabulary vocab(TaskMode::Default);
  Seq2Seq model(4, vocab.size(), small_config(), rng);
  const auto p = model.predict(ramp(6, 4, 0.0), vocab);
  CHECK(p.tokens.size() >= 1);
  CHECK(p.tokens.size() <= kMaxInstructionTokens);
  CHECK(p.malformed() == !parse_instruction(vocab, p.tokens).has_value());
  CHECK_THROWS_AS(model.predict(ramp(3, 4, 0), Vocabulary(TaskMode::Color)), DimensionError);
}

TEST_CASE("relabel gating: only failed episodes with an event after warmup") {
  Rng rng(1);
  const Vocabulary vocab(TaskMode::Default);
  HipssConfig cfg = small_config();
  cfg.warmup = 3;
  Seq2Seq model(4, vocab.size(), cfg, rng);
  Rng split(0);
  HipssDataset d(6, split);
  const auto states = ramp(4, 4, 0);
  CHECK_FALSE(maybe_relabel(model, d, false, true, states, vocab).has_value());
  while (d.train().size() < 3) d.add({states, {3, 6, 7, 10, kEos}});
  CHECK(maybe_relabel(model, d, false, true, states, vocab).has_value());
  CHECK_FALSE(maybe_relabel(model, d, true, true, states, vocab).has_value());
  CHECK_FALSE(maybe_relabel(model, d, false, false, states, vocab).has_value());
}

TEST_CASE("scripted corpus holds only successful instructions of the mode") {
  const auto data = generate_corpus(TaskMode::Color, {}, {}, 60, 2);
  const Vocabulary vocab(TaskMode::Color);
  CHECK(data.train().size() + data.validation().size() >= 57);
  for (const auto& s : data.train()) {
    CHECK(parse_instruction(vocab, s.tokens).has_value());
    CHECK(s.states.size() <= HipssConfig{}.max_states);
    CHECK(s.states.front().size() == feature_dim(TaskMode::Color));
  }
}

TEST_CASE("invalid token and empty inputs are rejected") {
  Rng rng(1);
  Seq2Seq model(3, 13, small_config(), rng);
  CHECK_THROWS_AS(model.teacher_forced(ramp(2, 3, 0), std::vector<Token>{40}), std::out_of_range);
  CHECK_THROWS_AS(model.teacher_forced({}, std::vector<Token>{kEos}), std::invalid_argument);
  CHECK_THROWS_AS(model.teacher_forced(ramp(2, 4, 0), std::vector<Token>{kEos}), DimensionError);
}
