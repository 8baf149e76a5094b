#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hindsight/config.hpp"
#include "hindsight/harness.hpp"
#include "hindsight/plot.hpp"

using namespace hindsight;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(Method method) {
  ExperimentConfig c;
  c.method = method;
  c.seed = 5;
  c.total_env_steps = 600;
  c.eval_every = 200;
  c.eval_episodes = 5;
  c.random_steps = 200;
  c.update_after = 200;
  c.updates_per_step = 0.25;
  c.sac.batch = 32;
  c.sac.hidden = {32, 32};
  c.sac.encoder.hidden = 8;
  c.hipss.hidden = 16;
  c.hipss.batch = 8;
  c.hipss.warmup = 1;
  return c;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("hindsight_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config keys round trip through text") {
  ExperimentConfig c;
  c.set("mode", "color_shape");
  c.set("method", "HIPSS");
  c.set("strategy", "final");
  c.set("repr", "learned_embedding");
  c.set("steps", "1234");
  c.set("sac.hidden", "64, 32");
  c.set("sac.auto_alpha", "false");
  c.set("hipss.lr", "0.002");
  CHECK(c.mode == TaskMode::ColorShape);
  CHECK(c.method == Method::HIPSS);
  CHECK(c.heir.strategy == ReplayStrategy::Final);
  CHECK(c.sac.encoder.representation == WordRepresentation::LearnedEmbedding);
  CHECK(c.total_env_steps == 1234);
  CHECK(c.sac.hidden == std::vector<std::size_t>{64, 32});
  CHECK_FALSE(c.sac.auto_alpha);
  CHECK(c.hipss.lr == 0.002);

  ExperimentConfig d;
  apply_config_text(d, "# comment\n\n" + config_text(c));
  CHECK(d.to_map() == c.to_map());
  CHECK(d.hipss.lr == c.hipss.lr);
}

TEST_CASE("config errors are reported with the offending key or line") {
  ExperimentConfig c;
  CHECK_THROWS_AS(c.set("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(c.set("seed", "-3"), ConfigError);
  CHECK_THROWS_AS(c.set("sac.gamma", "0.9x"), ConfigError);
  CHECK_THROWS_AS(c.set("mode", "colour"), ConfigError);
  CHECK_THROWS_AS(c.set("save_trace", "maybe"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "seed 3\n"), ConfigError);
  try {
    apply_config_text(c, "seed = 1\nheir.k = x\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  ExperimentConfig bad;
  bad.eval_every = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.sac.tau = 2.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(run_experiment(bad), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.txt"), ConfigError);
}

TEST_CASE("metrics rows format and parse") {
  MetricsRow r{5000, 0.42, 0.5, std::nullopt, 7000, 0.125};
  CHECK(format_metrics_row(r) == "5000,0.420000,0.500000,,7000,0.125000");
  const auto dir = scratch("rows");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "metrics.csv");
    f << kMetricsHeader << "\n" << format_metrics_row(r) << "\n" << format_metrics_row({10000, 1.0}) << "\n";
  }
  const auto rows = read_metrics(dir / "metrics.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].env_steps == 5000);
  CHECK(rows[0].hipss_train_acc == 0.5);
  CHECK_FALSE(rows[0].hipss_val_acc.has_value());
  CHECK(rows[1].success_rate == 1.0);
  {
    std::ofstream f(dir / "bad.csv");
    f << "steps,success\n1,0\n";
  }
  CHECK_THROWS(read_metrics(dir / "bad.csv"));
  fs::remove_all(dir);
}

TEST_CASE("baseline policies through the evaluator") {
  const auto expert = evaluate_policy(TaskMode::ColorShape, {}, 50, 3, expert_policy());
  CHECK(expert.episodes == 50);
  CHECK(expert.success_rate() >= 0.95);
  const auto random = evaluate_policy(TaskMode::Default, {}, 200, 3, random_policy(3));
  CHECK(random.success_rate() <= 0.10);
  CHECK(random.success_rate() >= 0.0);
}

TEST_CASE("LCSAC never relabels, rows follow the evaluation cadence") {
  auto cfg = tiny(Method::LCSAC);
  cfg.warmstart_episodes = 4;  // failures with events that must stay unrelabeled
  const auto result = run_experiment(cfg);
  REQUIRE(result.rows.size() == 4);
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& r = result.rows[i];
    CHECK(r.env_steps == 200 * i);
    CHECK(r.relabel_fraction == 0.0);
    CHECK(r.success_rate >= 0.0);
    CHECK(r.success_rate <= 1.0);
    CHECK_FALSE(r.hipss_train_acc.has_value());
  }
  CHECK(result.counters.events >= 4);
  CHECK(result.counters.relabels == 0);
  CHECK(result.buffer.relabeled == 0);
  CHECK(result.counters.agent_updates > 0);
}

TEST_CASE("HEIR with a hindsight-rich warm start stores relabeled transitions") {
  auto cfg = tiny(Method::HEIR);
  cfg.warmstart_episodes = 4;
  const auto result = run_experiment(cfg);
  CHECK(result.counters.events >= 4);
  CHECK(result.counters.relabels > 0);
  CHECK(result.counters.relabels <= result.counters.events);
  CHECK(result.buffer.relabeled > 0);
  CHECK(result.rows.back().relabel_fraction > 0.0);
  CHECK(result.buffer.reward_success + result.buffer.reward_reduced + result.buffer.reward_failure ==
        result.buffer.size);
}

TEST_CASE("HIPSS collects successes, reports accuracy and relabels only after warmup") {
  auto cfg = tiny(Method::HIPSS);
  cfg.total_env_steps = 1600;
  cfg.eval_every = 800;
  cfg.random_steps = 1600;  // uniform actions succeed now and then
  const auto result = run_experiment(cfg);
  const auto& c = result.counters;
  CHECK(c.relabels <= c.events);
  CHECK(c.relabels + c.malformed_predictions <= c.events);
  if (c.hipss_samples > 0) CHECK(c.hipss_updates > 0);
  const auto& last = result.rows.back();
  if (last.hipss_train_acc) {
    CHECK(*last.hipss_train_acc >= 0.0);
    CHECK(*last.hipss_train_acc <= 1.0);
  }
  CHECK(c.hipss_samples <= c.successes);
}

TEST_CASE("same seed gives a byte-identical metrics file and outputs are complete") {
  auto cfg = tiny(Method::HEIR);
  cfg.warmstart_episodes = 2;
  const auto a = scratch("det_a"), b = scratch("det_b");
  run_experiment(cfg, {a, {}});
  run_experiment(cfg, {b, {}});
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  for (const char* f : {"metrics.csv", "config.txt", "vocab.txt", "agent.ckpt", "summary.json"}) CHECK(fs::exists(a / f));
  CHECK(load_config(a / "config.txt").to_map() == cfg.to_map());

  auto other = cfg;
  other.seed = 6;
  const auto c = scratch("det_c");
  run_experiment(other, {c, {}});
  CHECK(slurp(a / "metrics.csv") != slurp(c / "metrics.csv"));

  const auto eval = evaluate_checkpoint(a / "agent.ckpt", TaskMode::Default, 10, 1);
  CHECK(eval.episodes == 10);
  CHECK(eval.success_rate() <= 1.0);
  CHECK(evaluate_checkpoint(a / "agent.ckpt", std::nullopt, 10, 1).successes == eval.successes);
  CHECK_THROWS_AS(evaluate_checkpoint(a / "agent.ckpt", TaskMode::Color, 10, 1), EvaluationError);
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST_CASE("traces are one JSON object per step") {
  auto cfg = tiny(Method::HEIR);
  cfg.total_env_steps = 120;
  cfg.eval_every = 120;
  cfg.save_trace = true;
  const auto dir = scratch("trace");
  run_experiment(cfg, {dir, {}});
  std::ifstream in(dir / "traces.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    CHECK(line.front() == '{');
    ++n;
  }
  CHECK(n == 120);
  fs::remove_all(dir);
}

TEST_CASE("aggregation: mean, standard error and grid resampling") {
  const Curve a{{0, 10, 20}, {0.0, 0.5, 1.0}};
  const Curve b{{0, 10, 20}, {0.2, 0.3, 0.4}};
  const Curve c{{0, 10, 20}, {0.1, 0.4, 0.7}};
  const Curve runs[] = {a, b, c};
  const auto band = aggregate("x", runs);
  REQUIRE(band.x == std::vector<double>{0, 10, 20});
  CHECK(band.mean[1] == doctest::Approx(0.4));
  // sample sd of {0.5, 0.3, 0.4} is 0.1; standard error 0.1 / sqrt(3)
  CHECK(band.stderr_mean[1] == doctest::Approx(0.1 / std::sqrt(3.0)));

  const Curve single[] = {a};
  const auto one = aggregate("y", single);
  CHECK(one.stderr_mean == std::vector<double>{0, 0, 0});

  const Curve coarse{{0, 20}, {0.0, 1.0}};
  const Curve fine{{0, 5, 10, 15, 25}, {0.0, 0.0, 0.0, 0.0, 0.0}};
  const Curve mixed[] = {coarse, fine};
  const auto grid = common_grid(mixed);
  CHECK(grid == std::vector<double>{0, 5, 10, 15, 20});
  CHECK(interpolate(coarse, 5) == doctest::Approx(0.25));
  CHECK(interpolate(fine, 20) == 0.0);
  CHECK_THROWS_AS(interpolate(coarse, 30), std::out_of_range);

  CHECK(normalized_auc(coarse) == doctest::Approx(0.5));
  CHECK(normalized_auc(Curve{{0, 10, 20}, {1, 1, 1}}) == doctest::Approx(1.0));
}

TEST_CASE("plots: deterministic, shaded only for several runs") {
  const auto root = scratch("plot");
  std::vector<fs::path> csvs;
  for (int seed = 0; seed < 3; ++seed) {
    const auto dir = root / ("run" + std::to_string(seed));
    fs::create_directories(dir);
    ExperimentConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(seed);
    std::ofstream(dir / "config.txt") << config_text(cfg);
    std::ofstream f(dir / "metrics.csv");
    f << kMetricsHeader << "\n";
    for (int s = 0; s <= 4; ++s) f << format_metrics_row({static_cast<std::size_t>(s * 100), 0.1 * s + 0.05 * seed}) << "\n";
    csvs.push_back(dir / "metrics.csv");
  }
  const auto out1 = plot_metrics(csvs, root / "fig1");
  const auto out2 = plot_metrics(csvs, root / "fig2");
  REQUIRE(out1.size() == 1);
  CHECK(out1[0].filename() == "success_default.svg");
  const auto svg = slurp(out1[0]);
  CHECK(svg == slurp(out2[0]));
  CHECK(svg.find("<polygon") != std::string::npos);
  CHECK(svg.find("(n=3)") != std::string::npos);

  const std::vector<fs::path> one{csvs[0]};
  const auto single = plot_metrics(one, root / "fig3");
  CHECK(slurp(single[0]).find("<polygon") == std::string::npos);
  CHECK_THROWS_AS(plot_metrics(std::vector<fs::path>{}, root / "fig4"), std::invalid_argument);
  fs::remove_all(root);
}
