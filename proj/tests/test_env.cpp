#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "hindsight/env.hpp"

using namespace hindsight;

namespace {

Action random_action(Rng& rng) {
  Action a;
  for (auto& v : a) v = uniform(rng, -1.0, 1.0);
  return a;
}

// Single box object centred at the origin plus a far-away distractor.
WorldState simple_scene() {
  WorldState s;
  s.objects[0] = {"red", ShapeClass::Box, {0.0, 0.0, 0.025}, half_extent_for(ShapeClass::Box), {}, 0.0};
  s.objects[1] = {"green", ShapeClass::Box, {0.2, 0.2, 0.025}, half_extent_for(ShapeClass::Box), {}, 0.0};
  s.effector_pos = {0.0, 0.0, 0.25};
  s.gripper = 0.5;
  return s;
}

Instruction instruction_for(const Vocabulary& v, const char* color) {
  return make_instruction(v, {color, "box", ShapeClass::Box}, "touch");
}

}  // namespace

TEST_CASE("reset is deterministic and covers every goal") {
  Environment a(TaskMode::ColorShape), b(TaskMode::ColorShape);
  a.reset(17);
  b.reset(17);
  CHECK(a.instruction().tokens == b.instruction().tokens);
  CHECK(a.state().effector_pos == b.state().effector_pos);
  CHECK(a.state().objects[0].position == b.state().objects[0].position);

  for (auto mode : all_task_modes()) {
    Environment env(mode);
    std::set<std::pair<std::string, std::string>> seen;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      env.reset(seed);
      const auto& g = env.instruction().goal;
      seen.emplace(g.color, g.shape_synonym);
      const auto& s = env.state();
      // Exactly one referent, and the distractor differs in its property tuple.
      CHECK(referent(s, g) == env.goal_object());
      const auto& d = s.objects[1 - env.goal_object()];
      CHECK_FALSE((d.color == g.color && d.shape_class == g.shape_class));
      const double dx = s.objects[0].position[0] - s.objects[1].position[0];
      const double dy = s.objects[0].position[1] - s.objects[1].position[1];
      CHECK(std::hypot(dx, dy) >= env.config().min_separation);
    }
    CHECK(seen.size() == enumerate_goals(mode).size());
  }
}

TEST_CASE("step kinematics") {
  const EpisodeConfig cfg;
  auto s = simple_scene();

  SUBCASE("zero action leaves the state unchanged except t") {
    auto [next, report] = step_world(s, {0, 0, 0, 0}, cfg);
    CHECK(next.effector_pos == s.effector_pos);
    CHECK(next.objects[0].position == s.objects[0].position);
    CHECK(next.t == s.t + 1);
    CHECK_FALSE(report.contact[0]);
  }

  SUBCASE("small step from beyond the touch radius gives no contact") {
    s.effector_pos = {0.0, 0.0, 0.025 + 0.025 + 0.1};
    auto [next, report] = step_world(s, {0, 0, -0.2, 0}, cfg);  // moves 1 cm
    CHECK(signed_distance(next.objects[0], next.effector_pos) > cfg.touch_radius);
    CHECK_FALSE(report.contact[0]);
  }

  SUBCASE("max steps toward an object reach contact within ceil(distance / max_step)") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      s.effector_pos = {0.0, 0.0, uniform(rng, 0.1, 0.3)};
      const double dist = signed_distance(s.objects[0], s.effector_pos);
      const auto bound = static_cast<std::size_t>(std::ceil(dist / cfg.max_step));
      WorldState cur = s;
      std::size_t steps = 0;
      while (!cur.contact[0] && steps < 100) {
        cur = step_world(cur, {0, 0, -1, 0}, cfg).first;
        ++steps;
      }
      CHECK(steps <= bound);
    }
  }

  SUBCASE("penetration pushes the object and accumulates displacement") {
    s.effector_pos = {0.02, 0.0, 0.06};
    auto [next, report] = step_world(s, {0, 0, -1, 0}, cfg);  // to z = 0.01, inside the box
    CHECK(report.push[0] > 0.0);
    CHECK(next.objects[0].displacement_accum == doctest::Approx(report.push[0]));
    CHECK(next.objects[0].position[0] < 0.0);
  }

  SUBCASE("effector stays inside the workspace") {
    Rng rng(5);
    WorldState cur = s;
    for (int i = 0; i < 2000; ++i) {
      Action a = random_action(rng);
      for (int k = 0; k < 3; ++k) a[k] *= 3.0;
      cur = step_world(cur, a, cfg).first;
      for (int k = 0; k < 3; ++k) {
        CHECK(cur.effector_pos[k] >= cfg.workspace.lower[k]);
        CHECK(cur.effector_pos[k] <= cfg.workspace.upper[k]);
      }
    }
  }

  SUBCASE("non-finite action is rejected") {
    CHECK_THROWS_AS(step_world(s, {NAN, 0, 0, 0}, cfg), std::invalid_argument);
  }
}

TEST_CASE("condition and rewards") {
  const EpisodeConfig cfg;
  const Vocabulary v(TaskMode::Default);
  auto s = simple_scene();
  const auto red = instruction_for(v, "red");
  s.effector_pos = {0.0, 0.0, 0.06};
  s = step_world(s, {0, 0, 0, 0}, cfg).first;
  REQUIRE(s.contact[0]);

  CHECK(check_condition(s, red, cfg));
  CHECK(language_reward(s, red, cfg) == 0.0);
  CHECK_FALSE(check_condition(s, instruction_for(v, "green"), cfg));

  auto displaced = s;
  displaced.objects[1].displacement_accum = 2.0 * cfg.displacement_limit;
  CHECK_FALSE(check_condition(displaced, red, cfg));
  CHECK(language_reward(displaced, red, cfg) == -1.0);

  auto far = simple_scene();
  far = step_world(far, {0, 0, 0, 0}, cfg).first;
  CHECK_FALSE(check_condition(far, red, cfg));

  // Verbs do not change goal identity.
  for (auto verb : verbs()) CHECK(check_condition(s, make_instruction(v, red.goal, verb), cfg));
}

TEST_CASE("goal_reward uses an inclusive threshold") {
  WorldState s;
  s.effector_pos = {0.0, 0.0, 0.25};
  CHECK(goal_reward(s, s.effector_pos, 0.125) == 0.0);
  CHECK(goal_reward(s, {0.0, 0.0, 0.125}, 0.125) == 0.0);
  CHECK(goal_reward(s, {0.0, 0.0, 0.0}, 0.125) == -1.0);
  CHECK(achieved_goal(s) == s.effector_pos);
}

TEST_CASE("hindsight events") {
  for (auto mode : all_task_modes()) {
    Environment env(mode);
    std::size_t events = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      env.reset(seed);
      const auto distractor = 1 - env.goal_object();
      std::optional<std::size_t> first_contact;
      std::vector<HindsightEvent> seen;
      while (!env.done()) {
        const auto t = env.state().t;
        auto r = env.step(scripted_expert_action(env.state(), distractor, env.config()));
        if (!first_contact && r.state.contact[distractor]) first_contact = t;
        if (r.event) {
          CHECK(check_condition(r.state, r.event->instruction, env.config()));
          CHECK(r.event->object == distractor);
          seen.push_back(*r.event);
        }
        CHECK_FALSE(r.success);
      }
      REQUIRE(first_contact);
      REQUIRE(seen.size() == 1);
      CHECK(seen[0].t == *first_contact);
      ++events;
    }
    CHECK(events == 40);
  }

  SUBCASE("touching the goal fires no event") {
    Environment env(TaskMode::Default);
    env.reset(9);
    while (!env.done()) {
      auto r = env.step(scripted_expert_action(env.state(), env.goal_object(), env.config()));
      CHECK_FALSE(r.event);
    }
  }
}

TEST_CASE("scripted expert succeeds and random actions rarely do") {
  for (auto mode : all_task_modes()) {
    Environment env(mode);
    int successes = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      env.reset(1000 + seed);
      StepResult r;
      while (!env.done()) r = env.step(scripted_expert_action(env.state(), env.goal_object(), env.config()));
      successes += r.success;
    }
    CAPTURE(to_string(mode));
    CHECK(successes >= 95);
  }

  Environment env(TaskMode::Default);
  Rng rng(77);
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    env.reset(5000 + seed);
    StepResult r;
    while (!env.done()) r = env.step(random_action(rng));
    successes += r.success;
  }
  CHECK(successes <= 20);
}

TEST_CASE("expert from a contact position succeeds in one step") {
  const EpisodeConfig cfg;
  auto s = simple_scene();
  s.effector_pos = {0.0, 0.0, 0.065};
  s = step_world(s, {0, 0, 0, 0}, cfg).first;
  REQUIRE(s.contact[0]);
  auto next = step_world(s, scripted_expert_action(s, 0, cfg), cfg).first;
  CHECK(check_condition(next, instruction_for(Vocabulary(TaskMode::Default), "red"), cfg));
}

TEST_CASE("observations") {
  for (auto mode : all_task_modes()) {
    Environment env(mode);
    env.reset(2);
    auto obs = env.observation();
    CHECK(obs.features.size() == feature_dim(mode));
    CHECK(obs.tokens.size() == kMaxInstructionTokens);
    CHECK(obs.tokens.back() == kPad);
    FeatureScaler scale(mode, env.config());
    for (double v : scale(obs.features)) CHECK(std::abs(v) <= 1.0 + 1e-12);
  }
  CHECK(feature_dim(TaskMode::Default) == 4 + 2 * (6 + 3 + 1));
}

TEST_CASE("episode contract") {
  Environment env(TaskMode::Default);
  CHECK_THROWS_AS(env.step({0, 0, 0, 0}), std::logic_error);
  env.reset(1);
  std::size_t steps = 0;
  while (!env.done()) {
    env.step({0, 0, 0, 0});
    ++steps;
  }
  CHECK(steps == env.config().max_steps);
  CHECK_THROWS_AS(env.step({0, 0, 0, 0}), std::logic_error);

  // Same seed and actions give the same trajectory.
  Environment a(TaskMode::Color), b(TaskMode::Color);
  a.reset(8);
  b.reset(8);
  Rng ra(1), rb(1);
  while (!a.done()) {
    auto x = a.step(random_action(ra));
    auto y = b.step(random_action(rb));
    CHECK(x.state.effector_pos == y.state.effector_pos);
    CHECK(x.state.objects[0].position == y.state.objects[0].position);
    CHECK(x.reward == y.reward);
  }
}
