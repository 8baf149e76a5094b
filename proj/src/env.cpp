#include "hindsight/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace hindsight {
namespace {

double hypot2(double x, double y) { return std::sqrt(x * x + y * y); }

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

bool matches(const ObjectSpec& obj, const GoalDescriptor& goal) {
  return obj.color == goal.color && obj.shape_class == goal.shape_class;
}

}  // namespace

void EpisodeConfig::validate() const {
  if (max_steps < 1) throw std::invalid_argument("episode length must be >= 1");
  if (!(touch_radius > 0)) throw std::invalid_argument("touch radius must be positive");
  if (!(displacement_limit > 0)) throw std::invalid_argument("displacement limit must be positive");
  if (!(max_step > 0)) throw std::invalid_argument("max step must be positive");
  for (int i = 0; i < 3; ++i)
    if (!(workspace.upper[i] > workspace.lower[i])) throw std::invalid_argument("empty workspace");
}

Vec3 half_extent_for(ShapeClass shape) {
  switch (shape) {
    case ShapeClass::Box: return {0.025, 0.025, 0.025};
    case ShapeClass::Rectangle: return {0.045, 0.025, 0.025};
    case ShapeClass::Cylinder: return {0.025, 0.025, 0.035};
  }
  return {};
}

double signed_distance(const ObjectSpec& obj, const Vec3& p) {
  const auto& c = obj.position;
  const auto& h = obj.half_extent;
  if (obj.shape_class == ShapeClass::Cylinder) {
    const double dr = hypot2(p[0] - c[0], p[1] - c[1]) - h[0];
    const double dz = std::abs(p[2] - c[2]) - h[2];
    return std::min(std::max(dr, dz), 0.0) + hypot2(std::max(dr, 0.0), std::max(dz, 0.0));
  }
  Vec3 q;
  for (int i = 0; i < 3; ++i) q[i] = std::abs(p[i] - c[i]) - h[i];
  const double outside = std::sqrt(std::pow(std::max(q[0], 0.0), 2) + std::pow(std::max(q[1], 0.0), 2) +
                                   std::pow(std::max(q[2], 0.0), 2));
  const double inside = std::min(std::max({q[0], q[1], q[2]}), 0.0);
  return outside + inside;
}

std::pair<WorldState, ContactReport> step_world(const WorldState& state, const Action& action,
                                                const EpisodeConfig& cfg) {
  for (double a : action)
    if (!std::isfinite(a)) throw std::invalid_argument("action must be finite");
  WorldState next = state;
  ContactReport report;
  for (int i = 0; i < 3; ++i) {
    const double a = std::clamp(action[i], -1.0, 1.0);
    next.effector_pos[i] =
        std::clamp(state.effector_pos[i] + a * cfg.max_step, cfg.workspace.lower[i], cfg.workspace.upper[i]);
  }
  next.gripper = 0.5 * (std::clamp(action[3], -1.0, 1.0) + 1.0);

  for (std::size_t k = 0; k < next.objects.size(); ++k) {
    auto& obj = next.objects[k];
    obj.last_displacement = {0.0, 0.0, 0.0};
    const double sd = signed_distance(obj, next.effector_pos);
    if (sd < 0.0) {
      // Overlap resolution: the object slides horizontally away from the
      // effector by the penetration depth.
      const double depth = -sd;
      double ux = obj.position[0] - next.effector_pos[0];
      double uy = obj.position[1] - next.effector_pos[1];
      const double n = hypot2(ux, uy);
      if (n < 1e-9) {
        ux = 1.0;
        uy = 0.0;
      } else {
        ux /= n;
        uy /= n;
      }
      const Vec3 before = obj.position;
      obj.position[0] = std::clamp(obj.position[0] + depth * ux, cfg.workspace.lower[0], cfg.workspace.upper[0]);
      obj.position[1] = std::clamp(obj.position[1] + depth * uy, cfg.workspace.lower[1], cfg.workspace.upper[1]);
      for (int i = 0; i < 3; ++i) obj.last_displacement[i] = obj.position[i] - before[i];
      const double moved = distance(obj.position, before);
      obj.displacement_accum += moved;
      report.push[k] = moved;
    }
    next.contact[k] = signed_distance(obj, next.effector_pos) <= cfg.touch_radius;
    report.contact[k] = next.contact[k];
  }
  next.t = state.t + 1;
  return {next, report};
}

std::optional<std::size_t> referent(const WorldState& state, const GoalDescriptor& goal) {
  for (std::size_t k = 0; k < state.objects.size(); ++k)
    if (matches(state.objects[k], goal)) return k;
  return std::nullopt;
}

bool check_condition(const WorldState& state, const Instruction& g, const EpisodeConfig& cfg) {
  const auto target = referent(state, g.goal);
  if (!target || !state.contact[*target]) return false;
  return std::all_of(state.objects.begin(), state.objects.end(),
                     [&](const ObjectSpec& o) { return o.displacement_accum <= cfg.displacement_limit; });
}

double language_reward(const WorldState& state, const Instruction& g, const EpisodeConfig& cfg) {
  return check_condition(state, g, cfg) ? 0.0 : -1.0;
}

Vec3 achieved_goal(const WorldState& state) { return state.effector_pos; }

double goal_reward(const WorldState& state, const Vec3& goal, double epsilon) {
  return distance(achieved_goal(state), goal) <= epsilon ? 0.0 : -1.0;
}

std::optional<HindsightEvent> detect_hindsight_event(const WorldState& state_next, const Instruction& g,
                                                     const Vocabulary& vocab, const EpisodeConfig& cfg,
                                                     std::array<bool, 2>& fired, Rng& rng) {
  for (std::size_t k = 0; k < state_next.objects.size(); ++k) {
    const auto& obj = state_next.objects[k];
    if (fired[k] || !state_next.contact[k] || matches(obj, g.goal)) continue;
    Instruction expert = expert_hindsight_instruction(vocab, obj.color, obj.shape_class, rng);
    if (!check_condition(state_next, expert, cfg)) continue;
    fired[k] = true;
    // The event belongs to the transition that produced state_next.
    return HindsightEvent{state_next.t - 1, k, std::move(expert)};
  }
  return std::nullopt;
}

Action scripted_expert_action(const WorldState& state, std::size_t target_object, const EpisodeConfig& cfg) {
  const auto& obj = state.objects.at(target_object);
  const auto& e = state.effector_pos;
  const double sd = signed_distance(obj, e);
  if (sd >= 0.0 && sd <= cfg.touch_radius) return {0.0, 0.0, 0.0, 0.0};

  double highest_top = 0.0;
  for (const auto& o : state.objects) highest_top = std::max(highest_top, o.position[2] + o.half_extent[2]);
  const double top = obj.position[2] + obj.half_extent[2];
  const double cruise = std::max(e[2], highest_top + 2.0 * cfg.touch_radius);

  Vec3 desired;
  const double horizontal = hypot2(obj.position[0] - e[0], obj.position[1] - e[1]);
  if (horizontal > 1e-3) {
    desired = {obj.position[0], obj.position[1], std::min(cruise, cfg.workspace.upper[2])};
  } else {
    desired = {obj.position[0], obj.position[1], top + 0.5 * cfg.touch_radius};
  }
  Action a{};
  for (int i = 0; i < 3; ++i) a[i] = std::clamp((desired[i] - e[i]) / cfg.max_step, -1.0, 1.0);
  a[3] = 0.0;
  return a;
}

std::size_t feature_dim(TaskMode mode) {
  return 4 + 2 * (6 + colors(mode).size() + shape_classes(mode).size());
}

Observation observe(const WorldState& state, const Instruction& g, TaskMode mode) {
  Observation obs;
  auto& f = obs.features;
  f.reserve(feature_dim(mode));
  f.insert(f.end(), state.effector_pos.begin(), state.effector_pos.end());
  f.push_back(state.gripper);
  const auto nc = colors(mode).size();
  const auto ns = shape_classes(mode).size();
  for (const auto& o : state.objects) {
    f.insert(f.end(), o.position.begin(), o.position.end());
    f.insert(f.end(), o.last_displacement.begin(), o.last_displacement.end());
    std::vector<double> color(nc, 0.0), shape(ns, 0.0);
    color[color_index(mode, o.color)] = 1.0;
    shape[shape_index(mode, o.shape_class)] = 1.0;
    f.insert(f.end(), color.begin(), color.end());
    f.insert(f.end(), shape.begin(), shape.end());
  }
  obs.tokens = pad_tokens(g.tokens);
  return obs;
}

FeatureScaler::FeatureScaler(TaskMode mode, const EpisodeConfig& cfg) {
  const auto& ws = cfg.workspace;
  auto position = [&] {
    for (int i = 0; i < 3; ++i) {
      const double mid = 0.5 * (ws.lower[i] + ws.upper[i]);
      offset_.push_back(mid);
      scale_.push_back(2.0 / (ws.upper[i] - ws.lower[i]));
    }
  };
  auto identity = [&](std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      offset_.push_back(0.0);
      scale_.push_back(1.0);
    }
  };
  position();
  offset_.push_back(0.5);  // gripper in [0, 1]
  scale_.push_back(2.0);
  for (int k = 0; k < 2; ++k) {
    position();
    for (int i = 0; i < 3; ++i) {
      offset_.push_back(0.0);
      scale_.push_back(1.0 / cfg.max_step);
    }
    identity(colors(mode).size() + shape_classes(mode).size());
  }
}

std::vector<double> FeatureScaler::operator()(std::span<const double> raw) const {
  if (raw.size() != offset_.size()) throw DimensionError("feature vector has wrong length");
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - offset_[i]) * scale_[i];
  return out;
}

Environment::Environment(TaskMode mode, EpisodeConfig cfg) : mode_(mode), cfg_(cfg), vocab_(mode) {
  cfg_.validate();
}

const WorldState& Environment::reset(std::uint64_t seed) {
  rng_ = Rng(derive_seed(seed, 0));
  const auto goals = enumerate_goals(mode_);
  const auto& goal = goals[uniform_index(rng_, 0, goals.size() - 1)];
  instruction_ = sample_instruction(vocab_, goal, rng_);

  // Distractor property tuple: uniform over the mode's tuples other than the goal's.
  std::vector<std::pair<std::string_view, ShapeClass>> others;
  for (auto c : colors(mode_))
    for (auto s : shape_classes(mode_))
      if (!(c == goal.color && s == goal.shape_class)) others.emplace_back(c, s);
  const auto& [dcolor, dshape] = others[uniform_index(rng_, 0, others.size() - 1)];

  goal_object_ = uniform_index(rng_, 0, 1);
  WorldState s;
  auto& g = s.objects[goal_object_];
  g.color = goal.color;
  g.shape_class = goal.shape_class;
  auto& d = s.objects[1 - goal_object_];
  d.color = std::string(dcolor);
  d.shape_class = dshape;

  const double e = cfg_.placement_extent;
  for (auto& o : s.objects) o.half_extent = half_extent_for(o.shape_class);
  do {
    for (auto& o : s.objects) o.position = {uniform(rng_, -e, e), uniform(rng_, -e, e), o.half_extent[2]};
  } while (hypot2(s.objects[0].position[0] - s.objects[1].position[0],
                  s.objects[0].position[1] - s.objects[1].position[1]) < cfg_.min_separation);

  const double j = cfg_.start_jitter;
  s.effector_pos = {uniform(rng_, -j, j), uniform(rng_, -j, j), cfg_.start_height};
  s.gripper = 0.5;
  for (std::size_t k = 0; k < 2; ++k) s.contact[k] = signed_distance(s.objects[k], s.effector_pos) <= cfg_.touch_radius;
  s.t = 0;

  state_ = std::move(s);
  fired_ = {false, false};
  active_ = true;
  done_ = false;
  return state_;
}

StepResult Environment::step(const Action& action) {
  if (!active_) throw std::logic_error("step called before reset");
  if (done_) throw std::logic_error("step called on a finished episode");
  StepResult r;
  std::tie(r.state, r.contact) = step_world(state_, action, cfg_);
  r.success = check_condition(r.state, instruction_, cfg_);
  r.reward = r.success ? 0.0 : -1.0;
  r.event = detect_hindsight_event(r.state, instruction_, vocab_, cfg_, fired_, rng_);
  r.done = r.success || r.state.t >= cfg_.max_steps;
  state_ = r.state;
  done_ = r.done;
  return r;
}

const WorldState& Environment::state() const {
  if (!active_) throw std::logic_error("no episode");
  return state_;
}

const Instruction& Environment::instruction() const {
  if (!active_) throw std::logic_error("no episode");
  return instruction_;
}

std::size_t Environment::goal_object() const {
  if (!active_) throw std::logic_error("no episode");
  return goal_object_;
}

Observation Environment::observation() const { return observe(state(), instruction(), mode_); }

}  // namespace hindsight
