#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hindsight/language.hpp"
#include "hindsight/random.hpp"
#include "hindsight/tensor.hpp"

namespace hindsight {

using Vec3 = std::array<double, 3>;

struct Workspace {
  Vec3 lower{-0.25, -0.25, 0.0};
  Vec3 upper{0.25, 0.25, 0.3};
};

struct EpisodeConfig {
  std::size_t max_steps = 50;          // T
  double touch_radius = 0.03;          // contact when the effector is this close to a surface
  double displacement_limit = 0.01;    // per-object drift allowed for a valid touch
  double max_step = 0.05;              // effector displacement per unit action
  Workspace workspace{};
  double start_height = 0.25;
  double start_jitter = 0.05;
  double placement_extent = 0.2;       // object centres sampled in [-e, e]^2
  double min_separation = 0.15;        // between object centres

  void validate() const;
};

struct ObjectSpec {
  std::string color;
  ShapeClass shape_class = ShapeClass::Box;
  Vec3 position{};
  Vec3 half_extent{};           // cylinders: radius, radius, half height
  Vec3 last_displacement{};     // velocity proxy
  double displacement_accum = 0.0;
};

Vec3 half_extent_for(ShapeClass shape);

struct WorldState {
  Vec3 effector_pos{};
  double gripper = 0.0;
  std::array<ObjectSpec, 2> objects{};
  std::array<bool, 2> contact{};
  std::size_t t = 0;
};

inline constexpr std::size_t kActionDim = 4;
using Action = std::array<double, kActionDim>;

struct ContactReport {
  std::array<bool, 2> contact{};
  std::array<double, 2> push{};  // displacement applied this step
};

struct HindsightEvent {
  std::size_t t = 0;             // index of the transition whose next state fired the event
  std::size_t object = 0;
  Instruction instruction;
};

// Signed distance from a point to the object's solid (negative inside).
double signed_distance(const ObjectSpec& obj, const Vec3& p);

// Deterministic kinematic transition.
std::pair<WorldState, ContactReport> step_world(const WorldState& state, const Action& action,
                                                const EpisodeConfig& cfg);

// Index of the object the instruction refers to, if any.
std::optional<std::size_t> referent(const WorldState& state, const GoalDescriptor& goal);

// Goal object in contact and no object displaced beyond the limit.
bool check_condition(const WorldState& state, const Instruction& g, const EpisodeConfig& cfg);
double language_reward(const WorldState& state, const Instruction& g, const EpisodeConfig& cfg);

Vec3 achieved_goal(const WorldState& state);
double goal_reward(const WorldState& state, const Vec3& goal, double epsilon);

// Fires for a contacted non-goal object whose counterfactual instruction
// satisfies the task condition, once per object (tracked in `fired`).
std::optional<HindsightEvent> detect_hindsight_event(const WorldState& state_next, const Instruction& g,
                                                     const Vocabulary& vocab, const EpisodeConfig& cfg,
                                                     std::array<bool, 2>& fired, Rng& rng);

// Moves above the target object at a safe height, then lowers onto its top.
Action scripted_expert_action(const WorldState& state, std::size_t target_object, const EpisodeConfig& cfg);

struct Observation {
  std::vector<double> features;  // non-linguistic part, raw units
  std::vector<Token> tokens;     // padded to kMaxInstructionTokens
};

std::size_t feature_dim(TaskMode mode);
Observation observe(const WorldState& state, const Instruction& g, TaskMode mode);

// Fixed workspace-based affine map of raw features into roughly [-1, 1].
class FeatureScaler {
 public:
  FeatureScaler(TaskMode mode, const EpisodeConfig& cfg);
  std::vector<double> operator()(std::span<const double> raw) const;
  std::size_t dim() const noexcept { return offset_.size(); }

 private:
  std::vector<double> offset_, scale_;
};

struct StepResult {
  WorldState state;
  ContactReport contact;
  double reward = -1.0;
  bool success = false;
  bool done = false;
  std::optional<HindsightEvent> event;
};

class Environment {
 public:
  explicit Environment(TaskMode mode, EpisodeConfig cfg = {});

  // Samples the scene and episodic instruction; deterministic in seed.
  const WorldState& reset(std::uint64_t seed);
  StepResult step(const Action& action);

  TaskMode mode() const noexcept { return mode_; }
  const EpisodeConfig& config() const noexcept { return cfg_; }
  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  const WorldState& state() const;
  const Instruction& instruction() const;
  std::size_t goal_object() const;
  bool done() const noexcept { return done_; }
  bool has_episode() const noexcept { return active_; }
  Observation observation() const;

 private:
  TaskMode mode_;
  EpisodeConfig cfg_;
  Vocabulary vocab_;
  Rng rng_;
  WorldState state_{};
  Instruction instruction_{};
  std::size_t goal_object_ = 0;
  std::array<bool, 2> fired_{};
  bool active_ = false;
  bool done_ = false;
};

}  // namespace hindsight
