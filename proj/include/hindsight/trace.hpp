#pragma once

#include <optional>
#include <span>
#include <string>

#include "hindsight/env.hpp"

namespace hindsight {

// One JSON object per environment step:
//   {"t", "effector", "gripper", "objects": [{"color", "shape", "position",
//    "displacement"}...], "action", "reward", "tokens", "event"}
// `event` is null or {"t", "object", "tokens"}.
std::string trace_line(std::size_t t, const WorldState& next, const Action& action, double reward,
                       std::span<const Token> tokens, const std::optional<HindsightEvent>& event);

}  // namespace hindsight
