#include "hindsight/trace.hpp"

#include "json.hpp"

namespace hindsight {

std::string trace_line(std::size_t t, const WorldState& next, const Action& action, double reward,
                       std::span<const Token> tokens, const std::optional<HindsightEvent>& event) {
  nlohmann::json j;
  j["t"] = t;
  j["effector"] = next.effector_pos;
  j["gripper"] = next.gripper;
  auto objects = nlohmann::json::array();
  for (const auto& o : next.objects) {
    objects.push_back({{"color", o.color},
                       {"shape", std::string(to_string(o.shape_class))},
                       {"position", o.position},
                       {"displacement", o.displacement_accum}});
  }
  j["objects"] = std::move(objects);
  j["action"] = action;
  j["reward"] = reward;
  j["tokens"] = std::vector<Token>(tokens.begin(), tokens.end());
  if (event) {
    j["event"] = {{"t", event->t}, {"object", event->object}, {"tokens", event->instruction.tokens}};
  } else {
    j["event"] = nullptr;
  }
  return j.dump();
}

}  // namespace hindsight
