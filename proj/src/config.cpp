#include "hindsight/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace hindsight {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t parse_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const std::string s(v);
    const double d = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
  }
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + std::string(key) + "' expects true/false, got '" + std::string(v) + "'");
}

std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  std::stringstream ss{std::string(v)};
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
  if (out.empty()) throw ConfigError("'" + std::string(key) + "' expects a comma-separated list");
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

#define SIZE_FIELD(name, member)                                                  \
  Field {                                                                         \
    name, [](const ExperimentConfig& c) { return std::to_string(c.member); },     \
        [](ExperimentConfig& c, std::string_view v) { c.member = parse_size(name, v); } \
  }
#define DOUBLE_FIELD(name, member)                                                \
  Field {                                                                         \
    name, [](const ExperimentConfig& c) { return fmt(c.member); },                \
        [](ExperimentConfig& c, std::string_view v) { c.member = parse_double(name, v); } \
  }
#define BOOL_FIELD(name, member)                                                  \
  Field {                                                                         \
    name, [](const ExperimentConfig& c) { return std::string(c.member ? "true" : "false"); }, \
        [](ExperimentConfig& c, std::string_view v) { c.member = parse_bool(name, v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"mode", [](const ExperimentConfig& c) { return std::string(to_string(c.mode)); },
       [](ExperimentConfig& c, std::string_view v) { c.mode = parse_task_mode(v); }},
      {"method", [](const ExperimentConfig& c) { return std::string(to_string(c.method)); },
       [](ExperimentConfig& c, std::string_view v) { c.method = parse_method(v); }},
      {"strategy", [](const ExperimentConfig& c) { return std::string(to_string(c.heir.strategy)); },
       [](ExperimentConfig& c, std::string_view v) { c.heir.strategy = parse_replay_strategy(v); }},
      {"repr", [](const ExperimentConfig& c) { return std::string(to_string(c.sac.encoder.representation)); },
       [](ExperimentConfig& c, std::string_view v) { c.sac.encoder.representation = parse_word_representation(v); }},
      {"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
       [](ExperimentConfig& c, std::string_view v) { c.seed = parse_size("seed", v); }},
      SIZE_FIELD("total_env_steps", total_env_steps),
      SIZE_FIELD("eval_every", eval_every),
      SIZE_FIELD("eval_episodes", eval_episodes),
      SIZE_FIELD("random_steps", random_steps),
      SIZE_FIELD("update_after", update_after),
      DOUBLE_FIELD("updates_per_step", updates_per_step),
      SIZE_FIELD("buffer_capacity", buffer_capacity),
      SIZE_FIELD("hipss_updates_per_episode", hipss_updates_per_episode),
      BOOL_FIELD("save_trace", save_trace),
      SIZE_FIELD("warmstart_episodes", warmstart_episodes),
      SIZE_FIELD("episode.max_steps", episode.max_steps),
      DOUBLE_FIELD("episode.touch_radius", episode.touch_radius),
      DOUBLE_FIELD("episode.displacement_limit", episode.displacement_limit),
      DOUBLE_FIELD("episode.max_step", episode.max_step),
      DOUBLE_FIELD("episode.start_height", episode.start_height),
      SIZE_FIELD("heir.k", heir.k),
      DOUBLE_FIELD("sac.gamma", sac.gamma),
      DOUBLE_FIELD("sac.tau", sac.tau),
      SIZE_FIELD("sac.batch", sac.batch),
      DOUBLE_FIELD("sac.actor_lr", sac.actor_lr),
      DOUBLE_FIELD("sac.critic_lr", sac.critic_lr),
      DOUBLE_FIELD("sac.alpha_lr", sac.alpha_lr),
      DOUBLE_FIELD("sac.initial_alpha", sac.initial_alpha),
      BOOL_FIELD("sac.auto_alpha", sac.auto_alpha),
      DOUBLE_FIELD("sac.target_entropy", sac.target_entropy),
      {"sac.hidden",
       [](const ExperimentConfig& c) {
         std::string s;
         for (auto h : c.sac.hidden) s += (s.empty() ? "" : ",") + std::to_string(h);
         return s;
       },
       [](ExperimentConfig& c, std::string_view v) { c.sac.hidden = parse_sizes("sac.hidden", v); }},
      SIZE_FIELD("sac.embedding_dim", sac.encoder.embedding_dim),
      SIZE_FIELD("sac.encoder_hidden", sac.encoder.hidden),
      SIZE_FIELD("sac.encoder_layers", sac.encoder.layers),
      SIZE_FIELD("hipss.hidden", hipss.hidden),
      SIZE_FIELD("hipss.layers", hipss.layers),
      SIZE_FIELD("hipss.embedding_dim", hipss.embedding_dim),
      DOUBLE_FIELD("hipss.lr", hipss.lr),
      SIZE_FIELD("hipss.batch", hipss.batch),
      SIZE_FIELD("hipss.warmup", hipss.warmup),
      SIZE_FIELD("hipss.state_stride", hipss.state_stride),
      SIZE_FIELD("hipss.max_states", hipss.max_states),
      SIZE_FIELD("hipss.validation_period", hipss.validation_period),
  };
  return table;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::LCSAC: return "lcsac";
    case Method::HEIR: return "heir";
    case Method::HIPSS: return "hipss";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  std::string lower(text);
  for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  for (auto m : {Method::LCSAC, Method::HEIR, Method::HIPSS})
    if (to_string(m) == lower) return m;
  throw ConfigError("unknown method: " + std::string(text));
}

void ExperimentConfig::validate() const {
  if (total_env_steps == 0) throw ConfigError("total_env_steps must be positive");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (eval_episodes == 0) throw ConfigError("eval_episodes must be positive");
  if (!(updates_per_step >= 0)) throw ConfigError("updates_per_step must be non-negative");
  if (buffer_capacity == 0) throw ConfigError("buffer_capacity must be positive");
  try {
    episode.validate();
    heir.validate();
    sac.validate();
    hipss.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::map<std::string, std::string> ExperimentConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out[f.key] = f.get(*this);
  return out;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  const auto k = key == "steps" ? std::string_view("total_env_steps") : key;
  for (const auto& f : fields()) {
    if (k == f.key) {
      try {
        f.set(*this, trim(value));
      } catch (const ConfigError&) {
        throw;
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      return;
    }
  }
  throw ConfigError("unknown config key: " + std::string(key));
}

void apply_config_text(ExperimentConfig& cfg, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    try {
      cfg.set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(base, ss.str());
  return base;
}

std::string config_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace hindsight
