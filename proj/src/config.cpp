#include "qdpp/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace qdpp {

double TrainConfig::epsilon_at(std::size_t step) const {
  if (epsilon_decay_steps == 0 || step >= epsilon_decay_steps) return epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(epsilon_decay_steps);
  return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  require(target_update_interval > 0, "target_update_interval must be positive");
  require(rmsprop_alpha > 0.0 && rmsprop_alpha < 1.0, "rmsprop_alpha must lie in (0, 1)");
  require(rmsprop_eps > 0.0, "rmsprop_eps must be positive");
  require(epsilon_start >= 0.0 && epsilon_start <= 1.0, "epsilon_start must lie in [0, 1]");
  require(epsilon_end >= 0.0 && epsilon_end <= 1.0, "epsilon_end must lie in [0, 1]");
  require(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
  require(penalty_weight >= 0.0, "penalty_weight must be non-negative");
  require(feature_dim > 0, "feature_dim must be positive");
  require(buffer_capacity >= batch_size, "buffer_capacity must hold at least one batch");
  require(metrics_interval > 0, "metrics_interval must be positive");
  require(igm_window > 0, "igm_window must be positive");
  require(algo == "qdpp" || algo == "iql" || algo == "vdn", "algo must be one of qdpp, iql, vdn");
}

TrainConfig default_config(const std::string& env) {
  TrainConfig c;
  c.env = env;
  if (env == "matrix") {
    c.steps = 40'000;
    c.epsilon_end = 0.05;
    c.epsilon_decay_steps = 30'000;
  } else if (env == "blocker") {
    c.steps = 200'000;
    c.epsilon_end = 0.01;
    c.epsilon_decay_steps = 100'000;
  } else if (env == "spread") {
    c.steps = 100'000;
    c.epsilon_end = 0.1;
    c.epsilon_decay_steps = 10'000;
  } else if (env == "predprey") {
    c.steps = 4'000'000;
    c.epsilon_end = 0.1;
    c.epsilon_decay_steps = 300'000;
  } else if (env == "predprey-small") {
    c.steps = 300'000;
    c.epsilon_end = 0.1;
    c.epsilon_decay_steps = 100'000;
  } else {
    throw ConfigError("unknown environment '" + env + "'");
  }
  return c;
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw ConfigError("cannot format number");
  return std::string(buf, end);
}

namespace {

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError("invalid number for '" + key + "': '" + text + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  // Accept plain integers and scientific shorthand such as 4e6.
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec == std::errc() && end == text.data() + text.size()) return v;
  const double d = parse_double(key, text);
  if (d < 0.0 || d != std::floor(d) || d > 1e18) {
    throw ConfigError("invalid non-negative integer for '" + key + "': '" + text + "'");
  }
  return static_cast<std::uint64_t>(d);
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("invalid boolean for '" + key + "': '" + text + "'");
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : config_entries(TrainConfig{})) keys.push_back(k);
  return keys;
}

void apply_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "env") c.env = value;
  else if (key == "algo") c.algo = value;
  else if (key == "seed") c.seed = parse_uint(key, value);
  else if (key == "steps") c.steps = parse_uint(key, value);
  else if (key == "learning_rate") c.learning_rate = parse_double(key, value);
  else if (key == "batch_size") c.batch_size = parse_uint(key, value);
  else if (key == "gamma") c.gamma = parse_double(key, value);
  else if (key == "target_update_interval") c.target_update_interval = parse_uint(key, value);
  else if (key == "rmsprop_alpha") c.rmsprop_alpha = parse_double(key, value);
  else if (key == "rmsprop_eps") c.rmsprop_eps = parse_double(key, value);
  else if (key == "epsilon_start") c.epsilon_start = parse_double(key, value);
  else if (key == "epsilon_end") c.epsilon_end = parse_double(key, value);
  else if (key == "epsilon_decay_steps") c.epsilon_decay_steps = parse_uint(key, value);
  else if (key == "delta") c.delta = parse_double(key, value);
  else if (key == "penalty_weight") c.penalty_weight = parse_double(key, value);
  else if (key == "feature_dim") c.feature_dim = parse_uint(key, value);
  else if (key == "buffer_capacity") c.buffer_capacity = parse_uint(key, value);
  else if (key == "metrics_interval") c.metrics_interval = parse_uint(key, value);
  else if (key == "eval_episodes") c.eval_episodes = parse_uint(key, value);
  else if (key == "igm_window") c.igm_window = parse_uint(key, value);
  else if (key == "record_wallclock") c.record_wallclock = parse_bool(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& c) {
  auto u = [](std::uint64_t v) { return std::to_string(v); };
  return {
      {"env", c.env},
      {"algo", c.algo},
      {"seed", u(c.seed)},
      {"steps", u(c.steps)},
      {"learning_rate", format_double(c.learning_rate)},
      {"batch_size", u(c.batch_size)},
      {"gamma", format_double(c.gamma)},
      {"target_update_interval", u(c.target_update_interval)},
      {"rmsprop_alpha", format_double(c.rmsprop_alpha)},
      {"rmsprop_eps", format_double(c.rmsprop_eps)},
      {"epsilon_start", format_double(c.epsilon_start)},
      {"epsilon_end", format_double(c.epsilon_end)},
      {"epsilon_decay_steps", u(c.epsilon_decay_steps)},
      {"delta", format_double(c.delta)},
      {"penalty_weight", format_double(c.penalty_weight)},
      {"feature_dim", u(c.feature_dim)},
      {"buffer_capacity", u(c.buffer_capacity)},
      {"metrics_interval", u(c.metrics_interval)},
      {"eval_episodes", u(c.eval_episodes)},
      {"igm_window", u(c.igm_window)},
      {"record_wallclock", c.record_wallclock ? "true" : "false"},
  };
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(key, trim(t.substr(eq + 1)));
  }
  return out;
}

std::string format_config_text(const TrainConfig& config) {
  std::string out;
  for (const auto& [k, v] : config_entries(config)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace qdpp
