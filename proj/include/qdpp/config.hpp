#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qdpp {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Every knob of a training run. Defaults are the common settings; use
/// `default_config(env)` for the per-task schedule.
struct TrainConfig {
  std::string env = "matrix";
  std::string algo = "qdpp";
  std::uint64_t seed = 1;
  std::size_t steps = 40'000;

  double learning_rate = 5e-4;
  std::size_t batch_size = 32;  // episodes per update
  double gamma = 0.99;
  std::size_t target_update_interval = 100;  // episodes
  double rmsprop_alpha = 0.99;
  double rmsprop_eps = 1e-8;

  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t epsilon_decay_steps = 30'000;

  double delta = 0.5;
  double penalty_weight = 1.0;  // 0 disables the balance penalty
  std::size_t feature_dim = 32;

  std::size_t buffer_capacity = 5000;  // episodes
  std::size_t metrics_interval = 1000;  // env steps
  std::size_t eval_episodes = 10;
  std::size_t igm_window = 32;
  bool record_wallclock = false;  // off keeps metrics byte-reproducible

  // Linear schedule in env steps, clamped at epsilon_end.
  double epsilon_at(std::size_t step) const;

  // Throws ConfigError when a value is out of its domain.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

/// Defaults per task: step budget and exploration schedule.
///   matrix          40K steps, epsilon 1 -> 0.05 over 30K
///   blocker         200K steps, epsilon 1 -> 0.01 over 100K
///   spread          100K steps, epsilon 1 -> 0.1 over 10K
///   predprey        4M steps, epsilon 1 -> 0.1 over 300K
///   predprey-small  300K steps, epsilon 1 -> 0.1 over 100K
TrainConfig default_config(const std::string& env);

std::vector<std::string> config_keys();

// Sets one key from its text form; throws ConfigError on unknown keys or bad values.
void apply_config_value(TrainConfig& config, const std::string& key, const std::string& value);

// Ordered (key, value) pairs; doubles use the shortest round-trip form.
std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& config);

/// Flat "key = value" text. Blank lines and lines starting with '#' are
/// ignored. Returns entries in file order.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);
std::string format_config_text(const TrainConfig& config);

std::string format_double(double value);

}  // namespace qdpp
