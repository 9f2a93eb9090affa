#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdpp/rng.hpp"

namespace qdpp::envs {

struct EnvSpec {
  std::string name;
  std::size_t n_agents = 0;
  std::size_t n_obs = 0;  // per agent
  std::size_t n_actions = 0;
  std::size_t max_episode_steps = 0;
  std::optional<double> optimal_return;  // best achievable episode return, when known

  std::size_t ground_set_size() const { return n_agents * n_obs * n_actions; }
};

struct StepResult {
  std::vector<std::size_t> next_obs;
  double reward = 0.0;
  bool done = false;
};

/// Cooperative task with discrete per-agent observations and actions and a
/// shared team reward. `step` validates its input and forces termination at
/// max_episode_steps; subclasses implement the dynamics.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual EnvSpec spec() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
  // One text grid (or status line) for the current state.
  virtual std::string render() const = 0;

  std::vector<std::size_t> reset(Rng& rng);
  StepResult step(std::span<const std::size_t> actions, Rng& rng);

  bool done() const { return done_; }
  std::size_t steps_taken() const { return steps_; }

 protected:
  virtual std::vector<std::size_t> do_reset(Rng& rng) = 0;
  virtual StepResult do_step(std::span<const std::size_t> actions, Rng& rng) = 0;

 private:
  bool done_ = true;
  std::size_t steps_ = 0;
};

// Grid moves shared by the gridworlds.
enum Move : std::size_t { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3, kStay = 4 };

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

/// Two-agent, two-action game over 10 decision steps. The observation is
/// (step index, previous joint action); step index 10 is only ever the
/// terminal observation. Steps 0-8 pay +1 for joint action (0, 0) and step 9
/// pays +4 for (1, 1) and +1 for (0, 0). Any zero reward ends the episode, so
/// the optimum is 13 and always playing action 0 earns 10.
class MatrixGame final : public Environment {
 public:
  static constexpr std::size_t kSteps = 11;  // observed step indices, also the cap
  static constexpr std::size_t kDecisions = 10;

  EnvSpec spec() const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<MatrixGame>(*this); }
  std::string render() const override;

  static double payoff(std::size_t step_index, std::size_t a0, std::size_t a1);
  static std::size_t encode(std::size_t step_index, std::size_t a0, std::size_t a1) {
    return step_index * 4 + a0 * 2 + a1;
  }

 protected:
  std::vector<std::size_t> do_reset(Rng& rng) override;
  StepResult do_step(std::span<const std::size_t> actions, Rng& rng) override;

 private:
  std::size_t t_ = 0;
  std::size_t last_code_ = 0;
};

/// Three agents on a 7 x 4 grid start in the top row at columns 0, 3, 6 and
/// try to enter the bottom row. Two blockers, each two cells wide, slide
/// along the bottom row (start columns {1,2} and {4,5}); before the agents
/// move, each blocker shifts one cell toward the nearest agent that has left
/// the top row. Agents cannot enter a blocked cell. The episode ends when
/// any agent reaches the bottom row; every step costs -1.
class BlockerGame final : public Environment {
 public:
  static constexpr int kWidth = 7;
  static constexpr int kHeight = 4;
  static constexpr std::size_t kAgents = 3;
  static constexpr std::size_t kCap = 40;

  EnvSpec spec() const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<BlockerGame>(*this); }
  std::string render() const override;

  const std::vector<Cell>& agents() const { return agents_; }
  // Leftmost column of each blocker.
  const std::vector<int>& blockers() const { return blockers_; }
  void set_state(std::vector<Cell> agents, std::vector<int> blockers);

 protected:
  std::vector<std::size_t> do_reset(Rng& rng) override;
  StepResult do_step(std::span<const std::size_t> actions, Rng& rng) override;

 private:
  std::vector<std::size_t> observe() const;
  bool blocked(int col) const;
  void move_blockers();

  std::vector<Cell> agents_;
  std::vector<int> blockers_;
};

/// Four agents on a 6 x 6 grid must cover the four landmarks (1,1), (1,4),
/// (4,1), (4,4) simultaneously. Agents start clustered at (0,0), (0,1),
/// (1,0), (0,2); the far landmark is six moves from the nearest agent, so
/// perfect play takes six steps. Cells may be shared; every step costs -1.
class Navigation final : public Environment {
 public:
  static constexpr int kSize = 6;
  static constexpr std::size_t kAgents = 4;
  static constexpr std::size_t kCap = 50;

  EnvSpec spec() const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<Navigation>(*this); }
  std::string render() const override;

  static const std::vector<Cell>& landmarks();
  static const std::vector<Cell>& start_cells();
  const std::vector<Cell>& agents() const { return agents_; }

 protected:
  std::vector<std::size_t> do_reset(Rng& rng) override;
  StepResult do_step(std::span<const std::size_t> actions, Rng& rng) override;

 private:
  std::vector<std::size_t> observe() const;
  bool covered() const;

  std::vector<Cell> agents_;
};

/// Predators chase randomly moving prey on a square grid. A predator
/// observes its own cell and the direction (N/E/S/W, or none) of the nearest
/// prey within a 5 x 5 window. Predators move in four directions; prey then
/// step uniformly among staying and the free neighbouring cells. At step end
/// a prey with two or more predators on or orthogonally next to it is caught
/// (+1, removed); a prey with exactly one costs -0.5. The episode ends when
/// every prey is caught.
class PredatorPrey final : public Environment {
 public:
  static constexpr int kViewRadius = 2;
  static constexpr std::size_t kDirections = 5;  // N, E, S, W, none

  PredatorPrey(int grid, std::size_t predators, std::size_t prey, std::size_t cap, std::string name);

  // 7 x 7, four predators, two prey.
  static PredatorPrey standard();
  // 5 x 5, two predators, one prey.
  static PredatorPrey reduced();

  EnvSpec spec() const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<PredatorPrey>(*this); }
  std::string render() const override;

  const std::vector<Cell>& predators() const { return predators_; }
  const std::vector<Cell>& prey() const { return prey_; }
  const std::vector<bool>& caught() const { return caught_; }
  void set_state(std::vector<Cell> predators, std::vector<Cell> prey);

 protected:
  std::vector<std::size_t> do_reset(Rng& rng) override;
  StepResult do_step(std::span<const std::size_t> actions, Rng& rng) override;

 private:
  std::vector<std::size_t> observe() const;
  std::size_t prey_direction(const Cell& from) const;

  int grid_;
  std::size_t n_predators_;
  std::size_t n_prey_;
  std::size_t cap_;
  std::string name_;
  std::vector<Cell> predators_;
  std::vector<Cell> prey_;
  std::vector<bool> caught_;
};

// "matrix", "blocker", "spread", "predprey", "predprey-small".
std::unique_ptr<Environment> make_environment(const std::string& name);
std::vector<std::string> environment_names();

}  // namespace qdpp::envs
