#include "qdpp/envs.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace qdpp::envs {

std::vector<std::size_t> Environment::reset(Rng& rng) {
  steps_ = 0;
  done_ = false;
  return do_reset(rng);
}

StepResult Environment::step(std::span<const std::size_t> actions, Rng& rng) {
  if (done_) throw std::logic_error("step called on a finished episode");
  const EnvSpec s = spec();
  if (actions.size() != s.n_agents) {
    throw std::out_of_range("expected " + std::to_string(s.n_agents) + " actions, got " +
                            std::to_string(actions.size()));
  }
  for (std::size_t a : actions) {
    if (a >= s.n_actions) throw std::out_of_range("action " + std::to_string(a) + " out of range");
  }
  StepResult r = do_step(actions, rng);
  ++steps_;
  if (steps_ >= s.max_episode_steps) r.done = true;
  done_ = r.done;
  return r;
}

namespace {

Cell moved(Cell c, std::size_t move, int rows, int cols) {
  switch (move) {
    case kNorth: --c.row; break;
    case kEast: ++c.col; break;
    case kSouth: ++c.row; break;
    case kWest: --c.col; break;
    default: break;
  }
  if (c.row < 0 || c.row >= rows || c.col < 0 || c.col >= cols) return {-1, -1};
  return c;
}

}  // namespace

// ---------------------------------------------------------------- matrix game

EnvSpec MatrixGame::spec() const {
  return {"matrix", 2, kSteps * 4, 2, kSteps, 13.0};
}

double MatrixGame::payoff(std::size_t step_index, std::size_t a0, std::size_t a1) {
  if (step_index < 9) return (a0 == 0 && a1 == 0) ? 1.0 : 0.0;
  if (step_index == 9) {
    if (a0 == 1 && a1 == 1) return 4.0;
    if (a0 == 0 && a1 == 0) return 1.0;
  }
  return 0.0;
}

std::vector<std::size_t> MatrixGame::do_reset(Rng&) {
  t_ = 0;
  last_code_ = 0;  // "no previous action" shares the code of (0, 0)
  return {encode(0, 0, 0), encode(0, 0, 0)};
}

StepResult MatrixGame::do_step(std::span<const std::size_t> actions, Rng&) {
  StepResult r;
  r.reward = payoff(t_, actions[0], actions[1]);
  r.done = r.reward == 0.0 || t_ + 1 >= kDecisions;
  last_code_ = actions[0] * 2 + actions[1];
  t_ = std::min(t_ + 1, kSteps - 1);
  const std::size_t obs = t_ * 4 + last_code_;
  r.next_obs = {obs, obs};
  return r;
}

std::string MatrixGame::render() const {
  std::ostringstream os;
  os << "step " << t_ << " last joint action (" << last_code_ / 2 << "," << last_code_ % 2 << ")\n";
  return os.str();
}

// -------------------------------------------------------------------- blocker

EnvSpec BlockerGame::spec() const {
  return {"blocker", kAgents, static_cast<std::size_t>(kWidth * kHeight), 5, kCap, -3.0};
}

std::vector<std::size_t> BlockerGame::do_reset(Rng&) {
  agents_ = {{0, 0}, {0, 3}, {0, 6}};
  blockers_ = {1, 4};
  return observe();
}

void BlockerGame::set_state(std::vector<Cell> agents, std::vector<int> blockers) {
  if (agents.size() != kAgents || blockers.size() != 2) {
    throw std::invalid_argument("BlockerGame::set_state: wrong number of agents or blockers");
  }
  agents_ = std::move(agents);
  blockers_ = std::move(blockers);
}

std::vector<std::size_t> BlockerGame::observe() const {
  std::vector<std::size_t> obs(kAgents);
  for (std::size_t i = 0; i < kAgents; ++i) {
    obs[i] = static_cast<std::size_t>(agents_[i].row * kWidth + agents_[i].col);
  }
  return obs;
}

bool BlockerGame::blocked(int col) const {
  for (int b : blockers_) {
    if (col == b || col == b + 1) return true;
  }
  return false;
}

void BlockerGame::move_blockers() {
  for (std::size_t k = 0; k < blockers_.size(); ++k) {
    const int left = blockers_[k];
    int best_dist = std::numeric_limits<int>::max();
    int target = -1;
    for (const Cell& a : agents_) {
      if (a.row < 1) continue;  // still in the top row
      const int col_gap = a.col < left ? left - a.col : (a.col > left + 1 ? a.col - left - 1 : 0);
      const int dist = (kHeight - 1 - a.row) + col_gap;
      if (dist < best_dist || (dist == best_dist && a.col < target)) {
        best_dist = dist;
        target = a.col;
      }
    }
    if (target < 0) continue;
    int next = left;
    if (target < left) next = left - 1;
    if (target > left + 1) next = left + 1;
    if (next == left || next < 0 || next + 1 >= kWidth) continue;
    const int other = blockers_[1 - k];
    if (std::abs(next - other) < 2) continue;  // would overlap the other blocker
    blockers_[k] = next;
  }
}

StepResult BlockerGame::do_step(std::span<const std::size_t> actions, Rng&) {
  move_blockers();
  bool reached = false;
  for (std::size_t i = 0; i < kAgents; ++i) {
    const Cell next = moved(agents_[i], actions[i], kHeight, kWidth);
    if (next.row < 0) continue;
    if (next.row == kHeight - 1 && blocked(next.col)) continue;
    agents_[i] = next;
    reached = reached || next.row == kHeight - 1;
  }
  return {observe(), -1.0, reached};
}

std::string BlockerGame::render() const {
  std::ostringstream os;
  for (int r = 0; r < kHeight; ++r) {
    for (int c = 0; c < kWidth; ++c) {
      char ch = '.';
      if (r == kHeight - 1 && blocked(c)) ch = '#';
      for (std::size_t i = 0; i < kAgents; ++i) {
        if (agents_[i].row == r && agents_[i].col == c) ch = static_cast<char>('1' + i);
      }
      os << ch;
    }
    os << '\n';
  }
  return os.str();
}

// ----------------------------------------------------------------- navigation

EnvSpec Navigation::spec() const {
  return {"spread", kAgents, static_cast<std::size_t>(kSize * kSize), 5, kCap, -6.0};
}

const std::vector<Cell>& Navigation::landmarks() {
  static const std::vector<Cell> kLandmarks = {{1, 1}, {1, 4}, {4, 1}, {4, 4}};
  return kLandmarks;
}

const std::vector<Cell>& Navigation::start_cells() {
  static const std::vector<Cell> kStart = {{0, 0}, {0, 1}, {1, 0}, {0, 2}};
  return kStart;
}

std::vector<std::size_t> Navigation::do_reset(Rng&) {
  agents_ = start_cells();
  return observe();
}

std::vector<std::size_t> Navigation::observe() const {
  std::vector<std::size_t> obs(kAgents);
  for (std::size_t i = 0; i < kAgents; ++i) {
    obs[i] = static_cast<std::size_t>(agents_[i].row * kSize + agents_[i].col);
  }
  return obs;
}

bool Navigation::covered() const {
  for (const Cell& l : landmarks()) {
    if (std::find(agents_.begin(), agents_.end(), l) == agents_.end()) return false;
  }
  return true;
}

StepResult Navigation::do_step(std::span<const std::size_t> actions, Rng&) {
  for (std::size_t i = 0; i < kAgents; ++i) {
    const Cell next = moved(agents_[i], actions[i], kSize, kSize);
    if (next.row >= 0) agents_[i] = next;
  }
  return {observe(), -1.0, covered()};
}

std::string Navigation::render() const {
  std::ostringstream os;
  for (int r = 0; r < kSize; ++r) {
    for (int c = 0; c < kSize; ++c) {
      char ch = '.';
      if (std::find(landmarks().begin(), landmarks().end(), Cell{r, c}) != landmarks().end()) ch = 'L';
      for (std::size_t i = 0; i < kAgents; ++i) {
        if (agents_[i] == Cell{r, c}) ch = static_cast<char>('1' + i);
      }
      os << ch;
    }
    os << '\n';
  }
  return os.str();
}

// ------------------------------------------------------------- predator-prey

PredatorPrey::PredatorPrey(int grid, std::size_t predators, std::size_t prey, std::size_t cap,
                           std::string name)
    : grid_(grid), n_predators_(predators), n_prey_(prey), cap_(cap), name_(std::move(name)) {
  if (grid < 2 || predators == 0 || prey == 0 ||
      predators + prey > static_cast<std::size_t>(grid * grid)) {
    throw std::invalid_argument("PredatorPrey: inconsistent layout");
  }
}

PredatorPrey PredatorPrey::standard() { return PredatorPrey(7, 4, 2, 200, "predprey"); }
PredatorPrey PredatorPrey::reduced() { return PredatorPrey(5, 2, 1, 200, "predprey-small"); }

EnvSpec PredatorPrey::spec() const {
  return {name_, n_predators_, static_cast<std::size_t>(grid_ * grid_) * kDirections, 4, cap_,
          std::nullopt};
}

std::vector<std::size_t> PredatorPrey::do_reset(Rng& rng) {
  const std::size_t cells = static_cast<std::size_t>(grid_ * grid_);
  std::vector<std::size_t> order(cells);
  for (std::size_t c = 0; c < cells; ++c) order[c] = c;
  // Partial Fisher-Yates: the first predators + prey entries are distinct cells.
  for (std::size_t k = 0; k < n_predators_ + n_prey_; ++k) {
    std::swap(order[k], order[k + rng.uniform_index(cells - k)]);
  }
  predators_.clear();
  prey_.clear();
  for (std::size_t k = 0; k < n_predators_; ++k) {
    predators_.push_back({static_cast<int>(order[k]) / grid_, static_cast<int>(order[k]) % grid_});
  }
  for (std::size_t k = 0; k < n_prey_; ++k) {
    const int c = static_cast<int>(order[n_predators_ + k]);
    prey_.push_back({c / grid_, c % grid_});
  }
  caught_.assign(n_prey_, false);
  return observe();
}

void PredatorPrey::set_state(std::vector<Cell> predators, std::vector<Cell> prey) {
  if (predators.size() != n_predators_ || prey.size() != n_prey_) {
    throw std::invalid_argument("PredatorPrey::set_state: wrong number of predators or prey");
  }
  predators_ = std::move(predators);
  prey_ = std::move(prey);
  caught_.assign(n_prey_, false);
}

std::size_t PredatorPrey::prey_direction(const Cell& from) const {
  int best = std::numeric_limits<int>::max();
  std::size_t dir = 4;
  for (std::size_t k = 0; k < n_prey_; ++k) {
    if (caught_[k]) continue;
    const int dr = prey_[k].row - from.row;
    const int dc = prey_[k].col - from.col;
    if (std::abs(dr) > kViewRadius || std::abs(dc) > kViewRadius) continue;
    const int dist = std::abs(dr) + std::abs(dc);
    if (dist >= best) continue;
    best = dist;
    if (std::abs(dr) >= std::abs(dc) && dr != 0) {
      dir = dr < 0 ? kNorth : kSouth;
    } else if (dc != 0) {
      dir = dc > 0 ? kEast : kWest;
    } else {
      dir = kNorth;  // same cell
    }
  }
  return dir;
}

std::vector<std::size_t> PredatorPrey::observe() const {
  std::vector<std::size_t> obs(n_predators_);
  for (std::size_t i = 0; i < n_predators_; ++i) {
    const auto cell = static_cast<std::size_t>(predators_[i].row * grid_ + predators_[i].col);
    obs[i] = cell * kDirections + prey_direction(predators_[i]);
  }
  return obs;
}

StepResult PredatorPrey::do_step(std::span<const std::size_t> actions, Rng& rng) {
  for (std::size_t i = 0; i < n_predators_; ++i) {
    const Cell next = moved(predators_[i], actions[i], grid_, grid_);
    if (next.row >= 0) predators_[i] = next;
  }

  auto occupied = [&](const Cell& c, std::size_t self) {
    for (const Cell& p : predators_) {
      if (p == c) return true;
    }
    for (std::size_t k = 0; k < n_prey_; ++k) {
      if (k != self && !caught_[k] && prey_[k] == c) return true;
    }
    return false;
  };
  for (std::size_t k = 0; k < n_prey_; ++k) {
    if (caught_[k]) continue;
    std::vector<Cell> options = {prey_[k]};
    for (std::size_t m = kNorth; m <= kWest; ++m) {
      const Cell next = moved(prey_[k], m, grid_, grid_);
      if (next.row >= 0 && !occupied(next, k)) options.push_back(next);
    }
    prey_[k] = options[rng.uniform_index(options.size())];
  }

  double reward = 0.0;
  bool all_caught = true;
  for (std::size_t k = 0; k < n_prey_; ++k) {
    if (caught_[k]) continue;
    int hunters = 0;
    for (const Cell& p : predators_) {
      if (std::abs(p.row - prey_[k].row) + std::abs(p.col - prey_[k].col) <= 1) ++hunters;
    }
    if (hunters >= 2) {
      reward += 1.0;
      caught_[k] = true;
    } else if (hunters == 1) {
      reward -= 0.5;
    }
    all_caught = all_caught && caught_[k];
  }
  return {observe(), reward, all_caught};
}

std::string PredatorPrey::render() const {
  std::ostringstream os;
  for (int r = 0; r < grid_; ++r) {
    for (int c = 0; c < grid_; ++c) {
      char ch = '.';
      for (std::size_t k = 0; k < n_prey_; ++k) {
        if (!caught_[k] && prey_[k] == Cell{r, c}) ch = 'o';
      }
      for (std::size_t i = 0; i < n_predators_; ++i) {
        if (predators_[i] == Cell{r, c}) ch = static_cast<char>('1' + i);
      }
      os << ch;
    }
    os << '\n';
  }
  return os.str();
}

std::unique_ptr<Environment> make_environment(const std::string& name) {
  if (name == "matrix") return std::make_unique<MatrixGame>();
  if (name == "blocker") return std::make_unique<BlockerGame>();
  if (name == "spread") return std::make_unique<Navigation>();
  if (name == "predprey") return std::make_unique<PredatorPrey>(PredatorPrey::standard());
  if (name == "predprey-small") return std::make_unique<PredatorPrey>(PredatorPrey::reduced());
  throw std::invalid_argument("unknown environment '" + name + "'");
}

std::vector<std::string> environment_names() {
  return {"matrix", "blocker", "spread", "predprey", "predprey-small"};
}

}  // namespace qdpp::envs
