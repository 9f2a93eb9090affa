#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qdpp/checkpoint.hpp"
#include "qdpp/config.hpp"
#include "qdpp/envs.hpp"
#include "qdpp/sampler.hpp"
#include "qdpp/training.hpp"

namespace qdpp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string utc_timestamp(const char* format) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, format);
  return s.str();
}

std::string iso_now() { return utc_timestamp("%Y-%m-%dT%H:%M:%SZ"); }

fs::path output_root(const std::optional<std::string>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("QDPP_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return "runs";
}

// Creates `<root>/<stem>_<timestamp>`, adding a counter if that name is taken.
fs::path make_unique_dir(const fs::path& root, const std::string& stem) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create output root " + root.string() + ": " + ec.message());
  const std::string stamp = utc_timestamp("%Y%m%dT%H%M%SZ");
  for (int k = 0;; ++k) {
    const fs::path dir = root / (stem + "_" + stamp + (k == 0 ? "" : "-" + std::to_string(k)));
    if (fs::create_directory(dir, ec)) return dir;
    if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw IoError("cannot write " + path.string());
}

std::string build_id() {
  std::string id = std::string("qdpp ") + kVersion;
#ifdef __VERSION__
  id += " (" __VERSION__ ")";
#endif
#ifdef QDPP_HAVE_OPENMP
  id += " openmp";
#endif
  return id;
}

struct TrainArgs {
  std::optional<std::string> env;
  std::optional<std::string> algo;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> steps;
  std::optional<std::string> config;
  std::optional<std::string> out;
  std::optional<double> delta;
  std::optional<double> penalty_weight;
  std::optional<double> epsilon_start;
  std::optional<double> epsilon_end;
  std::optional<std::size_t> epsilon_decay_steps;
};

// Built-in default < config file < flag.
TrainConfig resolve_config(const TrainArgs& a) {
  std::vector<std::pair<std::string, std::string>> file_entries;
  if (a.config) file_entries = parse_config_text(read_text(*a.config));

  std::string env = "matrix";
  for (const auto& [k, v] : file_entries) {
    if (k == "env") env = v;
  }
  if (a.env) env = *a.env;

  TrainConfig c = default_config(env);
  for (const auto& [k, v] : file_entries) {
    if (k != "env") apply_config_value(c, k, v);
  }
  if (a.algo) c.algo = *a.algo;
  if (a.seed) c.seed = *a.seed;
  if (a.steps) c.steps = *a.steps;
  if (a.delta) c.delta = *a.delta;
  if (a.penalty_weight) c.penalty_weight = *a.penalty_weight;
  if (a.epsilon_start) c.epsilon_start = *a.epsilon_start;
  if (a.epsilon_end) c.epsilon_end = *a.epsilon_end;
  if (a.epsilon_decay_steps) c.epsilon_decay_steps = *a.epsilon_decay_steps;
  c.validate();
  return c;
}

json config_json(const TrainConfig& c) {
  json j = json::object();
  for (const auto& [k, v] : config_entries(c)) j[k] = v;
  return j;
}

int train_one(const TrainConfig& config, const fs::path& root, std::ostream& out) {
  const auto env = envs::make_environment(config.env);
  const fs::path dir =
      make_unique_dir(root, config.env + "_" + config.algo + "_" + std::to_string(config.seed));
  const fs::path manifest_path = dir / "manifest.json";
  const fs::path metrics_path = dir / "metrics.csv";
  const fs::path checkpoint_path = dir / "checkpoint.qdpk";

  json manifest = {
      {"algorithm", config.algo},
      {"env", config.env},
      {"seed", config.seed},
      {"build", build_id()},
      {"config", config_json(config)},
      {"started_at", iso_now()},
      {"finished_at", nullptr},
      {"status", "running"},
      {"outputs",
       {{"run_dir", dir.string()},
        {"manifest", manifest_path.string()},
        {"metrics", metrics_path.string()},
        {"checkpoint", checkpoint_path.string()}}},
  };
  write_text(manifest_path, manifest.dump(2) + "\n");

  std::ofstream metrics(metrics_path, std::ios::binary | std::ios::trunc);
  if (!metrics) throw IoError("cannot write " + metrics_path.string());
  metrics << metrics_header() << '\n';
  auto on_row = [&](const MetricsRow& row) {
    metrics << format_metrics_row(row) << '\n';
    metrics.flush();
  };
  TrainResult result = run_training(*env, config, on_row);
  metrics.close();
  if (!metrics) throw IoError("cannot write " + metrics_path.string());

  try {
    save_checkpoint(checkpoint_path, result.learner->export_kernel());
  } catch (const CheckpointError& e) {
    throw IoError(e.what());
  }

  manifest["finished_at"] = iso_now();
  manifest["status"] = "completed";
  manifest["summary"] = {{"episodes", result.episodes},
                         {"train_steps", result.train_steps},
                         {"metrics_rows", result.rows.size()}};
  if (!result.rows.empty() && result.rows.back().mean_return) {
    manifest["summary"]["final_mean_return"] = *result.rows.back().mean_return;
  }
  write_text(manifest_path, manifest.dump(2) + "\n");

  out << dir.string() << '\n';
  if (!result.rows.empty()) out << metrics_header() << '\n' << format_metrics_row(result.rows.back()) << '\n';
  return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<TrainConfig> configs;
  try {
    const TrainConfig base = resolve_config(a);
    if (a.seeds.empty()) {
      configs.push_back(base);
    } else {
      for (std::uint64_t s : a.seeds) {
        TrainConfig c = base;
        c.seed = s;
        configs.push_back(c);
      }
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  }

  try {
    const fs::path root = output_root(a.out);
    for (const TrainConfig& c : configs) train_one(c, root, out);
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}

// Picks the environment whose shape matches the kernel when none is named.
std::unique_ptr<envs::Environment> environment_for(const QDppKernel& kernel, const std::optional<std::string>& name) {
  const GroundSet& gs = kernel.ground_set();
  auto matches = [&](const envs::EnvSpec& s) {
    return s.n_agents == gs.n_agents() && s.n_obs == gs.n_obs() && s.n_actions == gs.n_actions();
  };
  if (name) {
    auto env = envs::make_environment(*name);
    if (!matches(env->spec())) throw ConfigError("checkpoint shape does not match environment '" + *name + "'");
    return env;
  }
  for (const auto& n : envs::environment_names()) {
    auto env = envs::make_environment(n);
    if (matches(env->spec())) return env;
  }
  throw ConfigError("no environment matches the checkpoint shape; pass --env");
}

QDppKernel load_or_throw(const std::string& path) {
  if (!fs::exists(path)) throw IoError("checkpoint not found: " + path);
  return load_checkpoint(path);
}

struct EvalArgs {
  std::string checkpoint;
  std::optional<std::string> env;
  std::size_t episodes = 10;
  std::uint64_t seed = 1;
  std::optional<std::string> out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  if (a.episodes == 0) {
    err << "config error: --episodes must be positive\n";
    return kExitConfig;
  }
  try {
    const QDppKernel kernel = load_or_throw(a.checkpoint);
    const auto env = environment_for(kernel, a.env);
    Rng rng(a.seed, Stream::kEval);
    const EvalResult r = evaluate_policy(*env, kernel_policy(kernel), a.episodes, rng);

    const fs::path csv = a.out ? fs::path(*a.out) : fs::path(a.checkpoint).parent_path() / "eval.csv";
    std::ostringstream s;
    s << "episode,return\n";
    for (std::size_t k = 0; k < r.returns.size(); ++k) s << k << ',' << format_double(r.returns[k]) << '\n';
    write_text(csv, s.str());
    out << "mean_return " << format_double(r.mean) << " +- " << format_double(r.stddev) << " over "
        << a.episodes << " episodes on " << env->spec().name << '\n';
    return kExitOk;
  } catch (const CheckpointError& e) {
    err << "corrupt checkpoint: " << e.what() << '\n';
    return kExitCorrupt;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  }
}

struct SampleDebugArgs {
  std::optional<std::string> checkpoint;
  std::optional<std::string> env;
  std::uint64_t seed = 1;
  std::size_t feature_dim = 32;
  std::vector<std::size_t> obs;
  std::size_t draws = 100'000;
  std::optional<std::string> out;
};

std::string join_actions(std::span<const std::size_t> actions) {
  std::string s;
  for (std::size_t i = 0; i < actions.size(); ++i) s += (i ? " " : "") + std::to_string(actions[i]);
  return s;
}

int cmd_sample_debug(const SampleDebugArgs& a, std::ostream& out, std::ostream& err) {
  try {
    QDppKernel kernel = [&] {
      if (a.checkpoint) return load_or_throw(*a.checkpoint);
      if (!a.env) throw ConfigError("pass --checkpoint or --env");
      const auto spec = envs::make_environment(*a.env)->spec();
      Rng init(a.seed, Stream::kInit);
      return QDppKernel::random_init(GroundSet(spec.n_agents, spec.n_obs, spec.n_actions), a.feature_dim, init);
    }();
    const GroundSet& gs = kernel.ground_set();
    std::vector<std::size_t> obs = a.obs.empty() ? std::vector<std::size_t>(gs.n_agents(), 0) : a.obs;
    try {
      gs.check_joint_obs(obs);
    } catch (const std::out_of_range& e) {
      throw ConfigError(std::string("bad --obs: ") + e.what());
    }

    const JointDistribution dist = exact_distribution(kernel, obs);
    const std::vector<double> dets = outcome_determinants(kernel, obs);
    Rng rng(a.seed, Stream::kSampler);
    const Theorem1Report report = theorem1_check(kernel, obs, a.draws, rng);

    const fs::path dir = a.out ? fs::path(*a.out) : make_unique_dir(output_root(std::nullopt), "sample-debug");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string());

    std::ostringstream d;
    d << "outcome,actions,determinant,probability\n";
    for (std::size_t k = 0; k < dist.outcome_count(); ++k) {
      d << k << ',' << join_actions(dist.actions_of(k)) << ',' << format_double(dets[k]) << ','
        << format_double(dist.probabilities[k]) << '\n';
    }
    write_text(dir / "exact_distribution.csv", d.str());

    std::ostringstream t;
    t << "actions,empirical,exact,bound,std_error,skipped,pass\n";
    std::size_t failed = 0;
    for (const BoundRow& row : report.rows) {
      t << join_actions(row.actions) << ',' << format_double(row.empirical) << ',' << format_double(row.exact)
        << ',' << format_double(row.bound) << ',' << format_double(row.std_error) << ','
        << (row.skipped ? 1 : 0) << ',' << (row.pass ? 1 : 0) << '\n';
      if (!row.skipped && !row.pass) ++failed;
    }
    write_text(dir / "theorem1.csv", t.str());

    out << dir.string() << '\n'
        << "delta " << format_double(report.delta) << ", outcomes " << report.rows.size() << ", draws "
        << report.draws << (report.skipped ? ", bound vacuous (rows skipped)" : "") << ", failed rows " << failed
        << '\n';
    return kExitOk;
  } catch (const OracleGuardError& e) {
    err << "oracle guard: " << e.what() << '\n';
    return kExitGuard;
  } catch (const CheckpointError& e) {
    err << "corrupt checkpoint: " << e.what() << '\n';
    return kExitCorrupt;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Determinantal Q-learning for cooperative multi-agent tasks", "qdpp"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a learner and write a run directory");
  t->add_option("--env", train.env, "matrix, blocker, spread, predprey, predprey-small");
  t->add_option("--algo", train.algo, "qdpp, iql or vdn");
  t->add_option("--seed", train.seed, "Run seed");
  t->add_option("--seeds", train.seeds, "Comma-separated seeds, one run each")->delimiter(',');
  t->add_option("--steps", train.steps, "Environment steps");
  t->add_option("--config", train.config, "Flat key = value config file");
  t->add_option("--out", train.out, "Output root (default $QDPP_OUT_DIR or ./runs)");
  t->add_option("--delta", train.delta, "Balance threshold in (0, 1]");
  t->add_option("--penalty-weight", train.penalty_weight, "Weight of the balance penalty (0 disables)");
  t->add_option("--epsilon-start", train.epsilon_start, "Initial exploration rate");
  t->add_option("--epsilon-end", train.epsilon_end, "Final exploration rate");
  t->add_option("--epsilon-decay-steps", train.epsilon_decay_steps, "Steps of linear decay");
  t->get_option("--seed")->excludes("--seeds");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  e->add_option("--env", eval.env, "Environment (inferred from the checkpoint shape if omitted)");
  e->add_option("--episodes", eval.episodes, "Number of episodes");
  e->add_option("--seed", eval.seed, "Evaluation seed");
  e->add_option("--out", eval.out, "Eval CSV path (default next to the checkpoint)");

  SampleDebugArgs debug;
  auto* s = app.add_subcommand("sample-debug", "Exact distribution and sampler bound report");
  s->add_option("--checkpoint", debug.checkpoint, "Checkpoint file");
  s->add_option("--env", debug.env, "Use a randomly initialized kernel for this environment");
  s->add_option("--seed", debug.seed, "Seed for initialization and sampling");
  s->add_option("--feature-dim", debug.feature_dim, "Diversity dimension of the random kernel");
  s->add_option("--obs", debug.obs, "Comma-separated joint observation (default all zeros)")->delimiter(',');
  s->add_option("--draws", debug.draws, "Sampler draws");
  s->add_option("--out", debug.out, "Output directory");

  auto* v = app.add_subcommand("version", "Print the version");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (t->parsed()) return cmd_train(train, out, err);
  if (e->parsed()) return cmd_eval(eval, out, err);
  if (s->parsed()) return cmd_sample_debug(debug, out, err);
  if (v->parsed()) {
    out << build_id() << '\n';
    return kExitOk;
  }
  return kExitFailure;
}

}  // namespace qdpp::cli
