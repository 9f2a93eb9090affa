#include "qdpp/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <fstream>
#include <istream>
#include <ostream>

namespace qdpp {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw CheckpointError("checkpoint truncated");
  }
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const QDppKernel& kernel) {
  const GroundSet& gs = kernel.ground_set();
  out.write(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, gs.n_agents());
  put<std::uint64_t>(out, gs.n_obs());
  put<std::uint64_t>(out, gs.n_actions());
  put<std::uint64_t>(out, kernel.feature_dim());
  for (double d : kernel.log_quality()) put<double>(out, d);
  for (double b : kernel.diversity().data()) put<double>(out, b);
  if (!out) throw CheckpointError("checkpoint write failed");
}

QDppKernel read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw CheckpointError("not a kernel checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto n_agents = get<std::uint64_t>(in);
  const auto n_obs = get<std::uint64_t>(in);
  const auto n_actions = get<std::uint64_t>(in);
  const auto dim = get<std::uint64_t>(in);
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 28;
  if (n_agents == 0 || n_obs == 0 || n_actions == 0 || dim == 0 ||
      n_agents * n_obs * n_actions > kLimit || dim > 4096) {
    throw CheckpointError("checkpoint header has implausible sizes");
  }
  QDppKernel kernel(GroundSet(n_agents, n_obs, n_actions), dim);
  for (double& d : kernel.log_quality()) d = get<double>(in);
  for (double& b : kernel.diversity().data()) b = get<double>(in);
  return kernel;
}

void save_checkpoint(const std::filesystem::path& path, const QDppKernel& kernel) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, kernel);
}

QDppKernel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace qdpp
