#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "qdpp/kernel.hpp"

namespace qdpp {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary kernel snapshot, little-endian:
//   "QDPK" | u32 version | u64 n_agents, n_obs, n_actions, feature_dim |
//   f64 D[M] | f64 B[M * P] (row-major)
inline constexpr char kCheckpointMagic[4] = {'Q', 'D', 'P', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const QDppKernel& kernel);
QDppKernel read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const QDppKernel& kernel);
QDppKernel load_checkpoint(const std::filesystem::path& path);

}  // namespace qdpp
