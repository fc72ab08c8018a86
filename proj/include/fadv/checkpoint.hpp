#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "fadv/nn.hpp"

namespace fadv::nn {

/// On disk: "FADV" magic, u32 format version, length-prefixed config
/// descriptor string, then the parameters as little-endian f64. The
/// descriptor holds the architecture line plus the training metadata, so a
/// checkpoint alone is enough to rebuild and query the model.
struct Checkpoint {
  ModelConfig config;
  std::vector<double> params;
  std::uint32_t epochs = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const Model& model, std::uint32_t epochs, std::uint64_t seed);
Model model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace fadv::nn
