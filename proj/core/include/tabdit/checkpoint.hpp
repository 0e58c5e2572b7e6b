#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tabdit/diffusion.hpp"
#include "tabdit/latent_scaler.hpp"
#include "tabdit/dit.hpp"
#include "tabdit/vae.hpp"

namespace tabdit {

// Versioned single-file container: magic + JSON header (kind, schema,
// config, beta/optimizer state, seed, tensor directory) + raw float32 data.

void save_vae_checkpoint(const std::string& path, const RowVae& vae, const BetaState& beta,
                         std::uint64_t seed);

struct LoadedVae {
    RowVae vae;
    BetaState beta;
    std::uint64_t seed = 0;
};
LoadedVae load_vae_checkpoint(const std::string& path);

void save_denoiser_checkpoint(const std::string& path, const Denoiser& model,
                              const NoiseSchedule& schedule, const LatentScaler& scaler,
                              std::uint64_t child_schema_hash, std::uint64_t seed);

struct LoadedDenoiser {
    Denoiser model;
    NoiseSchedule schedule;
    LatentScaler scaler;
    std::uint64_t child_schema_hash = 0;
    std::uint64_t seed = 0;
};
LoadedDenoiser load_denoiser_checkpoint(const std::string& path);

// Schema hash recorded in a checkpoint without loading the tensors.
struct CheckpointInfo {
    std::string kind;
    std::uint64_t schema_hash = 0;
};
CheckpointInfo peek_checkpoint(const std::string& path);

}  // namespace tabdit
