#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tabdit/checkpoint.hpp"
#include "tabdit/diffusion.hpp"
#include "tabdit/dit.hpp"
#include "tabdit/ingest.hpp"
#include "tabdit/latent_scaler.hpp"
#include "tabdit/vae.hpp"

namespace tabdit {

struct PipelineConfig {
    int tau_max = 50;
    bool conditional = false;
    // "mean": series latents use the posterior mean; "sample": one
    // reparameterized draw per row.
    std::string latent_sampling = "mean";
    std::uint64_t seed = 0;
    VaeConfig vae;
    VaeTrainConfig vae_train;
    DitConfig dit;  // tau_max / latent_dim / conditionality are filled in
    DitTrainConfig dit_train;
    GuidanceConfig guidance;
};

struct GeneratedSeries {
    std::vector<Row> rows;    // rows before the first padding row
    int declared_length = 0;  // position of the first padding row (tau_max if none)
};

struct PipelineHistory {
    std::vector<TrainPoint> vae;
    std::vector<TrainPointDit> denoiser;
    double vae_token_accuracy = 0.0;
    std::uint64_t vae_hash_before_denoiser = 0;
    std::uint64_t vae_hash_after_denoiser = 0;
};

// Trained two-stage bundle.
struct Pipeline {
    RowVae vae;
    Denoiser denoiser;
    NoiseSchedule schedule;
    GuidanceConfig guidance;
    LatentScaler scaler;
    PipelineHistory history;
};

// Per-row posterior-mean encoding of one series, padded with the
// padding-row latent up to tau_max. Throws SeriesTooLong / EmptySeries.
nn::Tensor encode_series(const RowVae& vae, const TimeSeries& series, int tau_max);

// Batched corpus encoding, [series_count * tau_max, d].
nn::Tensor encode_corpus(const RowVae& vae, const TrainingCorpus& corpus, int tau_max,
                         const std::string& latent_sampling, std::uint64_t seed);

Pipeline train_pipeline(const TrainingCorpus& corpus, const PipelineConfig& config);

// Unconditional or conditional generation. `conditions` must be present
// (one parent row per series) iff the pipeline is conditional.
std::vector<GeneratedSeries> generate_series(const Pipeline& pipeline, int count,
                                             const std::optional<std::vector<Row>>& conditions,
                                             double guidance_scale, std::uint64_t seed);

// ---- single-row generation (parent tables) ---------------------------------

struct SrPipeline {
    RowVae vae;
    Denoiser denoiser;
    NoiseSchedule schedule;
    LatentScaler scaler;
    PipelineHistory history;
};

// Trains the dedicated single-row pipeline on parent rows: the denoiser
// diffuses the per-token final embeddings of the VAE mu tower.
SrPipeline train_sr_pipeline(const Schema& parent_schema, const std::vector<Row>& parents,
                             const PipelineConfig& config);

std::vector<Row> generate_parent_rows(const SrPipeline& sr, int count, std::uint64_t seed);

}  // namespace tabdit
