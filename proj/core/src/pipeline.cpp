#include "tabdit/pipeline.hpp"

#include <algorithm>

#include "tabdit/codec.hpp"
#include "tabdit/errors.hpp"

namespace tabdit {

namespace {

std::vector<std::vector<int>> tokenize_corpus_rows(const Schema& schema,
                                                   const std::vector<TimeSeries>& series) {
    std::vector<std::vector<int>> rows;
    for (const auto& s : series)
        for (const auto& row : s.rows) rows.push_back(tokenize_row(row, schema));
    return rows;
}

std::vector<std::vector<int>> tokenize_rows(const Schema& schema, const std::vector<Row>& rows) {
    std::vector<std::vector<int>> tokens;
    tokens.reserve(rows.size());
    for (const auto& row : rows) tokens.push_back(tokenize_row(row, schema));
    return tokens;
}

}  // namespace

nn::Tensor encode_series(const RowVae& vae, const TimeSeries& series, int tau_max) {
    if (series.rows.empty()) fail(ErrorCode::EmptySeries, "series has no rows");
    if (static_cast<int>(series.rows.size()) > tau_max)
        fail(ErrorCode::SeriesTooLong, "series length " + std::to_string(series.rows.size()) +
                                           " exceeds tau_max " + std::to_string(tau_max));
    std::vector<std::vector<int>> tokens;
    for (const auto& row : series.rows) tokens.push_back(tokenize_row(row, vae.schema()));
    tokens.push_back(padding_row_tokens(vae.schema()));
    nn::Tensor encoded = vae.encode_mu(tokens);

    const int d = encoded.cols;
    nn::Tensor out(tau_max, d);
    const int tau = static_cast<int>(series.rows.size());
    for (int r = 0; r < tau_max; ++r) {
        const int src = r < tau ? r : tau;  // padding latent is the last row
        std::copy(encoded.row(src), encoded.row(src) + d, out.row(r));
    }
    return out;
}

nn::Tensor encode_corpus(const RowVae& vae, const TrainingCorpus& corpus, int tau_max,
                         const std::string& latent_sampling, std::uint64_t seed) {
    if (corpus.series.empty()) fail(ErrorCode::EmptyDataset, "corpus has no series");
    const bool sample = latent_sampling == "sample";
    if (!sample && latent_sampling != "mean")
        fail(ErrorCode::InvalidConfig, "latent_sampling must be 'mean' or 'sample'");

    // One batched encode for all real rows plus the padding row at the end.
    std::vector<std::vector<int>> tokens;
    for (const auto& s : corpus.series) {
        if (s.rows.empty()) fail(ErrorCode::EmptySeries, "corpus series has no rows");
        if (static_cast<int>(s.rows.size()) > tau_max)
            fail(ErrorCode::SeriesTooLong, "corpus series exceeds tau_max");
        for (const auto& row : s.rows) tokens.push_back(tokenize_row(row, vae.schema()));
    }
    tokens.push_back(padding_row_tokens(vae.schema()));

    nn::Tensor encoded;
    if (sample) {
        Rng noise(Rng::stream(seed, 21));
        auto full = vae.encode_full(tokens);
        encoded = nn::Tensor(full.mu.rows, full.mu.cols);
        for (int r = 0; r < encoded.rows; ++r)
            for (int c = 0; c < encoded.cols; ++c)
                encoded.at(r, c) = static_cast<float>(
                    full.mu.at(r, c) + std::exp(static_cast<double>(full.logsig.at(r, c))) *
                                           noise.normal());
        // The padding latent stays at the mean so padded positions agree.
        for (int c = 0; c < encoded.cols; ++c)
            encoded.at(encoded.rows - 1, c) = full.mu.at(encoded.rows - 1, c);
    } else {
        encoded = vae.encode_mu(tokens);
    }

    const int d = encoded.cols;
    nn::Tensor out(static_cast<int>(corpus.series.size()) * tau_max, d);
    const int padding_row = encoded.rows - 1;
    int cursor = 0;
    for (std::size_t s = 0; s < corpus.series.size(); ++s) {
        const int tau = static_cast<int>(corpus.series[s].rows.size());
        for (int r = 0; r < tau_max; ++r) {
            const int src = r < tau ? cursor + r : padding_row;
            std::copy(encoded.row(src), encoded.row(src) + d,
                      out.row(static_cast<int>(s) * tau_max + r));
        }
        cursor += tau;
    }
    return out;
}

Pipeline train_pipeline(const TrainingCorpus& corpus, const PipelineConfig& config) {
    if (corpus.series.empty()) fail(ErrorCode::EmptyDataset, "training corpus is empty");
    if (config.conditional) {
        if (!corpus.parent_schema || corpus.parents.size() != corpus.series.size())
            fail(ErrorCode::SchemaMismatch,
                 "conditional training requires a parent row per series");
    }

    // Stage 1: row VAE on the pooled rows.
    RowVae vae(corpus.schema, config.vae, Rng::stream(config.seed, 1).next_u64());
    const auto rows = tokenize_corpus_rows(corpus.schema, corpus.series);
    PipelineHistory history;
    {
        auto result = train_row_vae(vae, rows, config.vae_train, Rng::stream(config.seed, 2).next_u64());
        history.vae = std::move(result.history);
        history.vae_token_accuracy = result.token_accuracy;
    }

    // Stage 2: freeze the VAE, encode every series once, train the denoiser.
    history.vae_hash_before_denoiser = vae.params().content_hash();
    nn::Tensor latents =
        encode_corpus(vae, corpus, config.tau_max, config.latent_sampling, config.seed);
    LatentScaler scaler = LatentScaler::fit(latents);
    scaler.normalize(latents);

    DitConfig dit_cfg = config.dit;
    dit_cfg.tau_max = config.tau_max;
    dit_cfg.latent_dim = config.vae.latent_dim;
    std::optional<Schema> parent_schema;
    if (config.conditional) parent_schema = *corpus.parent_schema;
    Denoiser denoiser(dit_cfg, Rng::stream(config.seed, 3).next_u64(), parent_schema);
    NoiseSchedule schedule = NoiseSchedule::linear(dit_cfg.diffusion_steps);

    DitTrainConfig dit_train = config.dit_train;
    dit_train.cond_drop_prob = config.guidance.drop_prob;
    std::vector<std::vector<int>> parent_tokens;
    if (config.conditional) parent_tokens = tokenize_rows(*corpus.parent_schema, corpus.parents);
    history.denoiser = train_denoiser(denoiser, schedule, latents,
                                      config.conditional ? &parent_tokens : nullptr, dit_train,
                                      Rng::stream(config.seed, 4).next_u64());

    history.vae_hash_after_denoiser = vae.params().content_hash();
    if (history.vae_hash_after_denoiser != history.vae_hash_before_denoiser)
        fail(ErrorCode::SchemaMismatch, "VAE parameters changed during denoiser training");

    return Pipeline{std::move(vae), std::move(denoiser), std::move(schedule), config.guidance,
                    std::move(scaler), std::move(history)};
}

std::vector<GeneratedSeries> generate_series(const Pipeline& pipeline, int count,
                                             const std::optional<std::vector<Row>>& conditions,
                                             double guidance_scale, std::uint64_t seed) {
    const auto& model = pipeline.denoiser;
    const int tau_max = model.config().tau_max;
    const int d = model.config().latent_dim;

    if (model.conditional() != conditions.has_value())
        fail(ErrorCode::SchemaMismatch,
             model.conditional() ? "conditional pipeline needs parent rows"
                                 : "unconditional pipeline cannot take conditions");
    if (conditions) count = static_cast<int>(conditions->size());
    if (count <= 0) return {};

    SamplerDenoiser<float> sampler;
    nn::Tensor cond_emb, null_emb;
    if (model.conditional()) {
        const Schema& parent_schema = model.condition_encoder().schema();
        cond_emb = model.encode_conditions(tokenize_rows(parent_schema, *conditions));
        null_emb = model.null_condition_embedding(count);
        sampler.uncond = [&](const nn::Tensor& s, int t) { return model.denoise(s, t, &null_emb); };
        sampler.cond = [&](const nn::Tensor& s, int t) { return model.denoise(s, t, &cond_emb); };
    } else {
        sampler.uncond = [&](const nn::Tensor& s, int t) { return model.denoise(s, t, nullptr); };
    }

    nn::Tensor latents =
        sample_chain(pipeline.schedule, sampler, count, tau_max, d, guidance_scale, seed);
    pipeline.scaler.denormalize(latents);
    const auto token_rows = pipeline.vae.decode_tokens(latents);

    std::vector<GeneratedSeries> out(count);
    for (int i = 0; i < count; ++i) {
        GeneratedSeries& series = out[i];
        series.declared_length = tau_max;
        for (int r = 0; r < tau_max; ++r) {
            auto row = detokenize_row(token_rows[i * tau_max + r], pipeline.vae.schema());
            if (!row) {
                series.declared_length = r;
                break;
            }
            series.rows.push_back(std::move(*row));
        }
        // Length closure: rows kept == declared length.
        series.rows.resize(series.declared_length);
    }
    return out;
}

SrPipeline train_sr_pipeline(const Schema& parent_schema, const std::vector<Row>& parents,
                             const PipelineConfig& config) {
    if (parents.empty()) fail(ErrorCode::EmptyDataset, "no parent rows");

    RowVae vae(parent_schema, config.vae, Rng::stream(config.seed, 5).next_u64());
    const auto rows = tokenize_rows(parent_schema, parents);
    PipelineHistory history;
    {
        auto result = train_row_vae(vae, rows, config.vae_train, Rng::stream(config.seed, 6).next_u64());
        history.vae = std::move(result.history);
        history.vae_token_accuracy = result.token_accuracy;
    }
    history.vae_hash_before_denoiser = vae.params().content_hash();

    // The denoiser sequence is the per-token feature row of a single row:
    // tau = nu(parent), element width = the VAE hidden width.
    const int nu = parent_schema.token_width();
    nn::Tensor features = vae.encode_full(rows).features;  // [N*nu, width]
    LatentScaler scaler = LatentScaler::fit(features);
    scaler.normalize(features);

    DitConfig dit_cfg = config.dit;
    dit_cfg.tau_max = nu;
    dit_cfg.latent_dim = config.vae.width;
    Denoiser denoiser(dit_cfg, Rng::stream(config.seed, 7).next_u64());
    NoiseSchedule schedule = NoiseSchedule::linear(dit_cfg.diffusion_steps);

    DitTrainConfig dit_train = config.dit_train;
    dit_train.cond_drop_prob = 0.0;
    history.denoiser = train_denoiser(denoiser, schedule, features, nullptr, dit_train,
                                      Rng::stream(config.seed, 8).next_u64());
    history.vae_hash_after_denoiser = vae.params().content_hash();

    return SrPipeline{std::move(vae), std::move(denoiser), std::move(schedule), std::move(scaler),
                      std::move(history)};
}

std::vector<Row> generate_parent_rows(const SrPipeline& sr, int count, std::uint64_t seed) {
    if (count <= 0) return {};
    const int nu = sr.vae.schema().token_width();
    const int width = sr.vae.config().width;

    SamplerDenoiser<float> sampler;
    sampler.uncond = [&](const nn::Tensor& s, int t) { return sr.denoiser.denoise(s, t, nullptr); };
    nn::Tensor features = sample_chain(sr.schedule, sampler, count, nu, width, 1.0, seed);
    sr.scaler.denormalize(features);
    nn::Tensor z = sr.vae.latent_from_features(features);
    const auto tokens = sr.vae.decode_tokens(z, /*allow_eos=*/false);

    std::vector<Row> rows;
    rows.reserve(count);
    for (const auto& row_tokens : tokens) {
        auto row = detokenize_row(row_tokens, sr.vae.schema());
        if (!row) fail(ErrorCode::OutOfVocabulary, "masked decode produced an EoS row");
        rows.push_back(std::move(*row));
    }
    return rows;
}

}  // namespace tabdit
