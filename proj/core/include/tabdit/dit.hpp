#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tabdit/diffusion.hpp"
#include "tabdit/nn/graph.hpp"
#include "tabdit/nn/modules.hpp"
#include "tabdit/schema.hpp"

namespace tabdit {

struct DitConfig {
    int depth = 12;
    int heads = 12;
    int hidden = 792;      // d: transformer width, also the latent width
    int latent_dim = 792;  // width of each sequence element fed to the network
    int tau_max = 50;      // sequence length
    int diffusion_steps = 200;  // T
    double dropout = 0.1;
    bool positional = true;  // fixed sinusoidal positional encoding
    // Condition-encoder tower (same shape as the VAE encoder tower).
    int cond_width = 72;
    int cond_heads = 8;
    int cond_blocks = 3;
};

// Parent-row condition encoder: per-vocabulary token embeddings, a
// self-attention tower and a flatten projection to the denoiser width.
// Trained jointly with the denoiser (its parameters live in the same store).
template <typename S>
class ConditionEncoderT {
  public:
    ConditionEncoderT() = default;

    ConditionEncoderT(nn::ParamStoreT<S>& ps, const Schema& parent_schema, const DitConfig& cfg,
                      Rng& rng)
        : schema_(parent_schema), width_(cfg.cond_width), dropout_(cfg.dropout) {
        const int nu = schema_.token_width();
        for (const auto& vocab : schema_.vocabs())
            tables_.push_back(
                ps.add_normal("cond.emb." + vocab.name, vocab.size, width_, rng, nn::kInitStd));
        pos_ = ps.add_normal("cond.pos", nu, width_, rng, nn::kInitStd);
        for (int b = 0; b < cfg.cond_blocks; ++b)
            blocks_.push_back(nn::EncoderBlockT<S>::create(ps, "cond.block." + std::to_string(b),
                                                           width_, cfg.cond_heads, rng,
                                                           cfg.dropout));
        proj_ = nn::LinearT<S>::create(ps, "cond.proj", nu * width_, cfg.hidden, rng, nn::kInitStd);
        for (int t = 0; t < nu; ++t) pos_tables_.push_back(tables_[schema_.positions()[t].vocab]);
    }

    const Schema& schema() const { return schema_; }

    // dense_ids: batch * nu parent-row tokens -> [batch, hidden]
    nn::Val encode(nn::GraphT<S>& g, const std::vector<int>& dense_ids, int batch) const {
        const int nu = schema_.token_width();
        std::vector<int> local(dense_ids.size());
        for (std::size_t i = 0; i < dense_ids.size(); ++i) {
            const auto& vocab = schema_.vocab_at(static_cast<int>(i % nu));
            const int l = dense_ids[i] - vocab.offset;
            if (l < 0 || l >= vocab.size) fail(ErrorCode::OutOfVocabulary, "condition token");
            local[i] = l;
        }
        nn::Val x = g.embed_positions(pos_tables_, local, batch);
        x = g.add_seqvec(x, g.param(pos_));
        x = g.dropout(x, dropout_);
        for (const auto& block : blocks_) x = block(g, x, batch, nu);
        return proj_(g, g.reshape(x, batch, nu * width_));
    }

  private:
    Schema schema_;
    int width_ = 0;
    double dropout_ = 0.0;
    std::vector<nn::ParamRef> tables_;
    nn::ParamRef pos_;
    std::vector<nn::EncoderBlockT<S>> blocks_;
    nn::LinearT<S> proj_;
    std::vector<nn::ParamRef> pos_tables_;
};

// Transformer denoising network over latent sequences with adaLN-Zero
// conditioning on the timestep (plus an optional parent-row condition).
template <typename S>
class DenoiserT {
  public:
    DenoiserT(const DitConfig& cfg, std::uint64_t seed,
              const std::optional<Schema>& parent_schema = std::nullopt)
        : cfg_(cfg) {
        Rng rng(seed);
        in_proj_ = nn::LinearT<S>::create(params_, "dit.in", cfg_.latent_dim, cfg_.hidden, rng,
                                          nn::kInitStd);
        t_fc1_ = nn::LinearT<S>::create(params_, "dit.t.fc1", cfg_.hidden, cfg_.hidden, rng,
                                        nn::kInitStd);
        t_fc2_ = nn::LinearT<S>::create(params_, "dit.t.fc2", cfg_.hidden, cfg_.hidden, rng,
                                        nn::kInitStd);
        for (int b = 0; b < cfg_.depth; ++b)
            blocks_.push_back(nn::DiTBlockT<S>::create(params_, "dit.block." + std::to_string(b),
                                                       cfg_.hidden, cfg_.heads, rng, cfg_.dropout));
        final_mod_ = nn::LinearT<S>::create(params_, "dit.final.mod", cfg_.hidden, 2 * cfg_.hidden,
                                            rng, 0.0);
        out_proj_ = nn::LinearT<S>::create(params_, "dit.out", cfg_.hidden, cfg_.latent_dim, rng,
                                           nn::kInitStd);
        if (parent_schema) {
            condition_ = ConditionEncoderT<S>(params_, *parent_schema, cfg_, rng);
            null_cond_ = params_.add_normal("dit.null_cond", 1, cfg_.hidden, rng, nn::kInitStd);
        }

        std::vector<double> positions(cfg_.tau_max);
        for (int i = 0; i < cfg_.tau_max; ++i) positions[i] = static_cast<double>(i);
        pos_enc_ = cfg_.positional ? nn::sinusoid_features<S>(positions, cfg_.hidden)
                                   : nn::TensorT<S>::zeros(cfg_.tau_max, cfg_.hidden);

        std::vector<double> steps(cfg_.diffusion_steps);
        for (int t = 0; t < cfg_.diffusion_steps; ++t) steps[t] = static_cast<double>(t + 1);
        t_features_ = nn::sinusoid_features<S>(steps, cfg_.hidden);
    }

    const DitConfig& config() const { return cfg_; }
    nn::ParamStoreT<S>& params() { return params_; }
    const nn::ParamStoreT<S>& params() const { return params_; }
    bool conditional() const { return null_cond_.valid(); }
    const ConditionEncoderT<S>& condition_encoder() const { return condition_; }

    // Sinusoidal timestep features followed by the two-layer MLP; one row
    // per entry of `steps`.
    nn::Val embed_timesteps(nn::GraphT<S>& g, const std::vector<int>& steps) const {
        nn::TensorT<S> feats(static_cast<int>(steps.size()), cfg_.hidden);
        for (std::size_t i = 0; i < steps.size(); ++i) {
            if (steps[i] < 1 || steps[i] > cfg_.diffusion_steps)
                fail(ErrorCode::StepOutOfRange, "timestep " + std::to_string(steps[i]));
            std::copy(t_features_.row(steps[i] - 1), t_features_.row(steps[i] - 1) + cfg_.hidden,
                      feats.row(static_cast<int>(i)));
        }
        return t_fc2_(g, g.silu(t_fc1_(g, g.input(std::move(feats)))));
    }

    // Learned null-condition embedding replicated over `batch` rows.
    nn::Val null_condition(nn::GraphT<S>& g, int batch) const {
        if (!conditional()) fail(ErrorCode::InvalidConfig, "model has no condition encoder");
        return g.embed_rows(null_cond_, std::vector<int>(batch, 0));
    }

    // Epsilon prediction. s_t: [B*tau, latent_dim]; timesteps: size B.
    // `cond` is a [B, hidden] node (condition embeddings, already routed
    // through null rows where dropped); pass nullopt for unconditional.
    nn::Val denoise_graph(nn::GraphT<S>& g, nn::Val s_t, const std::vector<int>& timesteps,
                          std::optional<nn::Val> cond) const {
        const auto& vs = g.val(s_t);
        const int batch = static_cast<int>(timesteps.size());
        if (vs.cols != cfg_.latent_dim || vs.rows != batch * cfg_.tau_max)
            fail(ErrorCode::ShapeMismatch, "denoise input shape");

        nn::Val y = embed_timesteps(g, timesteps);
        if (cond) y = g.add(y, *cond);

        nn::Val x = in_proj_(g, s_t);
        x = g.add_seqvec(x, g.input(pos_enc_));
        for (const auto& block : blocks_) x = block(g, x, y, batch, cfg_.tau_max);

        nn::Val mod = final_mod_(g, g.silu(y));
        nn::Val shift = g.slice_cols(mod, 0, cfg_.hidden);
        nn::Val gain = g.slice_cols(mod, cfg_.hidden, 2 * cfg_.hidden);
        x = nn::DiTBlockT<S>::modulate(g, g.layer_norm(x), shift, gain, cfg_.tau_max);
        return out_proj_(g, x);
    }

    // Tensor-level forward used by the sampler: one shared timestep,
    // optional precomputed condition embeddings.
    nn::TensorT<S> denoise(const nn::TensorT<S>& s_t, int t,
                           const nn::TensorT<S>* cond_embedding = nullptr) const {
        auto* store = const_cast<nn::ParamStoreT<S>*>(&params_);
        nn::GraphT<S> g(store);
        const int batch = s_t.rows / cfg_.tau_max;
        std::optional<nn::Val> cond;
        if (cond_embedding) cond = g.input(*cond_embedding);
        nn::Val out = denoise_graph(g, g.input(s_t), std::vector<int>(batch, t), cond);
        return g.val(out);
    }

    // Condition embeddings for a batch of parent rows (deterministic).
    nn::TensorT<S> encode_conditions(const std::vector<std::vector<int>>& parent_rows) const {
        auto* store = const_cast<nn::ParamStoreT<S>*>(&params_);
        nn::GraphT<S> g(store);
        std::vector<int> flat;
        for (const auto& row : parent_rows) flat.insert(flat.end(), row.begin(), row.end());
        return g.val(condition_.encode(g, flat, static_cast<int>(parent_rows.size())));
    }

    nn::TensorT<S> null_condition_embedding(int batch) const {
        auto* store = const_cast<nn::ParamStoreT<S>*>(&params_);
        nn::GraphT<S> g(store);
        return g.val(null_condition(g, batch));
    }

  private:
    DitConfig cfg_;
    nn::ParamStoreT<S> params_;
    nn::LinearT<S> in_proj_, t_fc1_, t_fc2_, final_mod_, out_proj_;
    std::vector<nn::DiTBlockT<S>> blocks_;
    ConditionEncoderT<S> condition_;
    nn::ParamRef null_cond_;
    nn::TensorT<S> pos_enc_;
    nn::TensorT<S> t_features_;
};

using Denoiser = DenoiserT<float>;

// ---- denoiser training ------------------------------------------------------

struct DitTrainConfig {
    int max_steps = 3000;
    int batch_size = 128;
    double lr = 1e-4;
    double final_lr_fraction = 1.0;  // cosine decay target as a fraction of lr
    double weight_decay = 0.01;
    double grad_clip = 1.0;
    double cond_drop_prob = 0.005;  // p_d
    // Exponential moving average of the weights; the averaged weights are
    // installed into the model when training finishes (0 disables).
    double ema_decay = 0.0;
};

struct TrainPointDit {
    int step = 0;
    double loss = 0.0;
};

// Trains the denoiser on precomputed latent sequences (row-major
// [count * tau_max, latent_dim]). parent_rows, when provided, must align
// 1:1 with the sequences.
template <typename S>
std::vector<TrainPointDit> train_denoiser(DenoiserT<S>& model, const NoiseSchedule& schedule,
                                          const nn::TensorT<S>& latents,
                                          const std::vector<std::vector<int>>* parent_rows,
                                          const DitTrainConfig& cfg, std::uint64_t seed) {
    const int tau = model.config().tau_max;
    if (latents.rows % tau != 0 || latents.rows == 0)
        fail(ErrorCode::EmptyDataset, "train_denoiser latents");
    const int count = latents.rows / tau;
    if (model.conditional()) {
        if (!parent_rows || static_cast<int>(parent_rows->size()) != count)
            fail(ErrorCode::SchemaMismatch, "conditional training needs aligned parent rows");
    }

    Rng draw_rng = Rng::stream(seed, 11);
    Rng batch_rng = Rng::stream(seed, 12);
    Rng dropout_rng = Rng::stream(seed, 13);
    nn::AdamWConfig opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;

    std::vector<std::vector<S>> ema;
    if (cfg.ema_decay > 0.0)
        for (const auto& e : model.params().entries()) ema.push_back(e.value.data);

    std::vector<TrainPointDit> history;
    for (int step = 1; step <= cfg.max_steps; ++step) {
        const int batch = std::min(cfg.batch_size, count);
        nn::TensorT<S> s0(batch * tau, latents.cols);
        std::vector<std::vector<int>> parents(batch);
        for (int b = 0; b < batch; ++b) {
            const int pick = static_cast<int>(draw_rng.uniform_int(0, count - 1));
            for (int r = 0; r < tau; ++r)
                std::copy(latents.row(pick * tau + r), latents.row(pick * tau + r) + latents.cols,
                          s0.row(b * tau + r));
            if (model.conditional()) parents[b] = (*parent_rows)[pick];
        }

        auto diffused = make_diffusion_batch(schedule, s0, tau, batch_rng,
                                             model.conditional() ? cfg.cond_drop_prob : 0.0);

        model.params().zero_grad();
        nn::GraphT<S> g(&model.params(), &dropout_rng, /*training=*/true);
        std::optional<nn::Val> cond;
        if (model.conditional()) {
            std::vector<int> flat;
            for (const auto& row : parents) flat.insert(flat.end(), row.begin(), row.end());
            nn::Val c = model.condition_encoder().encode(g, flat, batch);
            nn::Val null_rows = model.null_condition(g, batch);
            cond = g.row_select(null_rows, c, diffused.dropped);
        }
        nn::Val pred = model.denoise_graph(g, g.input(diffused.s_t), diffused.timesteps, cond);
        nn::Val loss = diffusion_mse(g, pred, diffused.eps);
        g.backward(loss);

        if (cfg.grad_clip > 0) {
            double norm_sq = 0.0;
            for (const auto& e : model.params().entries())
                for (S v : e.grad.data) norm_sq += static_cast<double>(v) * v;
            const double norm = std::sqrt(norm_sq);
            if (norm > cfg.grad_clip) {
                const double factor = cfg.grad_clip / norm;
                for (auto& e : model.params().entries())
                    for (auto& v : e.grad.data) v = static_cast<S>(v * factor);
            }
        }
        if (cfg.final_lr_fraction < 1.0) {
            const double progress = static_cast<double>(step) / cfg.max_steps;
            const double floor_lr = cfg.lr * cfg.final_lr_fraction;
            opt.lr = floor_lr + 0.5 * (cfg.lr - floor_lr) * (1.0 + std::cos(M_PI * progress));
        }
        model.params().adamw_step(opt);
        if (cfg.ema_decay > 0.0) {
            auto& entries = model.params().entries();
            for (std::size_t p = 0; p < entries.size(); ++p)
                for (std::size_t i = 0; i < ema[p].size(); ++i)
                    ema[p][i] = static_cast<S>(cfg.ema_decay * ema[p][i] +
                                               (1.0 - cfg.ema_decay) * entries[p].value.data[i]);
        }
        if (step % 10 == 0 || step == 1) history.push_back({step, g.scalar(loss)});
    }
    if (cfg.ema_decay > 0.0) {
        auto& entries = model.params().entries();
        for (std::size_t p = 0; p < entries.size(); ++p) entries[p].value.data = ema[p];
    }
    return history;
}

}  // namespace tabdit
