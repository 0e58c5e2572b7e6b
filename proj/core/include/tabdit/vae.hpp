#pragma once

#include <limits>
#include <string>
#include <vector>

#include "tabdit/codec.hpp"
#include "tabdit/nn/graph.hpp"
#include "tabdit/nn/modules.hpp"
#include "tabdit/schema.hpp"

namespace tabdit {

struct VaeConfig {
    int width = 72;
    int heads = 8;
    int encoder_blocks = 3;
    int decoder_blocks = 3;
    int latent_dim = 792;  // d
    double dropout = 0.1;
    double logsig_clamp = 8.0;
};

// Adaptive KL weight: beta starts at beta_max and decays by `decay` whenever
// the validation reconstruction fails to improve for `patience` evaluations,
// floored at beta_min.
struct VaeLossConfig {
    double beta_max = 5.0;
    double beta_min = 0.05;
    double decay = 0.7;
    int patience = 5;
};

struct BetaState {
    double beta = 5.0;
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
};

inline double beta_schedule_step(BetaState& state, const VaeLossConfig& cfg,
                                 double validation_recon) {
    if (validation_recon < state.best) {
        state.best = validation_recon;
        state.stale = 0;
        return state.beta;
    }
    if (++state.stale >= cfg.patience) {
        state.beta = std::max(cfg.beta_min, cfg.decay * state.beta);
        state.stale = 0;
    }
    return state.beta;
}

// Row VAE: a shared token embedding feeds two self-attention towers (mu and
// log-sigma); per-token features are flattened and projected to the flat
// latent z. The decoder projects z back to nu context vectors and emits
// tokens autoregressively with causal self-attention plus cross-attention
// to those context vectors.
template <typename S>
class RowVaeT {
  public:
    RowVaeT(const Schema& schema, const VaeConfig& cfg, std::uint64_t seed)
        : schema_(schema), cfg_(cfg) {
        Rng rng(seed);
        const int nu = schema_.token_width();
        const int width = cfg_.width;

        for (const auto& vocab : schema_.vocabs())
            vocab_tables_.push_back(params_.add_normal("vae.emb." + vocab.name, vocab.size, width,
                                                       rng, nn::kInitStd));
        enc_pos_ = params_.add_normal("vae.enc.pos", nu, width, rng, nn::kInitStd);
        dec_pos_ = params_.add_normal("vae.dec.pos", nu, width, rng, nn::kInitStd);
        start_table_ = params_.add_normal("vae.dec.start", 1, width, rng, nn::kInitStd);

        for (int b = 0; b < cfg_.encoder_blocks; ++b) {
            mu_tower_.push_back(nn::EncoderBlockT<S>::create(
                params_, "vae.enc.mu." + std::to_string(b), width, cfg_.heads, rng, cfg_.dropout));
            sig_tower_.push_back(nn::EncoderBlockT<S>::create(
                params_, "vae.enc.sig." + std::to_string(b), width, cfg_.heads, rng, cfg_.dropout));
        }
        mu_head_ = nn::LinearT<S>::create(params_, "vae.enc.mu_head", nu * width, cfg_.latent_dim,
                                          rng, nn::kInitStd);
        sig_head_ = nn::LinearT<S>::create(params_, "vae.enc.sig_head", nu * width, cfg_.latent_dim,
                                           rng, nn::kInitStd);
        ctx_proj_ = nn::LinearT<S>::create(params_, "vae.dec.ctx", cfg_.latent_dim, nu * width, rng,
                                           nn::kInitStd);
        for (int b = 0; b < cfg_.decoder_blocks; ++b)
            dec_blocks_.push_back(nn::DecoderBlockT<S>::create(
                params_, "vae.dec." + std::to_string(b), width, cfg_.heads, rng, cfg_.dropout));
        for (const auto& vocab : schema_.vocabs())
            vocab_heads_.push_back(nn::LinearT<S>::create(params_, "vae.head." + vocab.name, width,
                                                          vocab.size, rng, nn::kInitStd));

        // Encoder tables per position; decoder tables are shifted right with
        // the [Start] pseudo-table at step 0.
        for (int t = 0; t < nu; ++t) enc_tables_.push_back(vocab_tables_[schema_.positions()[t].vocab]);
        dec_tables_.push_back(start_table_);
        for (int t = 0; t + 1 < nu; ++t)
            dec_tables_.push_back(vocab_tables_[schema_.positions()[t].vocab]);
    }

    const Schema& schema() const { return schema_; }
    const VaeConfig& config() const { return cfg_; }
    nn::ParamStoreT<S>& params() { return params_; }
    const nn::ParamStoreT<S>& params() const { return params_; }

    // ---- encoding ------------------------------------------------------

    struct EncodeNodes {
        nn::Val mu;
        nn::Val logsig;
        nn::Val features;  // mu-tower last-layer token features [B*nu, width]
    };

    EncodeNodes encode_nodes(nn::GraphT<S>& g, const std::vector<int>& dense_ids, int batch) const {
        const int nu = schema_.token_width();
        nn::Val emb = g.embed_positions(enc_tables_, to_local(dense_ids), batch);
        emb = g.add_seqvec(emb, g.param(enc_pos_));
        emb = g.dropout(emb, cfg_.dropout);
        nn::Val h_mu = emb;
        for (const auto& block : mu_tower_) h_mu = block(g, h_mu, batch, nu);
        nn::Val h_sig = emb;
        for (const auto& block : sig_tower_) h_sig = block(g, h_sig, batch, nu);
        EncodeNodes out;
        out.features = h_mu;
        out.mu = mu_head_(g, g.reshape(h_mu, batch, nu * cfg_.width));
        out.logsig = g.clamp(sig_head_(g, g.reshape(h_sig, batch, nu * cfg_.width)),
                             -cfg_.logsig_clamp, cfg_.logsig_clamp);
        return out;
    }

    // z = mu + exp(logsig) * eps
    nn::Val reparameterize(nn::GraphT<S>& g, nn::Val mu, nn::Val logsig, nn::Val eps) const {
        return g.add(mu, g.mul(g.exp(logsig), eps));
    }

    // Posterior mean latents for a batch of token rows (deterministic).
    nn::TensorT<S> encode_mu(const std::vector<std::vector<int>>& token_rows) const {
        nn::GraphT<S> g(const_cast<nn::ParamStoreT<S>*>(&params_));
        EncodeNodes nodes = encode_nodes(g, flatten(token_rows), static_cast<int>(token_rows.size()));
        return g.val(nodes.mu);
    }

    struct EncodeResult {
        nn::TensorT<S> mu;
        nn::TensorT<S> logsig;
        nn::TensorT<S> features;
    };

    EncodeResult encode_full(const std::vector<std::vector<int>>& token_rows) const {
        nn::GraphT<S> g(const_cast<nn::ParamStoreT<S>*>(&params_));
        EncodeNodes nodes = encode_nodes(g, flatten(token_rows), static_cast<int>(token_rows.size()));
        return {g.val(nodes.mu), g.val(nodes.logsig), g.val(nodes.features)};
    }

    // Recover the flat latent from mu-tower token features [B*nu, width].
    nn::TensorT<S> latent_from_features(const nn::TensorT<S>& features) const {
        const int nu = schema_.token_width();
        const int batch = features.rows / nu;
        nn::GraphT<S> g(const_cast<nn::ParamStoreT<S>*>(&params_));
        nn::Val f = g.input(features);
        return g.val(mu_head_(g, g.reshape(f, batch, nu * cfg_.width)));
    }

    // ---- decoding --------------------------------------------------------

    // Greedy autoregressive decode of a batch of latents into dense token
    // ids. With allow_eos=false the [EoS] logit is masked out, which
    // guarantees a decodable row (used for single-row parent generation).
    std::vector<std::vector<int>> decode_tokens(const nn::TensorT<S>& z,
                                                bool allow_eos = true) const {
        std::vector<std::vector<int>> out(z.rows);
        const int chunk = 512;
        for (int begin = 0; begin < z.rows; begin += chunk) {
            const int count = std::min(chunk, z.rows - begin);
            nn::TensorT<S> part(count, z.cols);
            for (int r = 0; r < count; ++r)
                std::copy(z.row(begin + r), z.row(begin + r) + z.cols, part.row(r));
            auto rows = decode_chunk(part, allow_eos);
            for (int r = 0; r < count; ++r) out[begin + r] = std::move(rows[r]);
        }
        return out;
    }

    // Teacher-forced per-position logits feature matrix [B*nu, width]; used
    // by the loss and by tests probing decoder causality.
    nn::Val decoder_features(nn::GraphT<S>& g, nn::Val z, const std::vector<int>& dense_ids,
                             int batch) const {
        const int nu = schema_.token_width();
        std::vector<int> shifted(batch * nu, 0);
        const auto local = to_local(dense_ids);
        for (int b = 0; b < batch; ++b) {
            shifted[b * nu] = 0;  // [Start]
            for (int t = 1; t < nu; ++t) shifted[b * nu + t] = local[b * nu + t - 1];
        }
        nn::Val x = g.embed_positions(dec_tables_, shifted, batch);
        x = g.add_seqvec(x, g.param(dec_pos_));
        x = g.dropout(x, cfg_.dropout);
        nn::Val ctx = g.reshape(ctx_proj_(g, z), batch * nu, cfg_.width);
        for (const auto& block : dec_blocks_) x = block(g, x, ctx, batch, nu, nu);
        return x;
    }

    // ---- loss ------------------------------------------------------------

    struct LossNodes {
        nn::Val loss;
        nn::Val recon;
        nn::Val kl;
    };

    // recon = mean token cross entropy, kl = per-sample per-dimension mean
    // Gaussian KL; loss = recon + beta * kl. With noise_rng == nullptr the
    // latent is the posterior mean (used for deterministic evaluation).
    LossNodes build_loss(nn::GraphT<S>& g, const std::vector<std::vector<int>>& token_rows,
                         double beta, Rng* noise_rng) const {
        const int batch = static_cast<int>(token_rows.size());
        const int nu = schema_.token_width();
        const auto flat = flatten(token_rows);

        EncodeNodes enc = encode_nodes(g, flat, batch);
        nn::Val z = enc.mu;
        if (noise_rng) {
            nn::Val eps = g.input(nn::TensorT<S>::randn(batch, cfg_.latent_dim, *noise_rng));
            z = reparameterize(g, enc.mu, enc.logsig, eps);
        }
        nn::Val feats = decoder_features(g, z, flat, batch);

        const auto local = to_local(flat);
        nn::Val recon_sum;
        bool first = true;
        for (std::size_t v = 0; v < schema_.vocabs().size(); ++v) {
            std::vector<int> rows;
            std::vector<int> targets;
            for (int b = 0; b < batch; ++b)
                for (int t = 0; t < nu; ++t)
                    if (schema_.positions()[t].vocab == static_cast<int>(v)) {
                        rows.push_back(b * nu + t);
                        targets.push_back(local[b * nu + t]);
                    }
            if (rows.empty()) continue;
            nn::Val logits = vocab_heads_[v](g, g.gather_rows(feats, rows));
            nn::Val ce = g.cross_entropy_sum(logits, targets);
            recon_sum = first ? ce : g.add(recon_sum, ce);
            first = false;
        }
        LossNodes out;
        out.recon = g.scale(recon_sum, 1.0 / (static_cast<double>(batch) * nu));

        // 0.5 * (mu^2 + sigma^2 - 1 - 2 log sigma), averaged over batch and dim
        nn::Val mu_sq = g.mul(enc.mu, enc.mu);
        nn::Val sig_sq = g.exp(g.scale(enc.logsig, 2.0));
        nn::Val kl_elem = g.add_const(g.sub(g.add(mu_sq, sig_sq), g.scale(enc.logsig, 2.0)), -1.0);
        out.kl = g.scale(g.sum_all(kl_elem), 0.5 / (static_cast<double>(batch) * cfg_.latent_dim));
        out.loss = g.add(out.recon, g.scale(out.kl, beta));
        return out;
    }

    // Greedy-decode token accuracy against the source rows.
    double token_accuracy(const std::vector<std::vector<int>>& token_rows) const {
        const auto mu = encode_mu(token_rows);
        const auto decoded = decode_tokens(mu);
        std::size_t hits = 0;
        std::size_t total = 0;
        for (std::size_t r = 0; r < token_rows.size(); ++r)
            for (std::size_t t = 0; t < token_rows[r].size(); ++t) {
                hits += decoded[r][t] == token_rows[r][t];
                ++total;
            }
        return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
    }

    std::vector<int> to_local(const std::vector<int>& dense_ids) const {
        const int nu = schema_.token_width();
        std::vector<int> local(dense_ids.size());
        for (std::size_t i = 0; i < dense_ids.size(); ++i) {
            const auto& vocab = schema_.vocab_at(static_cast<int>(i % nu));
            const int l = dense_ids[i] - vocab.offset;
            if (l < 0 || l >= vocab.size) fail(ErrorCode::OutOfVocabulary, "dense token id");
            local[i] = l;
        }
        return local;
    }

    static std::vector<int> flatten(const std::vector<std::vector<int>>& rows) {
        std::vector<int> flat;
        flat.reserve(rows.empty() ? 0 : rows.size() * rows[0].size());
        for (const auto& row : rows) flat.insert(flat.end(), row.begin(), row.end());
        return flat;
    }

  private:
    std::vector<std::vector<int>> decode_chunk(const nn::TensorT<S>& z, bool allow_eos) const {
        const int batch = z.rows;
        const int nu = schema_.token_width();
        auto* store = const_cast<nn::ParamStoreT<S>*>(&params_);

        // Context vectors are fixed across steps; prefix ids grow by one
        // token per step (no KV cache; each step re-runs the prefix).
        nn::TensorT<S> ctx_value;
        {
            nn::GraphT<S> g(store);
            ctx_value = g.val(g.reshape(ctx_proj_(g, g.input(z)), batch * nu, cfg_.width));
        }

        std::vector<std::vector<int>> locals(batch);
        for (int step = 0; step < nu; ++step) {
            nn::GraphT<S> g(store);
            const int steps = step + 1;
            std::vector<int> ids(batch * steps);
            for (int b = 0; b < batch; ++b) {
                ids[b * steps] = 0;
                for (int t = 1; t < steps; ++t) ids[b * steps + t] = locals[b][t - 1];
            }
            std::vector<nn::ParamRef> tables(dec_tables_.begin(), dec_tables_.begin() + steps);
            nn::Val x = g.embed_positions(tables, ids, batch);
            std::vector<int> pos_rows(steps);
            for (int t = 0; t < steps; ++t) pos_rows[t] = t;
            x = g.add_seqvec(x, g.gather_rows(g.param(dec_pos_), pos_rows));
            nn::Val ctx = g.input(ctx_value);
            for (const auto& block : dec_blocks_) x = block(g, x, ctx, batch, steps, nu);

            std::vector<int> last_rows(batch);
            for (int b = 0; b < batch; ++b) last_rows[b] = b * steps + step;
            const int vocab_index = schema_.positions()[step].vocab;
            nn::Val logits = vocab_heads_[vocab_index](g, g.gather_rows(x, last_rows));
            const auto& lv = g.val(logits);
            const int eos_local = schema_.vocabs()[vocab_index].eos_local;
            for (int b = 0; b < batch; ++b) {
                const S* row = lv.row(b);
                int best = -1;
                for (int c = 0; c < lv.cols; ++c) {
                    if (!allow_eos && c == eos_local) continue;
                    if (best < 0 || row[c] > row[best]) best = c;
                }
                locals[b].push_back(best);
            }
        }

        std::vector<std::vector<int>> dense(batch, std::vector<int>(nu));
        for (int b = 0; b < batch; ++b)
            for (int t = 0; t < nu; ++t)
                dense[b][t] = schema_.vocab_at(t).offset + locals[b][t];
        return dense;
    }

    Schema schema_;
    VaeConfig cfg_;
    nn::ParamStoreT<S> params_;

    std::vector<nn::ParamRef> vocab_tables_;
    nn::ParamRef enc_pos_, dec_pos_, start_table_;
    std::vector<nn::EncoderBlockT<S>> mu_tower_, sig_tower_;
    nn::LinearT<S> mu_head_, sig_head_, ctx_proj_;
    std::vector<nn::DecoderBlockT<S>> dec_blocks_;
    std::vector<nn::LinearT<S>> vocab_heads_;
    std::vector<nn::ParamRef> enc_tables_, dec_tables_;
};

using RowVae = RowVaeT<float>;

// ---- training -------------------------------------------------------------

struct VaeTrainConfig {
    int max_steps = 4000;
    int batch_size = 128;
    double lr = 5e-5;
    double weight_decay = 0.01;
    double grad_clip = 1.0;
    double padding_prob = 0.05;
    int eval_every = 200;
    int eval_rows = 256;
    // Stop once greedy-decode token accuracy reaches this level (>1 disables).
    double target_token_accuracy = 2.0;
    VaeLossConfig beta;
};

struct TrainPoint {
    int step = 0;
    double loss = 0.0;
    double recon = 0.0;
    double kl = 0.0;
    double beta = 0.0;
};

struct VaeTrainResult {
    std::vector<TrainPoint> history;
    double token_accuracy = 0.0;
    int steps_run = 0;
    double final_beta = 0.0;
};

template <typename S>
VaeTrainResult train_row_vae(RowVaeT<S>& vae, const std::vector<std::vector<int>>& rows,
                             const VaeTrainConfig& cfg, std::uint64_t seed) {
    if (rows.empty()) fail(ErrorCode::EmptyDataset, "train_row_vae");
    Rng draw_rng = Rng::stream(seed, 1);
    Rng noise_rng = Rng::stream(seed, 2);
    Rng dropout_rng = Rng::stream(seed, 3);

    const auto padding = padding_row_tokens(vae.schema());
    nn::AdamWConfig opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;

    // Fixed evaluation subset (first eval_rows rows) for the beta schedule.
    std::vector<std::vector<int>> eval_rows(
        rows.begin(), rows.begin() + std::min<std::size_t>(rows.size(), cfg.eval_rows));

    BetaState beta_state;
    beta_state.beta = cfg.beta.beta_max;

    VaeTrainResult result;
    for (int step = 1; step <= cfg.max_steps; ++step) {
        std::vector<std::vector<int>> batch(cfg.batch_size);
        for (auto& slot : batch)
            slot = draw_rng.bernoulli(cfg.padding_prob)
                       ? padding
                       : rows[draw_rng.uniform_int(0, static_cast<std::int64_t>(rows.size()) - 1)];

        vae.params().zero_grad();
        nn::GraphT<S> g(&vae.params(), &dropout_rng, /*training=*/true);
        auto loss = vae.build_loss(g, batch, beta_state.beta, &noise_rng);
        g.backward(loss.loss);
        if (cfg.grad_clip > 0) {
            double norm_sq = 0.0;
            for (const auto& e : vae.params().entries())
                for (S v : e.grad.data) norm_sq += static_cast<double>(v) * v;
            const double norm = std::sqrt(norm_sq);
            if (norm > cfg.grad_clip) {
                const double factor = cfg.grad_clip / norm;
                for (auto& e : vae.params().entries())
                    for (auto& v : e.grad.data) v = static_cast<S>(v * factor);
            }
        }
        vae.params().adamw_step(opt);

        if (step % 10 == 0 || step == 1)
            result.history.push_back({step, g.scalar(loss.loss), g.scalar(loss.recon),
                                      g.scalar(loss.kl), beta_state.beta});

        if (step % cfg.eval_every == 0) {
            nn::GraphT<S> ge(&vae.params());
            auto eval_loss = vae.build_loss(ge, eval_rows, beta_state.beta, nullptr);
            beta_schedule_step(beta_state, cfg.beta, ge.scalar(eval_loss.recon));
            if (cfg.target_token_accuracy <= 1.0) {
                const double acc = vae.token_accuracy(eval_rows);
                if (acc >= cfg.target_token_accuracy) {
                    result.steps_run = step;
                    break;
                }
            }
        }
        result.steps_run = step;
    }
    result.token_accuracy = vae.token_accuracy(eval_rows);
    result.final_beta = beta_state.beta;
    return result;
}

}  // namespace tabdit
