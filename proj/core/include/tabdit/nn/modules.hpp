#pragma once

#include <string>
#include <vector>

#include "tabdit/nn/graph.hpp"
#include "tabdit/nn/params.hpp"

namespace tabdit::nn {

inline constexpr double kInitStd = 0.02;

template <typename S>
struct LinearT {
    ParamRef w;  // [out, in]
    ParamRef b;  // [1, out]
    int in = 0;
    int out = 0;

    static LinearT create(ParamStoreT<S>& ps, const std::string& name, int in, int out, Rng& rng,
                          double stddev = kInitStd) {
        LinearT layer;
        layer.in = in;
        layer.out = out;
        layer.w = stddev == 0.0 ? ps.add_zeros(name + ".w", out, in, /*decay=*/true)
                                : ps.add_normal(name + ".w", out, in, rng, stddev, /*decay=*/true);
        layer.b = ps.add_zeros(name + ".b", 1, out);
        return layer;
    }

    Val operator()(GraphT<S>& g, Val x) const {
        return g.add_rowvec(g.matmul_nt(x, g.param(w)), g.param(b));
    }
};

template <typename S>
struct LayerNormT {
    ParamRef gain;
    ParamRef bias;

    static LayerNormT create(ParamStoreT<S>& ps, const std::string& name, int width) {
        LayerNormT layer;
        layer.gain = ps.add_full(name + ".g", 1, width, S(1));
        layer.bias = ps.add_zeros(name + ".b", 1, width);
        return layer;
    }

    Val operator()(GraphT<S>& g, Val x) const {
        return g.add_rowvec(g.mul_rowvec(g.layer_norm(x), g.param(gain)), g.param(bias));
    }
};

template <typename S>
struct AttentionT {
    LinearT<S> q, k, v, o;
    int heads = 1;

    static AttentionT create(ParamStoreT<S>& ps, const std::string& name, int width, int heads,
                             Rng& rng) {
        AttentionT attn;
        attn.heads = heads;
        attn.q = LinearT<S>::create(ps, name + ".q", width, width, rng);
        attn.k = LinearT<S>::create(ps, name + ".k", width, width, rng);
        attn.v = LinearT<S>::create(ps, name + ".v", width, width, rng);
        attn.o = LinearT<S>::create(ps, name + ".o", width, width, rng);
        return attn;
    }

    Val self_attention(GraphT<S>& g, Val x, int batch, int seq, bool causal) const {
        Val out = g.attention(q(g, x), k(g, x), v(g, x), batch, seq, seq, heads, causal);
        return o(g, out);
    }

    Val cross_attention(GraphT<S>& g, Val x, Val context, int batch, int tq, int tk) const {
        Val out = g.attention(q(g, x), k(g, context), v(g, context), batch, tq, tk, heads,
                              /*causal=*/false);
        return o(g, out);
    }
};

template <typename S>
struct MlpT {
    LinearT<S> fc1, fc2;

    static MlpT create(ParamStoreT<S>& ps, const std::string& name, int width, int hidden,
                       Rng& rng) {
        MlpT mlp;
        mlp.fc1 = LinearT<S>::create(ps, name + ".fc1", width, hidden, rng);
        mlp.fc2 = LinearT<S>::create(ps, name + ".fc2", hidden, width, rng);
        return mlp;
    }

    Val operator()(GraphT<S>& g, Val x) const { return fc2(g, g.gelu(fc1(g, x))); }
};

// Pre-norm self-attention block: x + attn(ln(x)), x + mlp(ln(x)).
template <typename S>
struct EncoderBlockT {
    LayerNormT<S> ln1, ln2;
    AttentionT<S> attn;
    MlpT<S> mlp;
    double dropout = 0.0;

    static EncoderBlockT create(ParamStoreT<S>& ps, const std::string& name, int width, int heads,
                                Rng& rng, double dropout) {
        EncoderBlockT block;
        block.ln1 = LayerNormT<S>::create(ps, name + ".ln1", width);
        block.ln2 = LayerNormT<S>::create(ps, name + ".ln2", width);
        block.attn = AttentionT<S>::create(ps, name + ".attn", width, heads, rng);
        block.mlp = MlpT<S>::create(ps, name + ".mlp", width, 4 * width, rng);
        block.dropout = dropout;
        return block;
    }

    Val operator()(GraphT<S>& g, Val x, int batch, int seq) const {
        x = g.add(x, g.dropout(attn.self_attention(g, ln1(g, x), batch, seq, /*causal=*/false),
                               dropout));
        x = g.add(x, g.dropout(mlp(g, ln2(g, x)), dropout));
        return x;
    }
};

// Decoder block: causal self-attention, cross-attention to a fixed-length
// context, then the feed-forward, all pre-norm with residuals.
template <typename S>
struct DecoderBlockT {
    LayerNormT<S> ln1, ln2, ln3;
    AttentionT<S> self_attn, cross_attn;
    MlpT<S> mlp;
    double dropout = 0.0;

    static DecoderBlockT create(ParamStoreT<S>& ps, const std::string& name, int width, int heads,
                                Rng& rng, double dropout) {
        DecoderBlockT block;
        block.ln1 = LayerNormT<S>::create(ps, name + ".ln1", width);
        block.ln2 = LayerNormT<S>::create(ps, name + ".ln2", width);
        block.ln3 = LayerNormT<S>::create(ps, name + ".ln3", width);
        block.self_attn = AttentionT<S>::create(ps, name + ".self", width, heads, rng);
        block.cross_attn = AttentionT<S>::create(ps, name + ".cross", width, heads, rng);
        block.mlp = MlpT<S>::create(ps, name + ".mlp", width, 4 * width, rng);
        block.dropout = dropout;
        return block;
    }

    Val operator()(GraphT<S>& g, Val x, Val context, int batch, int tq, int tk) const {
        x = g.add(x, g.dropout(self_attn.self_attention(g, ln1(g, x), batch, tq, /*causal=*/true),
                               dropout));
        x = g.add(x, g.dropout(cross_attn.cross_attention(g, ln2(g, x), context, batch, tq, tk),
                               dropout));
        x = g.add(x, g.dropout(mlp(g, ln3(g, x)), dropout));
        return x;
    }
};

// adaLN-Zero transformer block. The conditioning vector y ([B, d]) is mapped
// by a per-block MLP to six modulation vectors; the final projection starts
// at zero so a fresh block is an exact identity.
template <typename S>
struct DiTBlockT {
    AttentionT<S> attn;
    MlpT<S> mlp;
    LinearT<S> modulation;  // d -> 6d, zero-initialized
    double dropout = 0.0;

    static DiTBlockT create(ParamStoreT<S>& ps, const std::string& name, int width, int heads,
                            Rng& rng, double dropout) {
        DiTBlockT block;
        block.attn = AttentionT<S>::create(ps, name + ".attn", width, heads, rng);
        block.mlp = MlpT<S>::create(ps, name + ".mlp", width, 4 * width, rng);
        block.modulation = LinearT<S>::create(ps, name + ".mod", width, 6 * width, rng, 0.0);
        block.dropout = dropout;
        return block;
    }

    static Val modulate(GraphT<S>& g, Val x, Val shift, Val gain, int seq) {
        return g.add_bcast(g.mul_bcast(x, g.add_const(gain, 1.0), seq), shift, seq);
    }

    Val operator()(GraphT<S>& g, Val x, Val cond, int batch, int seq) const {
        const int width = g.val(x).cols;
        Val mod = modulation(g, g.silu(cond));  // [B, 6d]
        Val shift1 = g.slice_cols(mod, 0, width);
        Val gain1 = g.slice_cols(mod, width, 2 * width);
        Val alpha1 = g.slice_cols(mod, 2 * width, 3 * width);
        Val shift2 = g.slice_cols(mod, 3 * width, 4 * width);
        Val gain2 = g.slice_cols(mod, 4 * width, 5 * width);
        Val alpha2 = g.slice_cols(mod, 5 * width, 6 * width);

        Val h = modulate(g, g.layer_norm(x), shift1, gain1, seq);
        h = g.dropout(attn.self_attention(g, h, batch, seq, /*causal=*/false), dropout);
        x = g.add(x, g.mul_bcast(h, alpha1, seq));

        h = modulate(g, g.layer_norm(x), shift2, gain2, seq);
        h = g.dropout(mlp(g, h), dropout);
        x = g.add(x, g.mul_bcast(h, alpha2, seq));
        return x;
    }
};

// Fixed sinusoidal features, shared by the timestep embedding and the
// sequence positional encoding.
template <typename S>
TensorT<S> sinusoid_features(const std::vector<double>& values, int width, double max_period = 10000.0) {
    TensorT<S> out(static_cast<int>(values.size()), width);
    const int half = width / 2;
    for (int r = 0; r < out.rows; ++r) {
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(max_period) * i / half);
            out.at(r, i) = static_cast<S>(std::sin(values[r] * freq));
            out.at(r, half + i) = static_cast<S>(std::cos(values[r] * freq));
        }
        if (width % 2 == 1) out.at(r, width - 1) = S(0);
    }
    return out;
}

}  // namespace tabdit::nn
