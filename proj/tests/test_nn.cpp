#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <vector>

#include "tabdit/nn/graph.hpp"
#include "tabdit/nn/modules.hpp"
#include "tabdit/nn/params.hpp"
#include "tabdit/nn/tensor.hpp"
#include "tabdit/rng.hpp"

using namespace tabdit;
using namespace tabdit::nn;

namespace {

using DGraph = GraphT<double>;
using DStore = ParamStoreT<double>;
using DTensor = TensorT<double>;

// Central finite differences against the tape gradients, every parameter.
// loss_fn must build the graph, run backward and return the loss value.
void check_gradients(DStore& ps, const std::function<double(DGraph&)>& loss_fn,
                     double h = 1e-5, double tol = 1e-5) {
    std::vector<std::vector<double>> analytic;
    {
        ps.zero_grad();
        DGraph gb(&ps);
        loss_fn(gb);
        for (auto& e : ps.entries()) analytic.push_back(std::vector<double>(e.grad.data));
    }
    int checked = 0;
    for (std::size_t p = 0; p < ps.entries().size(); ++p) {
        auto& entry = ps.entries()[p];
        for (std::size_t i = 0; i < entry.value.size(); ++i) {
            const double orig = entry.value.data[i];
            entry.value.data[i] = orig + h;
            double plus;
            {
                DGraph gp(&ps);
                plus = loss_fn(gp);
            }
            entry.value.data[i] = orig - h;
            double minus;
            {
                DGraph gm(&ps);
                minus = loss_fn(gm);
            }
            entry.value.data[i] = orig;
            const double fd = (plus - minus) / (2.0 * h);
            const double an = analytic[p][i];
            const double err = std::fabs(fd - an) / std::max({1.0, std::fabs(fd), std::fabs(an)});
            if (err >= tol) {
                CAPTURE(entry.name);
                CAPTURE(i);
                CAPTURE(fd);
                CAPTURE(an);
            }
            CHECK(err < tol);
            ++checked;
        }
    }
    CHECK(checked > 0);
}

double sum_loss(DGraph& g, Val x) { return g.scalar(g.sum_all(g.mul(x, x))); }

}  // namespace

TEST_CASE("gemm matches a naive triple loop") {
    Rng rng(3);
    Tensor a = Tensor::randn(7, 5, rng);
    Tensor w = Tensor::randn(4, 5, rng);
    Tensor y = matmul_nt(a, w);
    for (int i = 0; i < 7; ++i)
        for (int o = 0; o < 4; ++o) {
            float expect = 0.0f;
            for (int k = 0; k < 5; ++k) expect += a.at(i, k) * w.at(o, k);
            CHECK(y.at(i, o) == doctest::Approx(expect).epsilon(1e-5));
        }
}

TEST_CASE("elementwise and broadcast op gradients") {
    Rng rng(11);
    DStore ps;
    auto x = ps.add_normal("x", 3, 4, rng, 1.0);
    auto y = ps.add_normal("y", 3, 4, rng, 1.0);
    auto bias = ps.add_normal("bias", 1, 4, rng, 1.0);
    auto bvec = ps.add_normal("bvec", 3, 4, rng, 1.0);  // batch-broadcast over seq

    check_gradients(ps, [&](DGraph& g) {
        Val vx = g.param(x);
        Val vy = g.param(y);
        Val t = g.add(vx, vy);
        t = g.mul(t, vy);
        t = g.sub(t, g.scale(vx, 0.3));
        t = g.add_rowvec(t, g.param(bias));
        t = g.mul_rowvec(t, g.param(bias));
        // interpret rows as batch=1, seq=3 for broadcasting? use seq len 1:
        t = g.add_bcast(t, g.param(bvec), 1);
        t = g.mul_bcast(t, g.param(bvec), 1);
        t = g.gelu(t);
        t = g.silu(t);
        Val loss = g.sum_all(g.mul(t, t));
        const double value = g.scalar(loss);
        g.backward(loss);
        return value;
    });
}

TEST_CASE("matmul layer_norm exp clamp gradients") {
    Rng rng(13);
    DStore ps;
    auto x = ps.add_normal("x", 4, 6, rng, 1.0);
    auto w = ps.add_normal("w", 3, 6, rng, 0.5);

    check_gradients(ps, [&](DGraph& g) {
        Val t = g.matmul_nt(g.param(x), g.param(w));
        t = g.layer_norm(t);
        t = g.exp(g.scale(t, 0.5));
        t = g.clamp(t, 0.2, 5.0);  // all values comfortably interior or clipped
        Val loss = g.sum_all(g.mul(t, t));
        const double value = g.scalar(loss);
        g.backward(loss);
        return value;
    }, 1e-6, 1e-4);
}

TEST_CASE("attention gradients, causal and cross") {
    Rng rng(17);
    const int batch = 2, tq = 3, tk = 5, heads = 2, width = 6;
    DStore ps;
    auto q = ps.add_normal("q", batch * tq, width, rng, 0.7);
    auto k = ps.add_normal("k", batch * tk, width, rng, 0.7);
    auto v = ps.add_normal("v", batch * tk, width, rng, 0.7);

    check_gradients(ps, [&](DGraph& g) {
        Val out = g.attention(g.param(q), g.param(k), g.param(v), batch, tq, tk, heads, false);
        Val loss = g.sum_all(g.mul(out, out));
        const double value = g.scalar(loss);
        g.backward(loss);
        return value;
    });

    DStore ps2;
    auto qc = ps2.add_normal("q", batch * tq, width, rng, 0.7);
    check_gradients(ps2, [&](DGraph& g) {
        Val x = g.param(qc);
        Val out = g.attention(x, x, x, batch, tq, tq, heads, true);
        Val loss = g.sum_all(g.mul(out, out));
        const double value = g.scalar(loss);
        g.backward(loss);
        return value;
    });
}

TEST_CASE("embedding and selection op gradients") {
    Rng rng(23);
    DStore ps;
    auto table0 = ps.add_normal("t0", 5, 4, rng, 1.0);
    auto table1 = ps.add_normal("t1", 7, 4, rng, 1.0);
    auto alt = ps.add_normal("alt", 4, 4, rng, 1.0);

    std::vector<int> ids = {1, 6, 4, 0};  // batch=2, seq=2
    std::vector<char> mask = {1, 0, 0, 1};

    check_gradients(ps, [&](DGraph& g) {
        Val e = g.embed_positions({table0, table1}, ids, 2);
        Val chosen = g.row_select(e, g.param(alt), mask);
        Val s = g.slice_cols(chosen, 1, 3);
        Val r = g.reshape(s, 2, 4);
        Val loss = g.sum_all(g.mul(r, r));
        const double value = g.scalar(loss);
        g.backward(loss);
        return value;
    });
}

TEST_CASE("cross entropy gradients and value") {
    Rng rng(29);
    DStore ps;
    auto logits = ps.add_normal("logits", 4, 5, rng, 1.0);
    std::vector<int> targets = {0, 3, 2, 4};

    {
        DGraph g(&ps);
        Val loss = g.cross_entropy_sum(g.param(logits), targets);
        // reference value
        double expect = 0.0;
        const auto& lv = ps.value(logits);
        for (int r = 0; r < 4; ++r) {
            double denom = 0.0;
            for (int c = 0; c < 5; ++c) denom += std::exp(lv.at(r, c));
            expect += std::log(denom) - lv.at(r, targets[r]);
        }
        CHECK(g.scalar(loss) == doctest::Approx(expect).epsilon(1e-10));
    }

    check_gradients(ps, [&](DGraph& g) {
        Val loss = g.cross_entropy_sum(g.param(logits), targets);
        const double value = g.scalar(loss);
        g.backward(loss);
        return value;
    });
}

TEST_CASE("composite transformer blocks gradcheck") {
    Rng rng(31);
    const int width = 8, heads = 2, batch = 2, seq = 3;
    DStore ps;
    auto x = ps.add_normal("x", batch * seq, width, rng, 0.8);
    auto ctx = ps.add_normal("ctx", batch * 2, width, rng, 0.8);
    auto cond = ps.add_normal("cond", batch, width, rng, 0.8);
    auto enc = EncoderBlockT<double>::create(ps, "enc", width, heads, rng, 0.0);
    auto dec = DecoderBlockT<double>::create(ps, "dec", width, heads, rng, 0.0);
    auto dit = DiTBlockT<double>::create(ps, "dit", width, heads, rng, 0.0);
    // Give the zero-initialized modulation weights a nonzero value so its
    // gradient path is exercised.
    {
        Rng r2(5);
        auto& w = ps.value(dit.modulation.w);
        for (auto& v : w.data) v = r2.normal() * 0.05;
    }

    check_gradients(ps, [&](DGraph& g) {
        Val h = enc(g, g.param(x), batch, seq);
        h = dec(g, h, g.param(ctx), batch, seq, 2);
        h = dit(g, h, g.param(cond), batch, seq);
        Val loss = g.sum_all(g.mul(h, h));
        const double value = g.scalar(loss);
        g.backward(loss);
        return value;
    }, 1e-5, 1e-4);
}

TEST_CASE("fresh DiT block is an exact identity") {
    Rng rng(37);
    ParamStore ps;
    auto block = DiTBlockT<float>::create(ps, "blk", 16, 4, rng, 0.0);
    Rng rng2(38);
    Graph g(&ps);
    Val x = g.input(Tensor::randn(3 * 5, 16, rng2));
    Val cond = g.input(Tensor::randn(3, 16, rng2));
    Val y = block(g, x, cond, 3, 5);
    const auto& vx = g.val(x);
    const auto& vy = g.val(y);
    for (std::size_t i = 0; i < vx.size(); ++i) CHECK(vx.data[i] == vy.data[i]);
}

TEST_CASE("causal attention blocks information from later positions") {
    Rng rng(41);
    ParamStore ps;
    auto attn = AttentionT<float>::create(ps, "attn", 8, 2, rng);
    const int seq = 4;

    Rng rng_x(42);
    Tensor x = Tensor::randn(seq, 8, rng_x);
    Tensor x2 = x;
    for (int c = 0; c < 8; ++c) x2.at(seq - 1, c) += 1.5f;  // change the last position only

    Graph g1(&ps);
    Val y1 = attn.self_attention(g1, g1.input(x), 1, seq, true);
    Graph g2(&ps);
    Val y2 = attn.self_attention(g2, g2.input(x2), 1, seq, true);

    for (int t = 0; t < seq - 1; ++t)
        for (int c = 0; c < 8; ++c) CHECK(g1.val(y1).at(t, c) == g2.val(y2).at(t, c));
    bool last_changed = false;
    for (int c = 0; c < 8; ++c)
        if (g1.val(y1).at(seq - 1, c) != g2.val(y2).at(seq - 1, c)) last_changed = true;
    CHECK(last_changed);
}

TEST_CASE("adamw minimizes a quadratic") {
    DStore ps;
    auto p = ps.add("p", DTensor::full(1, 3, 5.0), true);
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.0;
    for (int step = 0; step < 300; ++step) {
        ps.zero_grad();
        DGraph g(&ps);
        Val loss = g.sum_all(g.mul(g.param(p), g.param(p)));
        g.backward(loss);
        ps.adamw_step(cfg);
    }
    for (double v : ps.value(p).data) CHECK(std::fabs(v) < 1e-2);
}

TEST_CASE("dropout is identity in inference and rescales in training") {
    Rng rng(51);
    ParamStore ps;
    Graph inference(&ps, nullptr, false);
    Tensor x = Tensor::full(100, 10, 1.0f);
    Val xi = inference.input(x);
    Val keep = inference.dropout(xi, 0.5);
    CHECK(keep.index == xi.index);  // pass-through

    Rng drop_rng(7);
    Graph training(&ps, &drop_rng, true);
    Val xt = training.input(x);
    Val dropped = training.dropout(xt, 0.5);
    double total = 0.0;
    int zeros = 0;
    for (float v : training.val(dropped).data) {
        total += v;
        if (v == 0.0f) ++zeros;
    }
    const double mean = total / 1000.0;
    CHECK(mean == doctest::Approx(1.0).epsilon(0.15));
    CHECK(zeros > 300);
    CHECK(zeros < 700);
}

TEST_CASE("sinusoid features are distinct per value and finite") {
    std::vector<double> steps;
    for (int t = 1; t <= 200; ++t) steps.push_back(static_cast<double>(t));
    auto feats = sinusoid_features<float>(steps, 32);
    CHECK(feats.all_finite());
    for (int a = 0; a < feats.rows; ++a)
        for (int b = a + 1; b < std::min(feats.rows, a + 8); ++b) {
            bool differs = false;
            for (int c = 0; c < feats.cols; ++c)
                if (feats.at(a, c) != feats.at(b, c)) differs = true;
            CHECK(differs);
        }
}
