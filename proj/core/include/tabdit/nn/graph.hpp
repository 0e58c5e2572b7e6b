#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "tabdit/nn/params.hpp"
#include "tabdit/nn/tensor.hpp"

namespace tabdit::nn {

struct Val {
    int index = -1;
};

// Dynamic reverse-mode tape. One graph per forward pass; parameter leaves
// read from (and accumulate gradients into) the bound ParamStore.
template <typename S>
class GraphT {
  public:
    explicit GraphT(ParamStoreT<S>* store = nullptr, Rng* rng = nullptr, bool training = false)
        : store_(store), rng_(rng), training_(training) {}

    bool training() const { return training_; }

    // ---- leaves ------------------------------------------------------

    Val input(TensorT<S> t) {
        Node node;
        node.value = std::move(t);
        node.requires_grad = false;
        return push(std::move(node));
    }

    Val param(ParamRef ref) {
        Node node;
        node.store_param = ref.index;
        node.requires_grad = true;
        return push(std::move(node));
    }

    // ---- elementwise -------------------------------------------------

    Val add(Val a, Val b) {
        check_same_shape(a, b, "add");
        Node node;
        node.value = val(a);
        const auto& vb = val(b);
        for (std::size_t i = 0; i < node.value.size(); ++i) node.value.data[i] += vb.data[i];
        return unary_binary(std::move(node), a, b, [this](int self, Val a, Val b) {
            const auto& g = grad_ref(self);
            accumulate(a, [&](TensorT<S>& da) {
                for (std::size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i];
            });
            accumulate(b, [&](TensorT<S>& db) {
                for (std::size_t i = 0; i < g.size(); ++i) db.data[i] += g.data[i];
            });
        });
    }

    Val sub(Val a, Val b) {
        check_same_shape(a, b, "sub");
        Node node;
        node.value = val(a);
        const auto& vb = val(b);
        for (std::size_t i = 0; i < node.value.size(); ++i) node.value.data[i] -= vb.data[i];
        return unary_binary(std::move(node), a, b, [this](int self, Val a, Val b) {
            const auto& g = grad_ref(self);
            accumulate(a, [&](TensorT<S>& da) {
                for (std::size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i];
            });
            accumulate(b, [&](TensorT<S>& db) {
                for (std::size_t i = 0; i < g.size(); ++i) db.data[i] -= g.data[i];
            });
        });
    }

    Val mul(Val a, Val b) {
        check_same_shape(a, b, "mul");
        Node node;
        node.value = val(a);
        const auto& vb = val(b);
        for (std::size_t i = 0; i < node.value.size(); ++i) node.value.data[i] *= vb.data[i];
        return unary_binary(std::move(node), a, b, [this](int self, Val a, Val b) {
            const auto& g = grad_ref(self);
            const auto& va = val(a);
            const auto& vb2 = val(b);
            accumulate(a, [&](TensorT<S>& da) {
                for (std::size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] * vb2.data[i];
            });
            accumulate(b, [&](TensorT<S>& db) {
                for (std::size_t i = 0; i < g.size(); ++i) db.data[i] += g.data[i] * va.data[i];
            });
        });
    }

    Val scale(Val x, double c) {
        Node node;
        node.value = val(x);
        for (auto& v : node.value.data) v = static_cast<S>(v * c);
        return unary(std::move(node), x, [this, c](int self, Val x) {
            const auto& g = grad_ref(self);
            accumulate(x, [&](TensorT<S>& dx) {
                for (std::size_t i = 0; i < g.size(); ++i)
                    dx.data[i] += static_cast<S>(g.data[i] * c);
            });
        });
    }

    Val add_const(Val x, double c) {
        Node node;
        node.value = val(x);
        for (auto& v : node.value.data) v = static_cast<S>(v + c);
        return unary(std::move(node), x, [this](int self, Val x) {
            const auto& g = grad_ref(self);
            accumulate(x, [&](TensorT<S>& dx) {
                for (std::size_t i = 0; i < g.size(); ++i) dx.data[i] += g.data[i];
            });
        });
    }

    Val exp(Val x) {
        Node node;
        node.value = val(x);
        for (auto& v : node.value.data) v = static_cast<S>(std::exp(static_cast<double>(v)));
        return unary(std::move(node), x, [this](int self, Val x) {
            const auto& g = grad_ref(self);
            const auto& y = val_at(self);
            accumulate(x, [&](TensorT<S>& dx) {
                for (std::size_t i = 0; i < g.size(); ++i) dx.data[i] += g.data[i] * y.data[i];
            });
        });
    }

    Val clamp(Val x, double lo, double hi) {
        Node node;
        node.value = val(x);
        for (auto& v : node.value.data)
            v = static_cast<S>(std::min(hi, std::max(lo, static_cast<double>(v))));
        return unary(std::move(node), x, [this, lo, hi](int self, Val x) {
            const auto& g = grad_ref(self);
            const auto& vx = val(x);
            accumulate(x, [&](TensorT<S>& dx) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double v = static_cast<double>(vx.data[i]);
                    if (v > lo && v < hi) dx.data[i] += g.data[i];
                }
            });
        });
    }

    Val gelu(Val x) {
        constexpr double kAlpha = 0.7978845608028654;  // sqrt(2/pi)
        Node node;
        node.value = val(x);
        for (auto& v : node.value.data) {
            const double u = static_cast<double>(v);
            v = static_cast<S>(0.5 * u * (1.0 + std::tanh(kAlpha * (u + 0.044715 * u * u * u))));
        }
        return unary(std::move(node), x, [this](int self, Val x) {
            constexpr double kA = 0.7978845608028654;
            const auto& g = grad_ref(self);
            const auto& vx = val(x);
            accumulate(x, [&](TensorT<S>& dx) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double u = static_cast<double>(vx.data[i]);
                    const double t = std::tanh(kA * (u + 0.044715 * u * u * u));
                    const double du =
                        0.5 * (1.0 + t) +
                        0.5 * u * (1.0 - t * t) * kA * (1.0 + 3.0 * 0.044715 * u * u);
                    dx.data[i] += static_cast<S>(g.data[i] * du);
                }
            });
        });
    }

    Val silu(Val x) {
        Node node;
        node.value = val(x);
        for (auto& v : node.value.data) {
            const double u = static_cast<double>(v);
            v = static_cast<S>(u / (1.0 + std::exp(-u)));
        }
        return unary(std::move(node), x, [this](int self, Val x) {
            const auto& g = grad_ref(self);
            const auto& vx = val(x);
            accumulate(x, [&](TensorT<S>& dx) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double u = static_cast<double>(vx.data[i]);
                    const double sig = 1.0 / (1.0 + std::exp(-u));
                    dx.data[i] += static_cast<S>(g.data[i] * (sig * (1.0 + u * (1.0 - sig))));
                }
            });
        });
    }

    // ---- broadcasting ------------------------------------------------

    // x[R,C] + bias[1,C] per row.
    Val add_rowvec(Val x, Val bias) {
        const auto& vx = val(x);
        const auto& vb = val(bias);
        if (vb.rows != 1 || vb.cols != vx.cols) fail(ErrorCode::ShapeMismatch, "add_rowvec");
        Node node;
        node.value = vx;
        for (int r = 0; r < vx.rows; ++r) {
            S* row = node.value.row(r);
            for (int c = 0; c < vx.cols; ++c) row[c] += vb.data[c];
        }
        return unary_binary(std::move(node), x, bias, [this](int self, Val x, Val bias) {
            const auto& g = grad_ref(self);
            accumulate(x, [&](TensorT<S>& dx) {
                for (std::size_t i = 0; i < g.size(); ++i) dx.data[i] += g.data[i];
            });
            accumulate(bias, [&](TensorT<S>& db) {
                for (int r = 0; r < g.rows; ++r) {
                    const S* grow = g.row(r);
                    for (int c = 0; c < g.cols; ++c) db.data[c] += grow[c];
                }
            });
        });
    }

    Val mul_rowvec(Val x, Val gain) {
        const auto& vx = val(x);
        const auto& vg = val(gain);
        if (vg.rows != 1 || vg.cols != vx.cols) fail(ErrorCode::ShapeMismatch, "mul_rowvec");
        Node node;
        node.value = vx;
        for (int r = 0; r < vx.rows; ++r) {
            S* row = node.value.row(r);
            for (int c = 0; c < vx.cols; ++c) row[c] *= vg.data[c];
        }
        return unary_binary(std::move(node), x, gain, [this](int self, Val x, Val gain) {
            const auto& g = grad_ref(self);
            const auto& vx2 = val(x);
            const auto& vg2 = val(gain);
            accumulate(x, [&](TensorT<S>& dx) {
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c) dx.at(r, c) += g.at(r, c) * vg2.data[c];
            });
            accumulate(gain, [&](TensorT<S>& dg) {
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c) dg.data[c] += g.at(r, c) * vx2.at(r, c);
            });
        });
    }

    // x[B*T,C] op v[B,C], each batch row of v broadcast over T sequence rows.
    Val add_bcast(Val x, Val v, int seq_len) { return bcast(x, v, seq_len, /*multiply=*/false); }
    Val mul_bcast(Val x, Val v, int seq_len) { return bcast(x, v, seq_len, /*multiply=*/true); }

    // x[B*T,C] + p[T,C]: sequence-position vectors broadcast across the batch.
    Val add_seqvec(Val x, Val p) {
        const auto& vx = val(x);
        const auto& vp = val(p);
        if (vp.cols != vx.cols || vx.rows % vp.rows != 0)
            fail(ErrorCode::ShapeMismatch, "add_seqvec");
        const int seq = vp.rows;
        Node node;
        node.value = vx;
        for (int r = 0; r < vx.rows; ++r) {
            const S* prow = vp.row(r % seq);
            S* out = node.value.row(r);
            for (int c = 0; c < vx.cols; ++c) out[c] += prow[c];
        }
        return unary_binary(std::move(node), x, p, [this, seq](int self, Val x, Val p) {
            const auto& g = grad_ref(self);
            accumulate(x, [&](TensorT<S>& dx) {
                for (std::size_t i = 0; i < g.size(); ++i) dx.data[i] += g.data[i];
            });
            accumulate(p, [&](TensorT<S>& dp) {
                for (int r = 0; r < g.rows; ++r) {
                    S* dprow = dp.row(r % seq);
                    const S* grow = g.row(r);
                    for (int c = 0; c < g.cols; ++c) dprow[c] += grow[c];
                }
            });
        });
    }

    // Gather rows by index: out[i] = x[indices[i]].
    Val gather_rows(Val x, std::vector<int> indices) {
        const auto& vx = val(x);
        Node node;
        node.value = TensorT<S>(static_cast<int>(indices.size()), vx.cols);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            if (indices[i] < 0 || indices[i] >= vx.rows)
                fail(ErrorCode::ShapeMismatch, "gather_rows index");
            std::copy(vx.row(indices[i]), vx.row(indices[i]) + vx.cols,
                      node.value.row(static_cast<int>(i)));
        }
        return unary(std::move(node), x,
                     [this, indices = std::move(indices)](int self, Val x) {
                         const auto& g = grad_ref(self);
                         accumulate(x, [&](TensorT<S>& dx) {
                             for (int r = 0; r < g.rows; ++r) {
                                 S* dxrow = dx.row(indices[r]);
                                 const S* grow = g.row(r);
                                 for (int c = 0; c < g.cols; ++c) dxrow[c] += grow[c];
                             }
                         });
                     });
    }

    // ---- matrix ------------------------------------------------------

    // x[R,I] * w[O,I]^T -> [R,O]
    Val matmul_nt(Val x, Val w) {
        const auto& vx = val(x);
        const auto& vw = val(w);
        if (vx.cols != vw.cols) fail(ErrorCode::ShapeMismatch, "matmul_nt");
        Node node;
        node.value = TensorT<S>(vx.rows, vw.rows);
        TensorT<S> wt = transposed(vw);
        gemm_acc(vx.data.data(), wt.data.data(), node.value.data.data(), vx.rows, vx.cols, vw.rows);
        return unary_binary(std::move(node), x, w, [this](int self, Val x, Val w) {
            const auto& g = grad_ref(self);
            const auto& vx2 = val(x);
            const auto& vw2 = val(w);
            accumulate(x, [&](TensorT<S>& dx) {
                gemm_acc(g.data.data(), vw2.data.data(), dx.data.data(), g.rows, g.cols, vw2.cols);
            });
            accumulate(w, [&](TensorT<S>& dw) {
                TensorT<S> gt = transposed(g);
                gemm_acc(gt.data.data(), vx2.data.data(), dw.data.data(), gt.rows, gt.cols,
                         vx2.cols);
            });
        });
    }

    // ---- normalization -----------------------------------------------

    // Per-row layer norm without affine parameters.
    Val layer_norm(Val x, double eps = 1e-5) {
        const auto& vx = val(x);
        Node node;
        node.value = TensorT<S>(vx.rows, vx.cols);
        auto rstd = std::make_shared<std::vector<double>>(vx.rows);
        for (int r = 0; r < vx.rows; ++r) {
            const S* in = vx.row(r);
            double mean = 0.0;
            for (int c = 0; c < vx.cols; ++c) mean += in[c];
            mean /= vx.cols;
            double var = 0.0;
            for (int c = 0; c < vx.cols; ++c) {
                const double d = in[c] - mean;
                var += d * d;
            }
            var /= vx.cols;
            const double inv = 1.0 / std::sqrt(var + eps);
            (*rstd)[r] = inv;
            S* out = node.value.row(r);
            for (int c = 0; c < vx.cols; ++c) out[c] = static_cast<S>((in[c] - mean) * inv);
        }
        return unary(std::move(node), x, [this, rstd](int self, Val x) {
            const auto& g = grad_ref(self);
            const auto& y = val_at(self);
            accumulate(x, [&](TensorT<S>& dx) {
                const int cols = g.cols;
                for (int r = 0; r < g.rows; ++r) {
                    const S* grow = g.row(r);
                    const S* yrow = y.row(r);
                    double gmean = 0.0;
                    double gymean = 0.0;
                    for (int c = 0; c < cols; ++c) {
                        gmean += grow[c];
                        gymean += static_cast<double>(grow[c]) * yrow[c];
                    }
                    gmean /= cols;
                    gymean /= cols;
                    S* dxrow = dx.row(r);
                    const double inv = (*rstd)[r];
                    for (int c = 0; c < cols; ++c)
                        dxrow[c] += static_cast<S>(inv * (grow[c] - gmean - yrow[c] * gymean));
                }
            });
        });
    }

    // ---- attention -----------------------------------------------------

    // Multi-head scaled dot-product attention. q: [B*Tq, W], k/v: [B*Tk, W].
    // With causal=true (requires Tq == Tk), position i attends to j <= i.
    Val attention(Val q, Val k, Val v, int batch, int tq, int tk, int heads, bool causal) {
        const auto& vq = val(q);
        const auto& vk = val(k);
        const auto& vv = val(v);
        const int width = vq.cols;
        if (width % heads != 0 || vk.cols != width || vv.cols != width)
            fail(ErrorCode::ShapeMismatch, "attention width");
        if (vq.rows != batch * tq || vk.rows != batch * tk)
            fail(ErrorCode::ShapeMismatch, "attention rows");
        if (causal && tq != tk) fail(ErrorCode::ShapeMismatch, "causal attention needs Tq == Tk");
        const int hd = width / heads;
        const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));

        Node node;
        node.value = TensorT<S>(vq.rows, width);
        auto probs = std::make_shared<TensorT<S>>(batch * heads * tq, tk);

#pragma omp parallel for schedule(static)
        for (int b = 0; b < batch; ++b) {
            std::vector<double> scores(tk);
            for (int h = 0; h < heads; ++h) {
                for (int i = 0; i < tq; ++i) {
                    const S* qrow = vq.row(b * tq + i) + h * hd;
                    const int limit = causal ? i + 1 : tk;
                    double max_score = -1e300;
                    for (int j = 0; j < limit; ++j) {
                        const S* krow = vk.row(b * tk + j) + h * hd;
                        double dot = 0.0;
                        for (int d = 0; d < hd; ++d) dot += static_cast<double>(qrow[d]) * krow[d];
                        scores[j] = dot * att_scale;
                        max_score = std::max(max_score, scores[j]);
                    }
                    double denom = 0.0;
                    for (int j = 0; j < limit; ++j) {
                        scores[j] = std::exp(scores[j] - max_score);
                        denom += scores[j];
                    }
                    S* prow = probs->row((b * heads + h) * tq + i);
                    for (int j = 0; j < limit; ++j) prow[j] = static_cast<S>(scores[j] / denom);
                    for (int j = limit; j < tk; ++j) prow[j] = S(0);
                    S* orow = node.value.row(b * tq + i) + h * hd;
                    for (int j = 0; j < limit; ++j) {
                        const S p = prow[j];
                        const S* vrow = vv.row(b * tk + j) + h * hd;
                        for (int d = 0; d < hd; ++d) orow[d] += p * vrow[d];
                    }
                }
            }
        }

        Node moved = std::move(node);
        moved.parents = {q.index, k.index, v.index};
        moved.requires_grad = needs_grad(q) || needs_grad(k) || needs_grad(v);
        Val out = push(std::move(moved));
        if (nodes_[out.index].requires_grad) {
            nodes_[out.index].back = [this, q, k, v, batch, tq, tk, heads, hd, att_scale, probs,
                                      self = out.index]() {
                const auto& g = grad_ref(self);
                const auto& vq2 = val(q);
                const auto& vk2 = val(k);
                const auto& vv2 = val(v);
                TensorT<S>* dq = needs_grad(q) ? &grad_buffer(q) : nullptr;
                TensorT<S>* dk = needs_grad(k) ? &grad_buffer(k) : nullptr;
                TensorT<S>* dv = needs_grad(v) ? &grad_buffer(v) : nullptr;
#pragma omp parallel for schedule(static)
                for (int b = 0; b < batch; ++b) {
                    std::vector<double> dprob(tk);
                    for (int h = 0; h < heads; ++h) {
                        for (int i = 0; i < tq; ++i) {
                            const S* grow = g.row(b * tq + i) + h * hd;
                            const S* prow = probs->row((b * heads + h) * tq + i);
                            double dot_sum = 0.0;
                            for (int j = 0; j < tk; ++j) {
                                const S* vrow = vv2.row(b * tk + j) + h * hd;
                                double dp = 0.0;
                                for (int d = 0; d < hd; ++d)
                                    dp += static_cast<double>(grow[d]) * vrow[d];
                                dprob[j] = dp;
                                dot_sum += dp * prow[j];
                            }
                            const S* qrow = vq2.row(b * tq + i) + h * hd;
                            for (int j = 0; j < tk; ++j) {
                                const double p = prow[j];
                                if (p == 0.0 && dprob[j] == 0.0) continue;
                                const double dscore = p * (dprob[j] - dot_sum) * att_scale;
                                const S* krow = vk2.row(b * tk + j) + h * hd;
                                if (dq) {
                                    S* dqrow = dq->row(b * tq + i) + h * hd;
                                    for (int d = 0; d < hd; ++d)
                                        dqrow[d] += static_cast<S>(dscore * krow[d]);
                                }
                                if (dk) {
                                    S* dkrow = dk->row(b * tk + j) + h * hd;
                                    for (int d = 0; d < hd; ++d)
                                        dkrow[d] += static_cast<S>(dscore * qrow[d]);
                                }
                                if (dv) {
                                    S* dvrow = dv->row(b * tk + j) + h * hd;
                                    for (int d = 0; d < hd; ++d)
                                        dvrow[d] += static_cast<S>(p * grow[d]);
                                }
                            }
                        }
                    }
                }
            };
        }
        return out;
    }

    // ---- embeddings ----------------------------------------------------

    // Per-position lookup tables: output row b*T + t = tables[t][ids[b*T + t]].
    Val embed_positions(const std::vector<ParamRef>& tables, std::vector<int> ids, int batch) {
        const int seq = static_cast<int>(tables.size());
        if (static_cast<int>(ids.size()) != batch * seq)
            fail(ErrorCode::ShapeMismatch, "embed_positions ids");
        const int width = store_->value(tables[0]).cols;
        Node node;
        node.value = TensorT<S>(batch * seq, width);
        for (int b = 0; b < batch; ++b) {
            for (int t = 0; t < seq; ++t) {
                const int r = b * seq + t;
                const auto& table = store_->value(tables[t]);
                const int id = ids[r];
                if (id < 0 || id >= table.rows) fail(ErrorCode::OutOfVocabulary, "embed id");
                std::copy(table.row(id), table.row(id) + width, node.value.row(r));
            }
        }
        Node moved = std::move(node);
        moved.requires_grad = true;
        Val out = push(std::move(moved));
        nodes_[out.index].back = [this, tables, ids = std::move(ids), batch, seq,
                                  self = out.index]() {
            const auto& g = grad_ref(self);
            for (int b = 0; b < batch; ++b) {
                for (int t = 0; t < seq; ++t) {
                    const int r = b * seq + t;
                    auto& dtable = store_->grad(tables[t]);
                    S* drow = dtable.row(ids[r]);
                    const S* grow = g.row(r);
                    for (int c = 0; c < g.cols; ++c) drow[c] += grow[c];
                }
            }
        };
        return out;
    }

    // Single-table lookup: output row r = table[ids[r]].
    Val embed_rows(ParamRef table, std::vector<int> ids) {
        const auto& tbl = store_->value(table);
        Node node;
        node.value = TensorT<S>(static_cast<int>(ids.size()), tbl.cols);
        for (std::size_t r = 0; r < ids.size(); ++r) {
            if (ids[r] < 0 || ids[r] >= tbl.rows) fail(ErrorCode::OutOfVocabulary, "embed id");
            std::copy(tbl.row(ids[r]), tbl.row(ids[r]) + tbl.cols, node.value.row(static_cast<int>(r)));
        }
        Node moved = std::move(node);
        moved.requires_grad = true;
        Val out = push(std::move(moved));
        nodes_[out.index].back = [this, table, ids = std::move(ids), self = out.index]() {
            const auto& g = grad_ref(self);
            auto& dtable = store_->grad(table);
            for (int r = 0; r < g.rows; ++r) {
                S* drow = dtable.row(ids[r]);
                const S* grow = g.row(r);
                for (int c = 0; c < g.cols; ++c) drow[c] += grow[c];
            }
        };
        return out;
    }

    // ---- structure -----------------------------------------------------

    Val reshape(Val x, int rows, int cols) {
        const auto& vx = val(x);
        if (static_cast<std::size_t>(rows) * cols != vx.size())
            fail(ErrorCode::ShapeMismatch, "reshape");
        Node node;
        node.value = vx;
        node.value.rows = rows;
        node.value.cols = cols;
        return unary(std::move(node), x, [this](int self, Val x) {
            const auto& g = grad_ref(self);
            accumulate(x, [&](TensorT<S>& dx) {
                for (std::size_t i = 0; i < g.size(); ++i) dx.data[i] += g.data[i];
            });
        });
    }

    Val slice_cols(Val x, int c0, int c1) {
        const auto& vx = val(x);
        if (c0 < 0 || c1 > vx.cols || c0 >= c1) fail(ErrorCode::ShapeMismatch, "slice_cols");
        Node node;
        node.value = TensorT<S>(vx.rows, c1 - c0);
        for (int r = 0; r < vx.rows; ++r)
            std::copy(vx.row(r) + c0, vx.row(r) + c1, node.value.row(r));
        return unary(std::move(node), x, [this, c0](int self, Val x) {
            const auto& g = grad_ref(self);
            accumulate(x, [&](TensorT<S>& dx) {
                for (int r = 0; r < g.rows; ++r) {
                    S* dxrow = dx.row(r) + c0;
                    const S* grow = g.row(r);
                    for (int c = 0; c < g.cols; ++c) dxrow[c] += grow[c];
                }
            });
        });
    }

    // Per-row selection: rows with mask true come from a, others from b.
    Val row_select(Val a, Val b, std::vector<char> mask) {
        check_same_shape(a, b, "row_select");
        const auto& va = val(a);
        const auto& vb = val(b);
        if (static_cast<int>(mask.size()) != va.rows) fail(ErrorCode::ShapeMismatch, "row_select mask");
        Node node;
        node.value = TensorT<S>(va.rows, va.cols);
        for (int r = 0; r < va.rows; ++r) {
            const auto& src = mask[r] ? va : vb;
            std::copy(src.row(r), src.row(r) + va.cols, node.value.row(r));
        }
        Node moved = std::move(node);
        moved.parents = {a.index, b.index};
        moved.requires_grad = needs_grad(a) || needs_grad(b);
        Val out = push(std::move(moved));
        if (nodes_[out.index].requires_grad) {
            nodes_[out.index].back = [this, a, b, mask = std::move(mask), self = out.index]() {
                const auto& g = grad_ref(self);
                accumulate(a, [&](TensorT<S>& da) {
                    for (int r = 0; r < g.rows; ++r)
                        if (mask[r])
                            for (int c = 0; c < g.cols; ++c) da.at(r, c) += g.at(r, c);
                });
                accumulate(b, [&](TensorT<S>& db) {
                    for (int r = 0; r < g.rows; ++r)
                        if (!mask[r])
                            for (int c = 0; c < g.cols; ++c) db.at(r, c) += g.at(r, c);
                });
            };
        }
        return out;
    }

    Val dropout(Val x, double p) {
        if (!training_ || p <= 0.0) return x;
        const auto& vx = val(x);
        const double keep = 1.0 - p;
        auto mask = std::make_shared<std::vector<char>>(vx.size());
        Node node;
        node.value = vx;
        for (std::size_t i = 0; i < vx.size(); ++i) {
            const bool keep_it = rng_->uniform() < keep;
            (*mask)[i] = keep_it;
            node.value.data[i] = keep_it ? static_cast<S>(node.value.data[i] / keep) : S(0);
        }
        return unary(std::move(node), x, [this, mask, keep](int self, Val x) {
            const auto& g = grad_ref(self);
            accumulate(x, [&](TensorT<S>& dx) {
                for (std::size_t i = 0; i < g.size(); ++i)
                    if ((*mask)[i]) dx.data[i] += static_cast<S>(g.data[i] / keep);
            });
        });
    }

    // ---- reductions ----------------------------------------------------

    Val sum_all(Val x) {
        const auto& vx = val(x);
        Node node;
        node.value = TensorT<S>(1, 1);
        double total = 0.0;
        for (S v : vx.data) total += static_cast<double>(v);
        node.value.data[0] = static_cast<S>(total);
        return unary(std::move(node), x, [this](int self, Val x) {
            const S g = grad_ref(self).data[0];
            accumulate(x, [&](TensorT<S>& dx) {
                for (auto& v : dx.data) v += g;
            });
        });
    }

    Val mean_all(Val x) { return scale(sum_all(x), 1.0 / static_cast<double>(val(x).size())); }

    // Summed cross entropy over rows of logits against integer targets.
    Val cross_entropy_sum(Val logits, std::vector<int> targets) {
        const auto& vl = val(logits);
        if (static_cast<int>(targets.size()) != vl.rows)
            fail(ErrorCode::ShapeMismatch, "cross_entropy targets");
        auto probs = std::make_shared<TensorT<S>>(vl.rows, vl.cols);
        double loss = 0.0;
        for (int r = 0; r < vl.rows; ++r) {
            const S* row = vl.row(r);
            double max_logit = -1e300;
            for (int c = 0; c < vl.cols; ++c) max_logit = std::max(max_logit, static_cast<double>(row[c]));
            double denom = 0.0;
            for (int c = 0; c < vl.cols; ++c) denom += std::exp(row[c] - max_logit);
            const double log_denom = std::log(denom) + max_logit;
            loss += log_denom - row[targets[r]];
            S* prow = probs->row(r);
            for (int c = 0; c < vl.cols; ++c)
                prow[c] = static_cast<S>(std::exp(row[c] - log_denom));
        }
        Node node;
        node.value = TensorT<S>(1, 1);
        node.value.data[0] = static_cast<S>(loss);
        return unary(std::move(node), logits,
                     [this, probs, targets = std::move(targets)](int self, Val logits) {
                         const S g = grad_ref(self).data[0];
                         accumulate(logits, [&](TensorT<S>& dl) {
                             for (int r = 0; r < dl.rows; ++r) {
                                 S* drow = dl.row(r);
                                 const S* prow = probs->row(r);
                                 for (int c = 0; c < dl.cols; ++c) drow[c] += g * prow[c];
                                 drow[targets[r]] -= g;
                             }
                         });
                     });
    }

    // ---- access / backward ----------------------------------------------

    const TensorT<S>& val(Val v) const { return val_at(v.index); }

    double scalar(Val v) const {
        const auto& t = val(v);
        return static_cast<double>(t.data[0]);
    }

    void backward(Val loss) {
        auto& tip = grad_buffer(loss);
        for (auto& g : tip.data) g = S(1);
        for (int i = loss.index; i >= 0; --i) {
            Node& node = nodes_[i];
            if (!node.back) continue;
            if (!node.grad_ready && node.store_param < 0) continue;  // not on the loss path
            node.back();
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

  private:
    struct Node {
        TensorT<S> value;
        TensorT<S> grad;
        bool grad_ready = false;
        bool requires_grad = false;
        int store_param = -1;
        std::vector<int> parents;
        std::function<void()> back;
    };

    const TensorT<S>& val_at(int i) const {
        const Node& node = nodes_[i];
        return node.store_param >= 0 ? store_->value(ParamRef{node.store_param}) : node.value;
    }

    bool needs_grad(Val v) const { return nodes_[v.index].requires_grad; }

    TensorT<S>& grad_buffer(Val v) { return grad_buffer_at(v.index); }

    TensorT<S>& grad_buffer_at(int i) {
        Node& node = nodes_[i];
        if (node.store_param >= 0) return store_->grad(ParamRef{node.store_param});
        if (!node.grad_ready) {
            const auto& value = val_at(i);
            node.grad = TensorT<S>::zeros(value.rows, value.cols);
            node.grad_ready = true;
        }
        return node.grad;
    }

    // Gradient of node i as read by its consumers (must exist by then).
    const TensorT<S>& grad_ref(int i) { return grad_buffer_at(i); }

    template <typename Fn>
    void accumulate(Val target, Fn&& fn) {
        if (!needs_grad(target)) return;
        fn(grad_buffer(target));
    }

    void check_same_shape(Val a, Val b, const char* what) {
        if (!val(a).same_shape(val(b))) fail(ErrorCode::ShapeMismatch, what);
    }

    Val push(Node node) {
        nodes_.push_back(std::move(node));
        return Val{static_cast<int>(nodes_.size()) - 1};
    }

    template <typename Fn>
    Val unary(Node node, Val x, Fn&& back) {
        node.parents = {x.index};
        node.requires_grad = needs_grad(x);
        Val out = push(std::move(node));
        if (nodes_[out.index].requires_grad)
            nodes_[out.index].back = [back = std::forward<Fn>(back), out, x]() mutable {
                back(out.index, x);
            };
        return out;
    }

    template <typename Fn>
    Val unary_binary(Node node, Val a, Val b, Fn&& back) {
        node.parents = {a.index, b.index};
        node.requires_grad = needs_grad(a) || needs_grad(b);
        Val out = push(std::move(node));
        if (nodes_[out.index].requires_grad)
            nodes_[out.index].back = [back = std::forward<Fn>(back), out, a, b]() mutable {
                back(out.index, a, b);
            };
        return out;
    }

    Val bcast(Val x, Val v, int seq_len, bool multiply) {
        const auto& vx = val(x);
        const auto& vv = val(v);
        if (vv.cols != vx.cols || vv.rows * seq_len != vx.rows)
            fail(ErrorCode::ShapeMismatch, "bcast");
        Node node;
        node.value = vx;
        for (int r = 0; r < vx.rows; ++r) {
            const S* vrow = vv.row(r / seq_len);
            S* out = node.value.row(r);
            if (multiply)
                for (int c = 0; c < vx.cols; ++c) out[c] *= vrow[c];
            else
                for (int c = 0; c < vx.cols; ++c) out[c] += vrow[c];
        }
        return unary_binary(std::move(node), x, v,
                            [this, seq_len, multiply](int self, Val x, Val v) {
                                const auto& g = grad_ref(self);
                                const auto& vx2 = val(x);
                                const auto& vv2 = val(v);
                                accumulate(x, [&](TensorT<S>& dx) {
                                    for (int r = 0; r < g.rows; ++r) {
                                        const S* vrow = vv2.row(r / seq_len);
                                        const S* grow = g.row(r);
                                        S* dxrow = dx.row(r);
                                        for (int c = 0; c < g.cols; ++c)
                                            dxrow[c] += multiply ? grow[c] * vrow[c] : grow[c];
                                    }
                                });
                                accumulate(v, [&](TensorT<S>& dv) {
                                    for (int r = 0; r < g.rows; ++r) {
                                        S* dvrow = dv.row(r / seq_len);
                                        const S* grow = g.row(r);
                                        const S* xrow = vx2.row(r);
                                        for (int c = 0; c < g.cols; ++c)
                                            dvrow[c] += multiply ? grow[c] * xrow[c] : grow[c];
                                    }
                                });
                            });
    }

    std::vector<Node> nodes_;
    ParamStoreT<S>* store_ = nullptr;
    Rng* rng_ = nullptr;
    bool training_ = false;
};

using Graph = GraphT<float>;

}  // namespace tabdit::nn
