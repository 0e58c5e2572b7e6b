#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "tabdit/errors.hpp"
#include "tabdit/rng.hpp"

namespace tabdit::nn {

// Dense row-major matrix. All activations are 2-D; callers track any
// batch/sequence factorization of the row dimension themselves.
template <typename S>
struct TensorT {
    int rows = 0;
    int cols = 0;
    std::vector<S> data;

    TensorT() = default;
    TensorT(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, S(0)) {}

    static TensorT zeros(int r, int c) { return TensorT(r, c); }

    static TensorT full(int r, int c, S value) {
        TensorT t(r, c);
        for (auto& x : t.data) x = value;
        return t;
    }

    static TensorT randn(int r, int c, Rng& rng, double stddev = 1.0) {
        TensorT t(r, c);
        for (auto& x : t.data) x = static_cast<S>(rng.normal() * stddev);
        return t;
    }

    std::size_t size() const { return data.size(); }
    S* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const S* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
    S& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    S at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    bool same_shape(const TensorT& other) const {
        return rows == other.rows && cols == other.cols;
    }

    void fill(S value) {
        for (auto& x : data) x = value;
    }

    bool all_finite() const {
        for (S x : data)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }
};

using Tensor = TensorT<float>;

// c[M,N] += a[M,K] * b[K,N]. Accumulation order per output element is the
// plain k loop regardless of thread count, so results are deterministic.
template <typename S>
void gemm_acc(const S* a, const S* b, S* c, int m, int k_dim, int n) {
#pragma omp parallel for schedule(static) if (m >= 64)
    for (int i = 0; i < m; ++i) {
        S* c_row = c + static_cast<std::size_t>(i) * n;
        const S* a_row = a + static_cast<std::size_t>(i) * k_dim;
        for (int k = 0; k < k_dim; ++k) {
            const S a_ik = a_row[k];
            const S* b_row = b + static_cast<std::size_t>(k) * n;
            for (int j = 0; j < n; ++j) c_row[j] += a_ik * b_row[j];
        }
    }
}

template <typename S>
TensorT<S> transposed(const TensorT<S>& a) {
    TensorT<S> t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

// y = x * w^T with x[R,I], w[O,I].
template <typename S>
TensorT<S> matmul_nt(const TensorT<S>& x, const TensorT<S>& w) {
    if (x.cols != w.cols) fail(ErrorCode::ShapeMismatch, "matmul_nt inner dimensions");
    TensorT<S> wt = transposed(w);
    TensorT<S> y(x.rows, w.rows);
    gemm_acc(x.data.data(), wt.data.data(), y.data.data(), x.rows, x.cols, w.rows);
    return y;
}

}  // namespace tabdit::nn
