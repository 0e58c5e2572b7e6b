#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "tabdit/nn/tensor.hpp"

namespace tabdit::nn {

struct ParamRef {
    int index = -1;
    bool valid() const { return index >= 0; }
};

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Named trainable tensors plus their gradient and AdamW moment buffers.
template <typename S>
class ParamStoreT {
  public:
    struct Entry {
        std::string name;
        TensorT<S> value;
        TensorT<S> grad;
        TensorT<S> m;
        TensorT<S> v;
        bool decay = false;  // weight decay applies to matrices only
    };

    ParamRef add(const std::string& name, TensorT<S> init, bool decay) {
        if (index_.count(name)) fail(ErrorCode::InvalidConfig, "duplicate parameter '" + name + "'");
        Entry entry;
        entry.name = name;
        entry.grad = TensorT<S>::zeros(init.rows, init.cols);
        entry.m = TensorT<S>::zeros(init.rows, init.cols);
        entry.v = TensorT<S>::zeros(init.rows, init.cols);
        entry.value = std::move(init);
        entry.decay = decay;
        index_[name] = static_cast<int>(entries_.size());
        entries_.push_back(std::move(entry));
        return ParamRef{static_cast<int>(entries_.size()) - 1};
    }

    ParamRef add_normal(const std::string& name, int rows, int cols, Rng& rng, double stddev,
                        bool decay = true) {
        return add(name, TensorT<S>::randn(rows, cols, rng, stddev), decay);
    }

    ParamRef add_zeros(const std::string& name, int rows, int cols, bool decay = false) {
        return add(name, TensorT<S>::zeros(rows, cols), decay);
    }

    ParamRef add_full(const std::string& name, int rows, int cols, S value, bool decay = false) {
        return add(name, TensorT<S>::full(rows, cols, value), decay);
    }

    Entry& entry(ParamRef ref) { return entries_[ref.index]; }
    const Entry& entry(ParamRef ref) const { return entries_[ref.index]; }
    TensorT<S>& value(ParamRef ref) { return entries_[ref.index].value; }
    const TensorT<S>& value(ParamRef ref) const { return entries_[ref.index].value; }
    TensorT<S>& grad(ParamRef ref) { return entries_[ref.index].grad; }

    std::size_t count() const { return entries_.size(); }
    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    ParamRef find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? ParamRef{} : ParamRef{it->second};
    }

    std::size_t scalar_count() const {
        std::size_t total = 0;
        for (const auto& e : entries_) total += e.value.size();
        return total;
    }

    void zero_grad() {
        for (auto& e : entries_) e.grad.fill(S(0));
    }

    void adamw_step(const AdamWConfig& cfg) {
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg.beta1, step_);
        const double bc2 = 1.0 - std::pow(cfg.beta2, step_);
        for (auto& e : entries_) {
            const double wd = e.decay ? cfg.weight_decay : 0.0;
            for (std::size_t i = 0; i < e.value.size(); ++i) {
                const double g = static_cast<double>(e.grad.data[i]);
                const double m = cfg.beta1 * e.m.data[i] + (1.0 - cfg.beta1) * g;
                const double v = cfg.beta2 * e.v.data[i] + (1.0 - cfg.beta2) * g * g;
                e.m.data[i] = static_cast<S>(m);
                e.v.data[i] = static_cast<S>(v);
                const double update = (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
                double x = static_cast<double>(e.value.data[i]);
                x -= cfg.lr * (update + wd * x);
                e.value.data[i] = static_cast<S>(x);
            }
        }
    }

    std::int64_t step_count() const { return step_; }
    void set_step_count(std::int64_t s) { step_ = s; }

    // FNV-1a over the parameter bytes; used by the frozen-stage checks.
    std::uint64_t content_hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& e : entries_) {
            for (S x : e.value.data) {
                const auto* bytes = reinterpret_cast<const unsigned char*>(&x);
                for (std::size_t b = 0; b < sizeof(S); ++b) {
                    h ^= bytes[b];
                    h *= 0x100000001b3ULL;
                }
            }
        }
        return h;
    }

  private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> index_;
    std::int64_t step_ = 0;
};

using ParamStore = ParamStoreT<float>;

}  // namespace tabdit::nn
