#pragma once

#include <functional>
#include <vector>

#include "tabdit/nn/graph.hpp"
#include "tabdit/nn/tensor.hpp"
#include "tabdit/rng.hpp"

namespace tabdit {

// Gaussian diffusion constants. beta_t is stored for t = 1..T; alpha_bar(0)
// is defined as 1.
class NoiseSchedule {
  public:
    // Linear betas rescaled from the reference 1000-step range
    // [1e-4, 2e-2] to T steps, keeping the total corruption comparable.
    static NoiseSchedule linear(int steps, double beta_start = 1e-4, double beta_end = 2e-2);
    static NoiseSchedule from_betas(std::vector<double> betas);

    int steps() const { return static_cast<int>(betas_.size()); }
    double beta(int t) const;       // t in 1..T
    double alpha(int t) const;      // 1 - beta_t
    double alpha_bar(int t) const;  // t in 0..T, alpha_bar(0) == 1
    // Fixed reverse variance beta_tilde_t = beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t).
    double posterior_variance(int t) const;

    void check_step(int t) const;  // throws StepOutOfRange unless 1 <= t <= T

  private:
    std::vector<double> betas_;
    std::vector<double> alpha_bars_;  // index t, 0..T
};

struct GuidanceConfig {
    double scale = 4.0;       // s; 1 disables guidance
    double drop_prob = 0.005;  // p_d, per-sample condition drop at training
};

// s_t = sqrt(alpha_bar_t) s_0 + sqrt(1 - alpha_bar_t) eps
template <typename S>
nn::TensorT<S> forward_sample(const NoiseSchedule& schedule, const nn::TensorT<S>& s0, int t,
                              const nn::TensorT<S>& eps) {
    schedule.check_step(t);
    if (!s0.same_shape(eps)) fail(ErrorCode::ShapeMismatch, "forward_sample noise shape");
    const double scale_signal = std::sqrt(schedule.alpha_bar(t));
    const double scale_noise = std::sqrt(1.0 - schedule.alpha_bar(t));
    nn::TensorT<S> out(s0.rows, s0.cols);
    for (std::size_t i = 0; i < s0.size(); ++i)
        out.data[i] = static_cast<S>(scale_signal * s0.data[i] + scale_noise * eps.data[i]);
    return out;
}

// Exact inversion of the forward map given the true noise.
template <typename S>
nn::TensorT<S> recover_s0(const NoiseSchedule& schedule, const nn::TensorT<S>& s_t, int t,
                          const nn::TensorT<S>& eps) {
    schedule.check_step(t);
    const double scale_signal = std::sqrt(schedule.alpha_bar(t));
    const double scale_noise = std::sqrt(1.0 - schedule.alpha_bar(t));
    nn::TensorT<S> out(s_t.rows, s_t.cols);
    for (std::size_t i = 0; i < s_t.size(); ++i)
        out.data[i] = static_cast<S>((s_t.data[i] - scale_noise * eps.data[i]) / scale_signal);
    return out;
}

// Classifier-free guidance: uncond + s * (cond - uncond). The s = 0 and
// s = 1 endpoints short-circuit so they are exact.
template <typename S>
nn::TensorT<S> cfg_combine(const nn::TensorT<S>& uncond, const nn::TensorT<S>& cond, double scale) {
    if (!uncond.same_shape(cond)) fail(ErrorCode::ShapeMismatch, "cfg_combine");
    if (scale == 0.0) return uncond;
    if (scale == 1.0) return cond;
    nn::TensorT<S> out(uncond.rows, uncond.cols);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] =
            static_cast<S>(uncond.data[i] + scale * (cond.data[i] - uncond.data[i]));
    return out;
}

// One reverse step from the eps prediction; deterministic at t = 1.
template <typename S>
nn::TensorT<S> reverse_step(const NoiseSchedule& schedule, const nn::TensorT<S>& s_t, int t,
                            const nn::TensorT<S>& eps_hat, Rng& rng) {
    schedule.check_step(t);
    if (!s_t.same_shape(eps_hat)) fail(ErrorCode::ShapeMismatch, "reverse_step prediction shape");
    const double alpha_t = schedule.alpha(t);
    const double noise_coef = schedule.beta(t) / std::sqrt(1.0 - schedule.alpha_bar(t));
    const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha_t);
    const double sigma = t > 1 ? std::sqrt(schedule.posterior_variance(t)) : 0.0;
    nn::TensorT<S> out(s_t.rows, s_t.cols);
    for (std::size_t i = 0; i < s_t.size(); ++i) {
        const double mean = inv_sqrt_alpha * (s_t.data[i] - noise_coef * eps_hat.data[i]);
        const double noise = t > 1 ? rng.normal() : 0.0;
        out.data[i] = static_cast<S>(mean + sigma * noise);
    }
    return out;
}

// Batched training corruption for the denoiser loss: per sample, one
// uniformly drawn timestep, fresh Gaussian noise and an independent
// condition-drop coin with probability drop_prob.
template <typename S>
struct DiffusionBatch {
    nn::TensorT<S> s_t;          // [B*tau, d]
    nn::TensorT<S> eps;          // [B*tau, d]
    std::vector<int> timesteps;  // per sample, size B
    std::vector<char> dropped;   // per sample condition drop, size B
};

template <typename S>
DiffusionBatch<S> make_diffusion_batch(const NoiseSchedule& schedule, const nn::TensorT<S>& s0,
                                       int tau, Rng& rng, double drop_prob = 0.0) {
    if (tau <= 0 || s0.rows % tau != 0) fail(ErrorCode::ShapeMismatch, "make_diffusion_batch tau");
    const int batch = s0.rows / tau;
    DiffusionBatch<S> out;
    out.eps = nn::TensorT<S>::randn(s0.rows, s0.cols, rng);
    out.s_t = nn::TensorT<S>(s0.rows, s0.cols);
    out.timesteps.resize(batch);
    out.dropped.resize(batch);
    for (int b = 0; b < batch; ++b) {
        const int t = static_cast<int>(rng.uniform_int(1, schedule.steps()));
        out.timesteps[b] = t;
        out.dropped[b] = rng.bernoulli(drop_prob);
        const double scale_signal = std::sqrt(schedule.alpha_bar(t));
        const double scale_noise = std::sqrt(1.0 - schedule.alpha_bar(t));
        for (int i = 0; i < tau; ++i) {
            const int r = b * tau + i;
            for (int c = 0; c < s0.cols; ++c)
                out.s_t.at(r, c) = static_cast<S>(scale_signal * s0.at(r, c) +
                                                  scale_noise * out.eps.at(r, c));
        }
    }
    return out;
}

// Mean squared error between the prediction node and the drawn noise.
template <typename S>
nn::Val diffusion_mse(nn::GraphT<S>& g, nn::Val prediction, const nn::TensorT<S>& eps) {
    nn::Val diff = g.sub(prediction, g.input(eps));
    return g.mean_all(g.mul(diff, diff));
}

// Denoiser callbacks used by the sampler. `cond` is empty for purely
// unconditional models.
template <typename S>
struct SamplerDenoiser {
    std::function<nn::TensorT<S>(const nn::TensorT<S>& s_t, int t)> uncond;
    std::function<nn::TensorT<S>(const nn::TensorT<S>& s_t, int t)> cond;
};

// Runs the full reverse chain for `count` independent sequences of shape
// tau x d. Chain i draws all of its noise from Rng::stream(seed, i), so a
// chain's output does not depend on how chains are batched.
template <typename S>
nn::TensorT<S> sample_chain(const NoiseSchedule& schedule, const SamplerDenoiser<S>& denoiser,
                            int count, int tau, int d, double guidance_scale, std::uint64_t seed) {
    std::vector<Rng> streams;
    streams.reserve(count);
    for (int i = 0; i < count; ++i) streams.push_back(Rng::stream(seed, i));

    nn::TensorT<S> state(count * tau, d);
    for (int i = 0; i < count; ++i)
        for (int r = 0; r < tau; ++r)
            for (int c = 0; c < d; ++c)
                state.at(i * tau + r, c) = static_cast<S>(streams[i].normal());

    const bool conditional = static_cast<bool>(denoiser.cond);
    for (int t = schedule.steps(); t >= 1; --t) {
        nn::TensorT<S> eps_hat;
        if (!conditional) {
            eps_hat = denoiser.uncond(state, t);
        } else if (guidance_scale == 1.0) {
            eps_hat = denoiser.cond(state, t);
        } else {
            eps_hat = cfg_combine(denoiser.uncond(state, t), denoiser.cond(state, t),
                                  guidance_scale);
        }
        if (!state.same_shape(eps_hat)) fail(ErrorCode::ShapeMismatch, "denoiser output shape");

        const double alpha_t = schedule.alpha(t);
        const double noise_coef = schedule.beta(t) / std::sqrt(1.0 - schedule.alpha_bar(t));
        const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha_t);
        const double sigma = t > 1 ? std::sqrt(schedule.posterior_variance(t)) : 0.0;
        for (int i = 0; i < count; ++i) {
            for (int r = 0; r < tau; ++r) {
                const int row = i * tau + r;
                for (int c = 0; c < d; ++c) {
                    const double mean =
                        inv_sqrt_alpha * (state.at(row, c) - noise_coef * eps_hat.at(row, c));
                    const double noise = t > 1 ? streams[i].normal() : 0.0;
                    state.at(row, c) = static_cast<S>(mean + sigma * noise);
                }
            }
        }
    }
    return state;
}

}  // namespace tabdit
