#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tabdit/nn/tensor.hpp"

namespace tabdit {

// Per-dimension standardization of the latents seen by the denoiser;
// fitted on the training latents and inverted before decoding.
struct LatentScaler {
    std::vector<float> mean;
    std::vector<float> stddev;

    bool empty() const { return mean.empty(); }

    static LatentScaler fit(const nn::Tensor& latents) {
        LatentScaler scaler;
        const int d = latents.cols;
        scaler.mean.assign(d, 0.0f);
        scaler.stddev.assign(d, 1.0f);
        std::vector<double> mean(d, 0.0), var(d, 0.0);
        for (int r = 0; r < latents.rows; ++r)
            for (int c = 0; c < d; ++c) mean[c] += latents.at(r, c);
        for (auto& m : mean) m /= latents.rows;
        for (int r = 0; r < latents.rows; ++r)
            for (int c = 0; c < d; ++c) {
                const double x = latents.at(r, c) - mean[c];
                var[c] += x * x;
            }
        for (int c = 0; c < d; ++c) {
            scaler.mean[c] = static_cast<float>(mean[c]);
            scaler.stddev[c] =
                static_cast<float>(std::max(std::sqrt(var[c] / latents.rows), 1e-4));
        }
        return scaler;
    }

    void normalize(nn::Tensor& latents) const {
        if (empty()) return;
        for (int r = 0; r < latents.rows; ++r)
            for (int c = 0; c < latents.cols; ++c)
                latents.at(r, c) = (latents.at(r, c) - mean[c]) / stddev[c];
    }

    void denormalize(nn::Tensor& latents) const {
        if (empty()) return;
        for (int r = 0; r < latents.rows; ++r)
            for (int c = 0; c < latents.cols; ++c)
                latents.at(r, c) = latents.at(r, c) * stddev[c] + mean[c];
    }
};

}  // namespace tabdit
