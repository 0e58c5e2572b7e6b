#include "tabdit/diffusion.hpp"

#include <cmath>

#include "tabdit/errors.hpp"

namespace tabdit {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
    if (steps < 1 || steps > 1000)
        fail(ErrorCode::InvalidConfig, "linear schedule supports 1..1000 steps");
    // Respace the reference 1000-step linear schedule: each of the T steps
    // spans a window of reference steps, so alpha_bar(T) matches the
    // reference terminal value for every T.
    constexpr int kRefSteps = 1000;
    std::vector<double> ref_log_alpha(kRefSteps + 1, 0.0);
    for (int t = 1; t <= kRefSteps; ++t) {
        const double beta =
            beta_start + (beta_end - beta_start) * (t - 1) / (kRefSteps - 1);
        ref_log_alpha[t] = ref_log_alpha[t - 1] + std::log1p(-beta);
    }
    std::vector<double> betas(steps);
    for (int t = 1; t <= steps; ++t) {
        const int hi = static_cast<int>(std::llround(static_cast<double>(t) * kRefSteps / steps));
        const int lo = static_cast<int>(
            std::llround(static_cast<double>(t - 1) * kRefSteps / steps));
        betas[t - 1] = 1.0 - std::exp(ref_log_alpha[hi] - ref_log_alpha[lo]);
    }
    return from_betas(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
    if (betas.empty()) fail(ErrorCode::InvalidConfig, "empty beta sequence");
    NoiseSchedule schedule;
    schedule.alpha_bars_.resize(betas.size() + 1);
    schedule.alpha_bars_[0] = 1.0;
    double prev = 0.0;
    for (std::size_t t = 0; t < betas.size(); ++t) {
        if (betas[t] < 0.0 || betas[t] >= 1.0)
            fail(ErrorCode::InvalidConfig, "beta outside [0, 1)");
        if (betas[t] < prev) fail(ErrorCode::InvalidConfig, "betas must be non-decreasing");
        prev = betas[t];
        schedule.alpha_bars_[t + 1] = schedule.alpha_bars_[t] * (1.0 - betas[t]);
    }
    schedule.betas_ = std::move(betas);
    return schedule;
}

void NoiseSchedule::check_step(int t) const {
    if (t < 1 || t > steps()) fail(ErrorCode::StepOutOfRange, "diffusion step " + std::to_string(t));
}

double NoiseSchedule::beta(int t) const {
    check_step(t);
    return betas_[t - 1];
}

double NoiseSchedule::alpha(int t) const { return 1.0 - beta(t); }

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > steps()) fail(ErrorCode::StepOutOfRange, "alpha_bar step");
    return alpha_bars_[t];
}

double NoiseSchedule::posterior_variance(int t) const {
    check_step(t);
    return beta(t) * (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t));
}

}  // namespace tabdit
