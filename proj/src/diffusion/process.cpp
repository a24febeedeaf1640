#include "polypgen/diffusion/process.hpp"

#include <algorithm>
#include <cmath>

namespace polypgen::diffusion {
namespace {

void check_t(int t, const NoiseSchedule& sched, int lowest) {
    require(t >= lowest && t <= sched.timesteps, ErrorCode::InvalidConfig,
            "timestep " + std::to_string(t) + " outside [" + std::to_string(lowest) + ", " +
                std::to_string(sched.timesteps) + "]");
}

void check_condition(const NoisePredictor& model, bool has_cond) {
    if (model.conditional() && !has_cond) throw Error(ErrorCode::MissingCondition, "conditional model needs a condition");
    if (!model.conditional() && has_cond)
        throw Error(ErrorCode::InvalidConfig, "unconditional model was given a condition");
}

}  // namespace

ImageTensor NoisePredictor::predict_one(const ImageTensor& x_t, int t, const ImageTensor* cond) const {
    std::span<const ImageTensor> conds;
    if (cond) conds = std::span<const ImageTensor>(cond, 1);
    auto out = predict(std::span<const ImageTensor>(&x_t, 1), t, conds);
    require(out.size() == 1 && out.front().same_shape(x_t), ErrorCode::ShapeMismatch, "predictor output shape");
    return std::move(out.front());
}

ImageTensor standard_normal(int channels, int height, int width, Rng& rng) {
    ImageTensor z(channels, height, width);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& v : z.data) v = dist(rng);
    return z;
}

ImageTensor q_sample(const ImageTensor& x0, int t, const ImageTensor& noise, const NoiseSchedule& sched) {
    require_same_shape(x0, noise, "q_sample noise shape");
    check_t(t, sched, 0);
    const double a = std::sqrt(sched.alpha_bar[t]);
    const double b = std::sqrt(1.0 - sched.alpha_bar[t]);
    ImageTensor out = x0;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a * x0.data[i] + b * noise.data[i];
    return out;
}

ImageTensor predict_x0_from_eps(const ImageTensor& x_t, int t, const ImageTensor& eps_hat, const NoiseSchedule& sched,
                                bool clamp) {
    require_same_shape(x_t, eps_hat, "predict_x0_from_eps shapes");
    check_t(t, sched, 1);
    const double a = std::sqrt(sched.alpha_bar[t]);
    const double b = std::sqrt(1.0 - sched.alpha_bar[t]);
    ImageTensor out = x_t;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = (x_t.data[i] - b * eps_hat.data[i]) / a;
        out.data[i] = clamp ? std::clamp(v, -1.0, 1.0) : v;
    }
    return out;
}

PosteriorCoeffs posterior_coeffs(int t, const NoiseSchedule& sched) {
    check_t(t, sched, 1);
    const double denom = 1.0 - sched.alpha_bar[t];
    return {std::sqrt(sched.alpha_bar[t - 1]) * sched.beta[t] / denom,
            std::sqrt(sched.alpha[t]) * (1.0 - sched.alpha_bar[t - 1]) / denom};
}

ImageTensor posterior_mean(const ImageTensor& x0, const ImageTensor& x_t, int t, const NoiseSchedule& sched) {
    require_same_shape(x0, x_t, "posterior_mean shapes");
    const auto c = posterior_coeffs(t, sched);
    ImageTensor out = x0;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = c.x0 * x0.data[i] + c.xt * x_t.data[i];
    return out;
}

namespace {

ImageTensor step_from_eps(const ImageTensor& x_t, const ImageTensor& eps_hat, int t, const NoiseSchedule& sched,
                          Rng& rng) {
    require_same_shape(x_t, eps_hat, "predictor output shape");
    const ImageTensor x0_hat = predict_x0_from_eps(x_t, t, eps_hat, sched, true);
    ImageTensor mean = posterior_mean(x0_hat, x_t, t, sched);
    if (t > 1) {
        const ImageTensor z = standard_normal(x_t.channels, x_t.height, x_t.width, rng);
        const double sd = std::sqrt(sched.posterior_var[t]);
        for (std::size_t i = 0; i < mean.size(); ++i) mean.data[i] += sd * z.data[i];
    }
    return mean;
}

}  // namespace

ImageTensor p_sample_step(const NoisePredictor& model, const ImageTensor& x_t, int t, const ImageTensor* cond,
                          const NoiseSchedule& sched, Rng& rng) {
    check_condition(model, cond != nullptr);
    check_t(t, sched, 1);
    const ImageTensor eps_hat = model.predict_one(x_t, t, cond);
    return step_from_eps(x_t, eps_hat, t, sched, rng);
}

ImageTensor sample_loop(const NoisePredictor& model, int channels, int height, int width, const ImageTensor* cond,
                        const NoiseSchedule& sched, Rng& rng) {
    check_condition(model, cond != nullptr);
    ImageTensor x = standard_normal(channels, height, width, rng);
    for (int t = sched.timesteps; t >= 1; --t) x = p_sample_step(model, x, t, cond, sched, rng);
    for (auto& v : x.data) v = std::clamp(v, -1.0, 1.0);
    return x;
}

std::vector<ImageTensor> sample_loop_batch(const NoisePredictor& model, int channels, int height, int width,
                                           std::span<const ImageTensor> conds, std::span<Rng> rngs,
                                           const NoiseSchedule& sched) {
    const std::size_t n = rngs.size();
    check_condition(model, !conds.empty());
    require(conds.empty() || conds.size() == n, ErrorCode::ShapeMismatch, "one condition per sample required");
    std::vector<ImageTensor> xs;
    xs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) xs.push_back(standard_normal(channels, height, width, rngs[i]));
    if (n == 0) return xs;
    for (int t = sched.timesteps; t >= 1; --t) {
        auto eps = model.predict(xs, t, conds);
        require(eps.size() == n, ErrorCode::ShapeMismatch, "predictor batch size");
        for (std::size_t i = 0; i < n; ++i) xs[i] = step_from_eps(xs[i], eps[i], t, sched, rngs[i]);
    }
    for (auto& x : xs)
        for (auto& v : x.data) v = std::clamp(v, -1.0, 1.0);
    return xs;
}

double training_loss(const NoisePredictor& model, const ImageTensor& x0, const ImageTensor* cond, int t,
                     const ImageTensor& noise, const NoiseSchedule& sched) {
    check_condition(model, cond != nullptr);
    check_t(t, sched, 1);
    const ImageTensor x_t = q_sample(x0, t, noise, sched);
    const ImageTensor eps_hat = model.predict_one(x_t, t, cond);
    double acc = 0.0;
    for (std::size_t i = 0; i < noise.size(); ++i) {
        const double d = noise.data[i] - eps_hat.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(noise.size());
}

}  // namespace polypgen::diffusion
