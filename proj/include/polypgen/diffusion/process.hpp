#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "polypgen/diffusion/schedule.hpp"
#include "polypgen/tensor.hpp"

namespace polypgen::diffusion {

using Rng = std::mt19937_64;

/// Anything that predicts the noise component ε̂(x_t, t, cond). Conditions are
/// already in network range ([-1, 1] grids at the input's spatial size).
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual bool conditional() const = 0;
    /// `conds` is empty for unconditional predictors, else one per input.
    virtual std::vector<ImageTensor> predict(std::span<const ImageTensor> x_t, int t,
                                             std::span<const ImageTensor> conds) const = 0;

    ImageTensor predict_one(const ImageTensor& x_t, int t, const ImageTensor* cond) const;
};

/// Fresh i.i.d. N(0,1) grid; draws exactly c·h·w values from `rng`.
ImageTensor standard_normal(int channels, int height, int width, Rng& rng);

/// √ᾱ_t·x0 + √(1−ᾱ_t)·noise, no clamping. t = 0 returns x0.
ImageTensor q_sample(const ImageTensor& x0, int t, const ImageTensor& noise, const NoiseSchedule& sched);

/// (x_t − √(1−ᾱ_t)·ε̂)/√ᾱ_t, optionally clamped to [-1, 1].
ImageTensor predict_x0_from_eps(const ImageTensor& x_t, int t, const ImageTensor& eps_hat, const NoiseSchedule& sched,
                                bool clamp = true);

struct PosteriorCoeffs {
    double x0;
    double xt;
};
PosteriorCoeffs posterior_coeffs(int t, const NoiseSchedule& sched);

/// μ̃_t(x0, x_t).
ImageTensor posterior_mean(const ImageTensor& x0, const ImageTensor& x_t, int t, const NoiseSchedule& sched);

/// One ancestral step x_t → x_{t−1}; no noise is added at t = 1.
ImageTensor p_sample_step(const NoisePredictor& model, const ImageTensor& x_t, int t, const ImageTensor* cond,
                          const NoiseSchedule& sched, Rng& rng);

/// Full reverse chain from x_T ~ N(0, I); result clamped to [-1, 1].
ImageTensor sample_loop(const NoisePredictor& model, int channels, int height, int width, const ImageTensor* cond,
                        const NoiseSchedule& sched, Rng& rng);

/// sample_loop over many items at once, one generator per item; every item is
/// identical to what sample_loop would produce with the same generator.
std::vector<ImageTensor> sample_loop_batch(const NoisePredictor& model, int channels, int height, int width,
                                           std::span<const ImageTensor> conds, std::span<Rng> rngs,
                                           const NoiseSchedule& sched);

/// mean((noise − ε̂(q_sample(x0, t, noise), t, cond))²)
double training_loss(const NoisePredictor& model, const ImageTensor& x0, const ImageTensor* cond, int t,
                     const ImageTensor& noise, const NoiseSchedule& sched);

}  // namespace polypgen::diffusion
