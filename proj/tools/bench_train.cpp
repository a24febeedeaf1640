#include <chrono>
#include <cstdio>
#include "polypgen/data/toy.hpp"
#include "polypgen/denoiser/train.hpp"
using namespace polypgen;
int main(int argc, char** argv) {
    int base = argc > 1 ? atoi(argv[1]) : 16;
    int batch = argc > 2 ? atoi(argv[2]) : 16;
    int res = argc > 3 ? atoi(argv[3]) : 32;
    auto ds = data::make_toy_dataset(64, res, 1);
    diffusion::DiffusionConfig d; d.timesteps = 200;
    denoiser::TrainConfig t; t.total_steps = 50; t.batch_size = batch; t.learning_rate = 1e-3;
    denoiser::DenoiserArch a; a.base_channels = base;
    auto t0 = std::chrono::steady_clock::now();
    auto r = denoiser::train_denoiser(ds, denoiser::ModelKind::mask_model, d, t, a);
    auto t1 = std::chrono::steady_clock::now();
    double s = std::chrono::duration<double>(t1 - t0).count();
    printf("params=%zu step=%.3f ms loss0=%.3f lossN=%.3f\n", r.checkpoints.back().parameters.size(), s / 50 * 1000, r.curve.front().loss, r.curve.back().loss_ema);
    auto model = r.checkpoints.back().model();
    std::vector<ImageTensor> xs(32, ImageTensor(1, res, res, 0.1));
    t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 5; ++i) model.predict(xs, 10, {});
    t1 = std::chrono::steady_clock::now();
    printf("predict 32: %.3f ms\n", std::chrono::duration<double>(t1 - t0).count() / 5 * 1000);
}
