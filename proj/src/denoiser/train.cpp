#include "polypgen/denoiser/train.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "polypgen/seeding.hpp"

namespace polypgen::denoiser {

void TrainConfig::validate() const {
    require(learning_rate > 0.0, ErrorCode::InvalidConfig, "learning_rate must be positive");
    require(total_steps >= 1, ErrorCode::InvalidConfig, "total_steps must be >= 1");
    require(batch_size >= 1, ErrorCode::InvalidConfig, "batch_size must be >= 1");
    require(checkpoint_every >= 0, ErrorCode::InvalidConfig, "checkpoint_every must be >= 0");
    require(ema_decay >= 0.0 && ema_decay < 1.0, ErrorCode::InvalidConfig, "ema_decay must be in [0,1)");
}

template <class T>
double denoiser_mse(DenoiserNet<T>& net, const nn::Tensor<T>& x_t, const nn::Tensor<T>* cond,
                    std::span<const int> timesteps, const nn::Tensor<T>& target, bool backward) {
    nn::Graph<T> g(net.params(), backward);
    const auto xv = g.input(x_t);
    const auto cv = cond ? g.input(*cond) : -1;
    const auto y = net.forward(g, xv, cv, timesteps);
    const auto& pred = g.value(y).data;
    require(pred.size() == target.data.size(), ErrorCode::ShapeMismatch, "target shape");
    const double count = static_cast<double>(pred.size());
    double acc = 0.0;
    std::vector<T> dout(backward ? pred.size() : 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred[i]) - static_cast<double>(target.data[i]);
        acc += d * d;
        if (backward) dout[i] = static_cast<T>(2.0 * d / count);
    }
    if (backward) g.backward(y, dout);
    return acc / count;
}

template double denoiser_mse<float>(DenoiserNet<float>&, const nn::Tensor<float>&, const nn::Tensor<float>*,
                                    std::span<const int>, const nn::Tensor<float>&, bool);
template double denoiser_mse<double>(DenoiserNet<double>&, const nn::Tensor<double>&, const nn::Tensor<double>*,
                                     std::span<const int>, const nn::Tensor<double>&, bool);

TrainResult train_denoiser(std::span<const DiffusionExample> examples, ModelKind kind, const DenoiserArch& arch,
                           const diffusion::DiffusionConfig& dcfg, const TrainConfig& tcfg, const StepCallback& on_step) {
    tcfg.validate();
    arch.validate();
    if (examples.empty()) throw Error(ErrorCode::EmptyDataset, "no training examples");
    const ImageTensor& proto = examples.front().x0;
    const bool conditional = arch.cond_channels > 0;
    require(conditional == (dcfg.conditioning == diffusion::Conditioning::mask_concat), ErrorCode::InvalidConfig,
            "architecture conditioning does not match diffusion config");
    require(proto.channels == arch.in_channels, ErrorCode::ShapeMismatch, "example channels do not match architecture");
    for (const auto& ex : examples) {
        require(ex.x0.same_shape(proto), ErrorCode::ShapeMismatch, "examples must share a shape");
        require(ex.cond.has_value() == conditional, conditional ? ErrorCode::MissingCondition : ErrorCode::InvalidConfig,
                "example condition presence does not match architecture");
        if (ex.cond)
            require(ex.cond->channels == arch.cond_channels && ex.cond->height == proto.height && ex.cond->width == proto.width,
                    ErrorCode::ShapeMismatch, "condition shape");
    }

    const diffusion::NoiseSchedule sched = diffusion::make_schedule(dcfg);
    DenoiserNet<float> net(arch);
    net.params().initialize(derive_seed(tcfg.seed, streams::init));
    nn::Adam<float> opt(net.params().size(), tcfg.adam());
    diffusion::Rng rng(derive_seed(tcfg.seed, streams::data));
    std::uniform_int_distribution<std::size_t> pick(0, examples.size() - 1);
    std::uniform_int_distribution<int> pick_t(1, sched.timesteps);

    TrainResult result;
    result.curve.reserve(static_cast<std::size_t>(tcfg.total_steps));
    double ema = 0.0;
    auto snapshot = [&](std::int64_t step) {
        DenoiserCheckpoint c;
        c.arch = arch;
        c.diffusion = dcfg;
        c.kind = kind;
        c.resolution = proto.height;
        c.step = step;
        c.seed = tcfg.seed;
        c.parameters.assign(net.params().values().begin(), net.params().values().end());
        result.checkpoints.push_back(std::move(c));
    };

    const std::size_t batch = static_cast<std::size_t>(tcfg.batch_size);
    for (std::int64_t step = 1; step <= tcfg.total_steps; ++step) {
        std::vector<std::vector<double>> xs, cs, noises;
        std::vector<int> ts;
        for (std::size_t b = 0; b < batch; ++b) {
            const DiffusionExample& ex = examples[pick(rng)];
            const int t = pick_t(rng);
            ImageTensor noise = diffusion::standard_normal(proto.channels, proto.height, proto.width, rng);
            xs.push_back(diffusion::q_sample(ex.x0, t, noise, sched).data);
            noises.push_back(std::move(noise.data));
            if (ex.cond) cs.push_back(ex.cond->data);
            ts.push_back(t);
        }
        const auto x_t = nn::pack_batch<float>(xs, proto.channels, proto.height, proto.width);
        const auto target = nn::pack_batch<float>(noises, proto.channels, proto.height, proto.width);
        std::optional<nn::Tensor<float>> cond;
        if (conditional) cond = nn::pack_batch<float>(cs, arch.cond_channels, proto.height, proto.width);

        net.params().zero_grad();
        const double loss = denoiser_mse(net, x_t, cond ? &*cond : nullptr, ts, target, true);
        if (!std::isfinite(loss))
            throw Error(ErrorCode::NonFiniteLoss, "denoiser loss " + std::to_string(loss) + " at step " + std::to_string(step) +
                                                      " (lr " + std::to_string(tcfg.learning_rate) + ")");
        opt.step(net.params());
        ema = step == 1 ? loss : tcfg.ema_decay * ema + (1.0 - tcfg.ema_decay) * loss;
        const CurvePoint point{step, loss, ema};
        result.curve.push_back(point);
        if (on_step) on_step(point);
        if (tcfg.checkpoint_every > 0 && step % tcfg.checkpoint_every == 0 && step != tcfg.total_steps) snapshot(step);
    }
    snapshot(tcfg.total_steps);
    return result;
}

std::vector<DiffusionExample> make_examples(const data::PairedDataset& ds, ModelKind kind) {
    std::vector<DiffusionExample> out;
    out.reserve(ds.size());
    for (const auto& s : ds.samples) {
        if (kind == ModelKind::mask_model)
            out.push_back({mask_to_signed(s.mask), std::nullopt});
        else
            out.push_back({s.image, mask_to_signed(s.mask)});
    }
    return out;
}

TrainResult train_denoiser(const data::PairedDataset& ds, ModelKind kind, const diffusion::DiffusionConfig& dcfg,
                           const TrainConfig& tcfg, DenoiserArch arch, const StepCallback& on_step) {
    if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "training dataset is empty");
    const auto examples = make_examples(ds, kind);
    arch.in_channels = examples.front().x0.channels;
    arch.cond_channels = kind == ModelKind::image_model ? 1 : 0;
    return train_denoiser(examples, kind, arch, dcfg, tcfg, on_step);
}

void write_curve_csv(std::span<const CurvePoint> curve, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, path.string());
    out.precision(9);
    out << "step,loss,loss_ema\n";
    for (const auto& p : curve) out << p.step << ',' << p.loss << ',' << p.loss_ema << '\n';
    if (!out) throw Error(ErrorCode::IoFailure, path.string());
}

}  // namespace polypgen::denoiser
