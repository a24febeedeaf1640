#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "polypgen/data/toy.hpp"
#include "polypgen/latent/generator.hpp"

using namespace polypgen;
using namespace polypgen::latent;
using denoiser::ModelKind;

namespace {

AutoencoderArch small_ae(int in = 3) {
    AutoencoderArch a;
    a.in_channels = in;
    a.factor = 4;
    a.latent_channels = 2;
    a.base_channels = 4;
    return a;
}

Autoencoder quick_autoencoder(const data::PairedDataset& ds, int steps = 3) {
    AETrainConfig c;
    c.total_steps = steps;
    c.batch_size = 4;
    c.seed = 1;
    return Autoencoder(train_autoencoder(ds, small_ae(), c).checkpoint);
}

denoiser::DenoiserArch tiny_dn() {
    denoiser::DenoiserArch a;
    a.base_channels = 4;
    a.depth = 2;
    a.embed_dim = 8;
    return a;
}

}  // namespace

TEST_CASE("autoencoder arch validation and level count") {
    auto a = small_ae();
    CHECK(a.levels() == 2);
    a.factor = 8;
    CHECK(a.levels() == 3);
    for (int bad : {0, 1, 3, 6, 32}) {
        a.factor = bad;
        CHECK_THROWS_AS(a.validate(), Error);
    }
}

TEST_CASE("pool_mask preserves foreground mass and rejects indivisible sizes") {
    std::mt19937_64 g(2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = testutil::random_mask(16, 16, g, 0.3);
        for (int f : {1, 2, 4, 8}) {
            const auto p = pool_mask(m, f);
            CHECK(p.channels == 1);
            CHECK(p.height == 16 / f);
            double mass = 0.0;
            for (double v : p.data) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                mass += v * f * f;
            }
            CHECK(mass == doctest::Approx(static_cast<double>(m.foreground())).epsilon(1e-12));
            const auto c = downsample_condition(m, f);
            for (std::size_t i = 0; i < c.size(); ++i) CHECK(c.data[i] == doctest::Approx(2.0 * p.data[i] - 1.0));
        }
    }
    BinaryMask odd(10, 10);
    try {
        pool_mask(odd, 4);
        FAIL("expected IndivisibleSize");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IndivisibleSize);
    }
}

TEST_CASE("psnr closed form") {
    ImageTensor a(1, 2, 2, 0.0), b(1, 2, 2, 0.1);
    CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(4.0 / 0.01)));
}

TEST_CASE("autoencoder shapes, clamp, determinism and checkpoint roundtrip") {
    const auto ds = data::make_toy_dataset(8, 16, 3);
    AETrainConfig c;
    c.total_steps = 4;
    c.batch_size = 4;
    c.seed = 5;
    const auto r1 = train_autoencoder(ds, small_ae(), c);
    const auto r2 = train_autoencoder(ds, small_ae(), c);
    CHECK(r1.checkpoint.parameters == r2.checkpoint.parameters);
    CHECK(r1.loss_curve.size() == 4);
    CHECK(r1.checkpoint.resolution == 16);
    CHECK(std::isfinite(r1.train_psnr));

    const Autoencoder ae(r1.checkpoint);
    const auto z = ae.encode(ds.samples[0].image);
    CHECK(z.channels == 2);
    CHECK(z.height == 4);
    CHECK(z.width == 4);
    const auto x = ae.decode(z);
    CHECK(x.same_shape(ds.samples[0].image));
    for (double v : x.data) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }

    // latent_scale normalises the largest training latent to 1.
    double zmax = 0.0;
    for (const auto& zz : ae.encode(ds.images()))
        for (double v : zz.data) zmax = std::max(zmax, std::abs(v));
    CHECK(r1.checkpoint.latent_scale * zmax == doctest::Approx(1.0).epsilon(1e-5));

    testutil::TempDir dir("ae");
    save_autoencoder(r1.checkpoint, dir.path() / "a.pgae");
    const auto back = load_autoencoder(dir.path() / "a.pgae");
    CHECK(back.arch == r1.checkpoint.arch);
    CHECK(back.parameters == r1.checkpoint.parameters);
    CHECK(back.latent_scale == r1.checkpoint.latent_scale);
    CHECK(back.digest() == r1.checkpoint.digest());
    CHECK(Autoencoder(back).digest() == ae.digest());

    ImageTensor bad(3, 10, 10);
    CHECK_THROWS_AS(ae.encode(bad), Error);
}

TEST_CASE("pixel and latent generators share one interface") {
    const auto ds = data::make_toy_dataset(8, 16, 4);
    diffusion::DiffusionConfig dc;
    dc.timesteps = 5;
    dc.conditioning = diffusion::Conditioning::mask_concat;
    denoiser::TrainConfig tc;
    tc.total_steps = 2;
    tc.batch_size = 4;
    tc.learning_rate = 1e-3;

    const auto ae = quick_autoencoder(ds);
    const auto latent_ck = train_latent_denoiser(ds, ModelKind::image_model, ae, dc, tc, tiny_dn()).checkpoints.back();
    REQUIRE(latent_ck.latent.has_value());
    CHECK(latent_ck.latent->autoencoder_digest == ae.digest());
    CHECK(latent_ck.resolution == 4);
    CHECK(latent_ck.arch.in_channels == 2);

    const auto pixel_ck = denoiser::train_denoiser(ds, ModelKind::image_model, dc, tc, tiny_dn()).checkpoints.back();

    std::vector<BinaryMask> masks{ds.samples[0].mask, ds.samples[1].mask};
    const std::uint64_t seeds[] = {11, 12};
    for (const auto* ck : {&pixel_ck, &latent_ck}) {
        const auto gen = make_generator(*ck, ae);
        CHECK(gen->latent_mode() == ck->latent.has_value());
        CHECK(gen->resolution() == 16);
        CHECK(gen->channels() == 3);
        CHECK(gen->kind() == ModelKind::image_model);
        const auto a = gen->sample(masks, seeds);
        const auto b = gen->sample(masks, seeds);
        REQUIRE(a.size() == 2);
        CHECK(a == b);
        for (const auto& img : a) {
            CHECK(img.channels == 3);
            CHECK(img.height == 16);
            for (double v : img.data) {
                CHECK(v >= -1.0);
                CHECK(v <= 1.0);
            }
        }
        CHECK(a[0] != a[1]);
        CHECK_THROWS_AS(gen->sample(std::span(masks).first(1), seeds), Error);
    }
    CHECK(make_generator(pixel_ck)->digest() != make_generator(latent_ck, ae)->digest());

    CHECK_THROWS_AS(make_generator(latent_ck), Error);
    const auto other = Autoencoder([&] {
        AETrainConfig c;
        c.total_steps = 3;
        c.batch_size = 4;
        c.seed = 2;
        return train_autoencoder(ds, small_ae(), c).checkpoint;
    }());
    CHECK_THROWS_AS(LatentGenerator(latent_ck, other), Error);
}

TEST_CASE("latent examples are scaled encodings with pooled conditions") {
    const auto ds = data::make_toy_dataset(4, 16, 8);
    const auto ae = quick_autoencoder(ds);
    const auto ex = make_latent_examples(ds, ModelKind::image_model, ae);
    REQUIRE(ex.size() == 4);
    const double s = ae.checkpoint().latent_scale;
    const auto z = ae.encode(ds.samples[2].image);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(ex[2].x0.data[i] == doctest::Approx(s * z.data[i]));
    REQUIRE(ex[2].cond.has_value());
    CHECK(*ex[2].cond == downsample_condition(ds.samples[2].mask, 4));
}
