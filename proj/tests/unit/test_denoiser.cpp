#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "polypgen/data/toy.hpp"
#include "polypgen/denoiser/train.hpp"

using namespace polypgen;
using namespace polypgen::denoiser;

namespace {

DenoiserArch tiny_arch(int cond = 0) {
    DenoiserArch a;
    a.base_channels = 4;
    a.depth = 2;
    a.in_channels = 1;
    a.cond_channels = cond;
    a.embed_dim = 8;
    return a;
}

DenoiserCheckpoint tiny_checkpoint() {
    DenoiserCheckpoint c;
    c.arch = tiny_arch();
    c.diffusion.timesteps = 20;
    c.kind = ModelKind::mask_model;
    c.resolution = 8;
    c.step = 42;
    c.seed = 9;
    const auto m = init_denoiser(c.arch, 9);
    c.parameters.assign(m.parameters().begin(), m.parameters().end());
    return c;
}

std::vector<char> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::vector<char>& b) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::IoFailure;
}

}  // namespace

TEST_CASE("timestep embedding follows the sinusoid definition") {
    const auto e = timestep_embedding(7, 8);
    REQUIRE(e.size() == 8);
    for (int i = 0; i < 4; ++i) {
        const double w = std::pow(10000.0, -2.0 * i / 8.0);
        CHECK(e[i] == doctest::Approx(std::sin(7 * w)).epsilon(1e-12));
        CHECK(e[4 + i] == doctest::Approx(std::cos(7 * w)).epsilon(1e-12));
    }
    CHECK(code_of([] { timestep_embedding(1, 3); }) == ErrorCode::InvalidDim);
    CHECK(code_of([] { timestep_embedding(1, 0); }) == ErrorCode::InvalidDim);
}

TEST_CASE("architecture validation") {
    auto a = tiny_arch();
    CHECK_NOTHROW(a.validate());
    a.base_channels = 0;
    CHECK(code_of([&] { a.validate(); }) == ErrorCode::InvalidArch);
    a = tiny_arch();
    a.depth = 5;
    CHECK(code_of([&] { a.validate(); }) == ErrorCode::InvalidArch);
    a = tiny_arch();
    a.embed_dim = 7;
    CHECK(code_of([&] { a.validate(); }) == ErrorCode::InvalidArch);
}

TEST_CASE("seeded initialisation is reproducible") {
    const auto a = init_denoiser(tiny_arch(), 1);
    const auto b = init_denoiser(tiny_arch(), 1);
    const auto c = init_denoiser(tiny_arch(), 2);
    REQUIRE(a.parameters().size() == b.parameters().size());
    CHECK(std::ranges::equal(a.parameters(), b.parameters()));
    CHECK_FALSE(std::ranges::equal(a.parameters(), c.parameters()));
}

TEST_CASE("batched prediction equals per-item prediction") {
    auto m = init_denoiser(tiny_arch(1), 3);
    std::mt19937_64 g(4);
    std::vector<ImageTensor> xs, cs;
    for (int i = 0; i < 5; ++i) {
        xs.push_back(testutil::random_image(1, 8, 8, g));
        cs.push_back(testutil::random_image(1, 8, 8, g));
    }
    m.max_batch = 2;  // forces chunking
    const auto all = m.predict(xs, 13, cs);
    REQUIRE(all.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        const auto one = m.predict(std::span(&xs[i], 1), 13, std::span(&cs[i], 1));
        double worst = 0.0;
        for (std::size_t j = 0; j < one[0].size(); ++j) worst = std::max(worst, std::abs(one[0].data[j] - all[i].data[j]));
        CHECK(worst < 1e-6);
    }
    // The condition actually enters the network.
    auto other = cs;
    other[0].data.assign(other[0].size(), 1.0);
    CHECK(m.predict(std::span(&xs[0], 1), 13, std::span(&other[0], 1))[0] != all[0]);

    CHECK(code_of([&] { m.predict(xs, 13, {}); }) == ErrorCode::MissingCondition);
    ImageTensor odd(1, 6, 6);
    CHECK(code_of([&] { m.predict(std::span(&odd, 1), 1, std::span(&cs[0], 1)); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("checkpoint roundtrip and corruption detection") {
    testutil::TempDir dir("ckpt");
    const auto path = dir.path() / "m.pgdn";
    auto ck = tiny_checkpoint();
    ck.latent = LatentInfo{"abc", 4, 2, 0.25};
    save_checkpoint(ck, path);
    const auto back = load_checkpoint(path);
    CHECK(back.arch == ck.arch);
    CHECK(back.diffusion == ck.diffusion);
    CHECK(back.kind == ck.kind);
    CHECK(back.resolution == 8);
    CHECK(back.step == 42);
    CHECK(back.seed == 9);
    CHECK(back.latent == ck.latent);
    CHECK(back.parameters == ck.parameters);
    CHECK(back.digest() == ck.digest());

    const auto bytes = slurp(path);
    SUBCASE("flipped parameter byte") {
        auto b = bytes;
        b[b.size() - 100] ^= 0x5a;
        spit(path, b);
        CHECK(code_of([&] { load_checkpoint(path); }) == ErrorCode::CorruptCheckpoint);
    }
    SUBCASE("truncated") {
        auto b = bytes;
        b.resize(b.size() / 2);
        spit(path, b);
        CHECK(code_of([&] { load_checkpoint(path); }) == ErrorCode::CorruptCheckpoint);
    }
    SUBCASE("wrong magic") {
        auto b = bytes;
        b[0] = 'X';
        spit(path, b);
        CHECK(code_of([&] { load_checkpoint(path); }) == ErrorCode::CorruptCheckpoint);
    }
    SUBCASE("future version") {
        auto b = bytes;
        b[8] = 99;
        spit(path, b);
        CHECK(code_of([&] { load_checkpoint(path); }) == ErrorCode::VersionMismatch);
    }
    SUBCASE("missing file") {
        CHECK(code_of([&] { load_checkpoint(dir.path() / "nope.pgdn"); }) == ErrorCode::UnreadableFile);
    }
}

TEST_CASE("digest tracks content") {
    auto a = tiny_checkpoint();
    auto b = tiny_checkpoint();
    CHECK(a.digest() == b.digest());
    b.parameters[0] += 1.0f;
    CHECK(a.digest() != b.digest());
    b = tiny_checkpoint();
    b.step = 43;
    CHECK(a.digest() != b.digest());
}

TEST_CASE("training is deterministic and labels snapshots by step") {
    const auto ds = data::make_toy_dataset(12, 8, 5);
    diffusion::DiffusionConfig dc;
    dc.timesteps = 20;
    TrainConfig tc;
    tc.learning_rate = 1e-3;
    tc.batch_size = 4;
    tc.total_steps = 6;
    tc.checkpoint_every = 2;
    tc.seed = 17;
    auto arch = tiny_arch();
    std::vector<std::int64_t> seen;
    const auto r1 = train_denoiser(ds, ModelKind::mask_model, dc, tc, arch,
                                   [&](const CurvePoint& p) { seen.push_back(p.step); });
    const auto r2 = train_denoiser(ds, ModelKind::mask_model, dc, tc, arch);
    REQUIRE(r1.checkpoints.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(r1.checkpoints[i].step == 2 * static_cast<std::int64_t>(i + 1));
        CHECK(r1.checkpoints[i].parameters == r2.checkpoints[i].parameters);
        CHECK(r1.checkpoints[i].kind == ModelKind::mask_model);
        CHECK(r1.checkpoints[i].resolution == 8);
    }
    CHECK(r1.checkpoints[0].parameters != r1.checkpoints[2].parameters);
    REQUIRE(r1.curve.size() == 6);
    CHECK(seen == std::vector<std::int64_t>{1, 2, 3, 4, 5, 6});
    for (std::size_t i = 0; i < 6; ++i) CHECK(r1.curve[i].loss == r2.curve[i].loss);

    tc.seed = 18;
    const auto r3 = train_denoiser(ds, ModelKind::mask_model, dc, tc, arch);
    CHECK(r3.checkpoints.back().parameters != r1.checkpoints.back().parameters);
}

TEST_CASE("image model examples carry the mask condition") {
    const auto ds = data::make_toy_dataset(3, 8, 1);
    const auto ex = make_examples(ds, ModelKind::image_model);
    REQUIRE(ex.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(ex[i].cond.has_value());
        CHECK(*ex[i].cond == mask_to_signed(ds.samples[i].mask));
        CHECK(ex[i].x0 == ds.samples[i].image);
    }
    const auto mx = make_examples(ds, ModelKind::mask_model);
    CHECK_FALSE(mx[0].cond.has_value());
    CHECK(mx[0].x0 == mask_to_signed(ds.samples[0].mask));

    diffusion::DiffusionConfig dc;
    dc.timesteps = 10;  // unconditional config for an image model is rejected
    TrainConfig tc;
    tc.total_steps = 1;
    CHECK_THROWS_AS(train_denoiser(ds, ModelKind::image_model, dc, tc, tiny_arch()), Error);
    data::PairedDataset empty;
    CHECK(code_of([&] { train_denoiser(empty, ModelKind::mask_model, dc, tc, tiny_arch()); }) ==
          ErrorCode::EmptyDataset);
}

TEST_CASE("curve CSV") {
    testutil::TempDir dir("curve");
    std::vector<CurvePoint> c{{1, 0.5, 0.5}, {2, 0.25, 0.4975}};
    write_curve_csv(c, dir.path() / "c.csv");
    std::ifstream in(dir.path() / "c.csv");
    std::string line;
    int n = 0;
    while (std::getline(in, line)) ++n;
    CHECK(n == 3);
}
