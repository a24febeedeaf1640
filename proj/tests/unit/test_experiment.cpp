#include <algorithm>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "polypgen/data/toy.hpp"
#include "polypgen/experiment/pipeline.hpp"
#include "polypgen/io/png.hpp"

using namespace polypgen;
using namespace polypgen::experiment;
using metrics::CheckpointRecord;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::IoFailure;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Deterministic stand-in generator: the sample is a function of the seed
// only. Seeds divisible by `empty_mod` give an all-background mask.
class FakeGenerator final : public latent::Generator {
public:
    FakeGenerator(denoiser::ModelKind kind, std::uint64_t empty_mod = 0) : kind_(kind), empty_mod_(empty_mod) {}
    denoiser::ModelKind kind() const override { return kind_; }
    bool latent_mode() const override { return false; }
    int channels() const override { return kind_ == denoiser::ModelKind::mask_model ? 1 : 3; }
    int resolution() const override { return 8; }
    std::string digest() const override { return "fake"; }
    std::vector<ImageTensor> sample(std::span<const BinaryMask> masks,
                                    std::span<const std::uint64_t> seeds) const override {
        ++calls;
        std::vector<ImageTensor> out;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            ImageTensor t(channels(), 8, 8, -1.0);
            const bool empty = empty_mod_ && seeds[i] % empty_mod_ == 0;
            if (!empty) t.data[seeds[i] % t.size()] = 1.0;
            if (!masks.empty()) t.data[0] = masks[i].data[0] ? 0.5 : -0.5;
            out.push_back(t);
        }
        return out;
    }
    mutable int calls = 0;

private:
    denoiser::ModelKind kind_;
    std::uint64_t empty_mod_;
};

data::PairedDataset tagged(std::size_t n, const std::string& prefix, data::Provenance p) {
    auto ds = data::make_toy_dataset(n, 8, prefix.size(), prefix);
    for (auto& s : ds.samples) s.provenance = p;
    return ds;
}

}  // namespace

TEST_CASE("checkpoint selection reproduces both published tables") {
    const std::vector<CheckpointRecord> masks{{0, 140.14, 88.22},      {50000, 128.95, 89.46},
                                              {100000, 117.14, 90.81}, {150000, 105.63, 91.31},
                                              {200000, 88.41, 92.49},  {230000, 141.44, 88.38}};
    const std::vector<CheckpointRecord> images{{88, 119.34, {}},  {103, 113.83, {}}, {135, 104.78, {}},
                                               {892, 112.66, {}}, {913, 150.97, {}}, {922, 150.85, {}}};
    CHECK(select_best_checkpoint(masks).id == 200000);
    CHECK(select_best_checkpoint(images).id == 135);

    auto shuffled = masks;
    std::mt19937_64 g(1);
    for (int i = 0; i < 20; ++i) {
        std::ranges::shuffle(shuffled, g);
        CHECK(select_best_checkpoint(shuffled) == masks[4]);
    }
    const std::vector<CheckpointRecord> tie{{30, 5.0, {}}, {10, 5.0, {}}, {20, 6.0, {}}};
    CHECK(select_best_checkpoint(tie).id == 10);
    CHECK(code_of([] { select_best_checkpoint({}); }) == ErrorCode::EmptyList);
}

TEST_CASE("mask generation: determinism, retries, kind check") {
    FakeGenerator gen(denoiser::ModelKind::mask_model, 3);
    CHECK(generate_masks(gen, 0, 5).empty());

    MaskGenerationLog log;
    const auto a = generate_masks(gen, 12, 100, &log);
    const auto b = generate_masks(gen, 12, 100);
    CHECK(a == b);
    REQUIRE(a.size() == 12);
    // Slots whose first seed (100 + i) is a multiple of 3 were redrawn.
    std::size_t first_empty = 0;
    for (std::size_t i = 0; i < 12; ++i) first_empty += (100 + i) % 3 == 0;
    CHECK(log.rejected >= first_empty);
    CHECK(log.still_empty == 0);
    for (const auto& m : a) CHECK(m.foreground() > 0);
    // Slot i depends only on its own seed.
    const auto prefix = generate_masks(gen, 5, 100);
    for (std::size_t i = 0; i < 5; ++i) CHECK(prefix[i] == a[i]);
    for (std::size_t i = 0; i < 12; ++i)
        if ((100 + i) % 3 != 0) CHECK(a[i].data[(100 + i) % 64] == 1);

    FakeGenerator always_empty(denoiser::ModelKind::mask_model, 1);
    MaskGenerationLog l2;
    const auto e = generate_masks(always_empty, 3, 0, &l2);
    CHECK(l2.still_empty == 3);
    CHECK(l2.rejected == 3 * kMaxMaskRetries);

    FakeGenerator img(denoiser::ModelKind::image_model);
    CHECK(code_of([&] { generate_masks(img, 1, 0); }) == ErrorCode::WrongModelKind);

    CHECK(mask_slot_seed(7, 3, 0) == 10);
    CHECK(mask_slot_seed(7, 3, 1) != mask_slot_seed(7, 3, 2));
}

TEST_CASE("binarize_sample thresholds at zero") {
    ImageTensor t(1, 1, 4);
    t.data = {-1.0, -1e-9, 0.0, 0.7};
    const auto m = binarize_sample(t);
    CHECK(m.data == std::vector<std::uint8_t>{0, 0, 1, 1});
}

TEST_CASE("conditioned images keep their masks and expand a single seed") {
    FakeGenerator gen(denoiser::ModelKind::image_model);
    std::mt19937_64 g(2);
    std::vector<BinaryMask> masks;
    for (int i = 0; i < 4; ++i) masks.push_back(testutil::random_mask(8, 8, g));
    const std::uint64_t one[] = {50};
    const std::uint64_t many[] = {50, 51, 52, 53};
    const auto a = generate_conditioned_images(gen, masks, one);
    const auto b = generate_conditioned_images(gen, masks, many);
    REQUIRE(a.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(a[i].mask == masks[i]);
        CHECK(a[i].image == b[i].image);
        CHECK(a[i].provenance == data::Provenance::synthetic);
    }
    CHECK(a[2].id == "syn00002");
    const std::uint64_t two[] = {1, 2};
    CHECK(code_of([&] { generate_conditioned_images(gen, masks, two); }) == ErrorCode::ShapeMismatch);
    FakeGenerator mg(denoiser::ModelKind::mask_model);
    CHECK(code_of([&] { generate_conditioned_images(mg, masks, one); }) == ErrorCode::WrongModelKind);
}

TEST_CASE("mixing prefixes are nested across k") {
    const auto real = tagged(20, "r", data::Provenance::real);
    const auto synth = tagged(30, "s", data::Provenance::synthetic);
    std::vector<std::string> prev;
    for (std::size_t k = 0; k <= 30; k += 10) {
        const auto mix = mix_training_set(real, 10, synth, k);
        REQUIRE(mix.size() == 10 + k);
        std::vector<std::string> ids;
        for (const auto& s : mix.samples) ids.push_back(s.id);
        for (std::size_t i = 0; i < 10; ++i) CHECK(ids[i] == real.samples[i].id);
        for (std::size_t i = 0; i < k; ++i) CHECK(ids[10 + i] == synth.samples[i].id);
        CHECK(std::equal(prev.begin(), prev.end(), ids.begin()));
        prev = ids;
    }
    CHECK_THROWS_AS(mix_training_set(real, 10, synth, 31), Error);
    CHECK_THROWS_AS(mix_training_set(real, 21, synth, 0), Error);
}

TEST_CASE("sweep and three-way shapes") {
    const auto real = tagged(12, "r", data::Provenance::real);
    const auto synth = tagged(12, "s", data::Provenance::synthetic);
    const auto test = tagged(4, "t", data::Provenance::real);
    seg::SegTrainConfig sc;
    sc.arch = {seg::SegModelKind::unet_small, 3, 4};
    sc.epochs = 1;
    sc.batch_size = 4;
    MixingPlan plan{4, {0, 4, 8}};
    const auto rep = run_mixing_sweep(real, synth, plan, sc, test);
    REQUIRE(rep.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(rep.rows[i].real_n == 4);
        CHECK(rep.rows[i].synth_n == 4 * i);
    }
    CHECK(rep.best_row == best_imagewise_row(rep.rows));
    // Parallel rows give identical numbers.
    CHECK(run_mixing_sweep(real, synth, plan, sc, test, {2}) == rep);

    const auto tw = run_three_way(real, synth, test, sc);
    REQUIRE(tw.rows.size() == 3);
    CHECK(tw.rows[0].synth_n == 0);
    CHECK(tw.rows[1].real_n == 0);
    CHECK(tw.rows[2].real_n == 12);
    CHECK(tw.rows[2].synth_n == 12);

    MixingPlan bad{4, {8, 4}};
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("best row is the earliest maximum") {
    std::vector<MetricRow> rows(3);
    rows[0].imagewise.iou = 0.5;
    rows[1].imagewise.iou = 0.7;
    rows[2].imagewise.iou = 0.7;
    CHECK(best_imagewise_row(rows) == 1u);
    CHECK_FALSE(best_imagewise_row({}).has_value());
}

TEST_CASE("report CSV/JSON roundtrip") {
    MetricReport r;
    for (int i = 0; i < 11; ++i) {
        MetricRow row;
        row.experiment_id = "sweep";
        row.model = "unet_small";
        row.real_n = 10;
        row.synth_n = 10 * i;
        row.micro = {0.1 * i / 3.0, 0.2, 0.3, 0.4};
        row.imagewise = {0.5, 0.6, 0.7, 1.0 / 7.0};
        r.rows.push_back(row);
    }
    r.best_row = 3;
    r.checkpoint_tables.push_back({"mask_model", {{100, 1.5, 90.25}, {200, 1.25, {}}}, 50});
    testutil::TempDir dir("report");
    const auto paths = emit_report(r, dir.path(), "sweep");
    CHECK(load_report_json(paths.json) == r);
    std::ifstream in(paths.csv);
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("schema_version,experiment_id,model,real_n,synth_n,", 0) == 0);
    int n = 0;
    for (std::string l; std::getline(in, l);) {
        CHECK(l.rfind("1,", 0) == 0);
        ++n;
    }
    CHECK(n == 11);

    std::ofstream(dir.path() / "v2.json") << R"({"schema_version":2,"rows":[]})";
    CHECK(code_of([&] { load_report_json(dir.path() / "v2.json"); }) == ErrorCode::VersionMismatch);
    std::ofstream(dir.path() / "bad.json") << "{";
    CHECK(code_of([&] { load_report_json(dir.path() / "bad.json"); }) == ErrorCode::IoFailure);

    write_checkpoint_csv(r.checkpoint_tables[0], dir.path() / "ck.csv");
    const auto back = load_checkpoint_table(dir.path() / "ck.csv");
    CHECK(back == r.checkpoint_tables[0]);
}

TEST_CASE("gallery layout") {
    std::mt19937_64 g(6);
    std::vector<BinaryMask> cells;
    for (int i = 0; i < 10; ++i) cells.push_back(testutil::random_mask(16, 16, g));
    testutil::TempDir dir("gallery");
    const auto p = emit_gallery(cells, 2, 5, dir.path() / "g.png");
    const auto img = io::read_png(p, 3);
    CHECK(img.width == 80);
    CHECK(img.height == 32);
    CHECK(img.channels == 3);

    std::vector<std::string> caps;
    for (int i = 0; i < 10; ++i) caps.push_back("G" + std::to_string(i));
    const auto q = emit_gallery(cells, 2, 5, dir.path() / "c.png", caps);
    CHECK(io::read_png(q, 3).height == 2 * (16 + kCaptionBand));

    CHECK(code_of([&] { emit_gallery(cells, 2, 4, dir.path() / "x.png"); }) == ErrorCode::ShapeMismatch);
    CHECK(code_of([&] { emit_gallery(std::span<const BinaryMask>{}, 1, 1, dir.path() / "x.png"); }) ==
          ErrorCode::EmptyList);
    CHECK(code_of([&] { emit_gallery(cells, 0, 5, dir.path() / "x.png"); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([&] { emit_gallery(cells, 2, 5, dir.path() / "x.png", std::span(caps).first(3)); }) ==
          ErrorCode::ShapeMismatch);
}

TEST_CASE("config parse, format roundtrip and errors") {
    const auto cfg = parse_config(R"(
run_id = "unit"   # comment
seed = 7
latent_mode = true

[data]
resolution = 16
toy_count = 30

[mask]
steps = 12
lr = 0.0005

[mixing]
real_count = 4
synthetic_counts = [0, 2, 4]
)");
    CHECK(cfg.run_id == "unit");
    CHECK(cfg.seed == 7);
    CHECK(cfg.latent_mode);
    CHECK(cfg.data.resolution == 16);
    CHECK(cfg.data.toy_count == 30);
    CHECK(cfg.mask.train.total_steps == 12);
    CHECK(cfg.mask.train.learning_rate == 0.0005);
    CHECK(cfg.mixing.synthetic_counts == std::vector<std::size_t>{0, 2, 4});
    CHECK(cfg.image.diffusion.conditioning == diffusion::Conditioning::mask_concat);

    const auto text = format_config(cfg);
    CHECK(format_config(parse_config(text)) == text);

    auto err = [](const char* t) {
        try {
            parse_config(t);
        } catch (const Error& e) {
            return e.code() == ErrorCode::InvalidConfig;
        }
        return false;
    };
    CHECK(err("bogus = 1"));
    CHECK(err("seed = 1\nseed = 2"));
    CHECK(err("seed = abc"));
    CHECK(err("[mask\nsteps = 1"));
    CHECK(err("mask.timesteps = 1") == false);  // parses; rejected by validate()
    auto c = parse_config("mask.timesteps = 1");
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidConfig);

    auto d = ExperimentConfig{};
    d.data.source = DataSource::directory;
    d.data.path = "/definitely/not/here";
    CHECK(code_of([&] { d.validate(); }) == ErrorCode::UnreadableFile);
    for (auto k : {metrics::FeatureKind::downsample_pixels, metrics::FeatureKind::trained_encoder})
        CHECK(parse_feature_kind(feature_kind_name(k)) == k);
}

TEST_CASE("run lock is exclusive") {
    testutil::TempDir dir("lock");
    {
        RunLock a(dir.path());
        CHECK(std::filesystem::exists(dir.path() / ".lock"));
        CHECK(code_of([&] { RunLock b(dir.path()); }) == ErrorCode::Locked);
    }
    CHECK_FALSE(std::filesystem::exists(dir.path() / ".lock"));
    CHECK_NOTHROW(RunLock(dir.path()));
}

TEST_CASE("tiny end-to-end pipeline is reproducible") {
    testutil::TempDir dir("pipe");
    auto cfg = parse_config(R"(
seed = 3
[data]
resolution = 16
toy_count = 24
test_count = 6
[mask]
timesteps = 4
base_channels = 4
embed_dim = 8
steps = 4
checkpoint_every = 2
batch_size = 4
[image]
timesteps = 4
base_channels = 4
embed_dim = 8
steps = 2
batch_size = 4
[generation]
masks = 8
eval_samples = 4
gallery_cells = 4
[seg]
width = 4
epochs = 1
batch_size = 4
[mixing]
real_count = 6
synthetic_counts = [0, 4, 8]
)");
    cfg.output_root = dir.path();
    cfg.run_id = "a";
    const auto ra = run_pipeline(cfg);
    cfg.run_id = "b";
    const auto rb = run_pipeline(cfg);
    CHECK(ra == rb);
    const auto a = dir.path() / "a", b = dir.path() / "b";
    for (const char* f : {"reports/report.json", "reports/report.csv", "reports/mask_model_checkpoints.json",
                          "reports/image_model_checkpoints.json", "samples/masks/mask_00007.png",
                          "samples/gallery_masks.png", "samples/gallery_pairs.png"}) {
        CAPTURE(f);
        REQUIRE(std::filesystem::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    CHECK(ra.rows.size() == 3 + 3);
    REQUIRE(ra.checkpoint_tables.size() == 2);
    CHECK(ra.checkpoint_tables[0].records.size() == 2);
    CHECK(load_report_json(a / "reports" / "report.json") == ra);
    CHECK_FALSE(std::filesystem::exists(a / ".lock"));
}
