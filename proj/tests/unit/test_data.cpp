#include <doctest.h>

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "polypgen/data/dataset.hpp"
#include "polypgen/data/toy.hpp"
#include "polypgen/io/png.hpp"

using namespace polypgen;
namespace fs = std::filesystem;

TEST_CASE("8-bit mapping round-trips every level") {
    for (int u = 0; u < 256; ++u) CHECK(data::signed_to_u8(data::u8_to_signed(static_cast<std::uint8_t>(u))) == u);
    CHECK(data::signed_to_u8(-5.0) == 0);
    CHECK(data::signed_to_u8(5.0) == 255);
}

TEST_CASE("binarize_mask: ties go to foreground") {
    ImageTensor raw(1, 1, 3);
    raw.data = {0.49, 0.5, 0.51};
    const auto m = data::binarize_mask(raw, 0.5);
    CHECK(m.data == std::vector<std::uint8_t>{0, 1, 1});
    CHECK_THROWS_AS(data::binarize_mask(ImageTensor(3, 2, 2)), Error);
}

TEST_CASE("count_components uses 4-connectivity") {
    BinaryMask m(4, 4);
    CHECK(count_components(m) == 0);
    m.at(0, 0) = 1;
    m.at(1, 1) = 1;  // diagonal only: separate
    CHECK(count_components(m) == 2);
    m.at(0, 1) = 1;
    CHECK(count_components(m) == 1);
    m.at(3, 3) = 1;
    CHECK(count_components(m) == 2);
}

TEST_CASE("toy corpus is seeded and non-degenerate") {
    const auto a = data::make_toy_dataset(20, 32, 5);
    const auto b = data::make_toy_dataset(20, 32, 5);
    const auto c = data::make_toy_dataset(20, 32, 6);
    REQUIRE(a.size() == 20);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.samples[i].mask == b.samples[i].mask);
        CHECK(a.samples[i].image == b.samples[i].image);
        CHECK(a.samples[i].mask.foreground() > 0);
        CHECK(a.samples[i].image.channels == 3);
        differs |= !(a.samples[i].mask == c.samples[i].mask);
    }
    CHECK(differs);
    // The shading rule is a pure function of the mask.
    CHECK(data::shade_mask(a.samples[3].mask) == a.samples[3].image);
}

TEST_CASE("written datasets reload exactly (masks) and within quantisation (images)") {
    testutil::TempDir dir("data");
    auto ds = data::make_toy_dataset(6, 16, 3, "p");
    for (auto& s : ds.samples) s.provenance = data::Provenance::synthetic;
    const auto manifest = data::write_generated_dataset(ds.samples, dir.path(), {"abc", 77});
    REQUIRE(fs::exists(manifest));

    std::ifstream in(manifest);
    const auto j = nlohmann::json::parse(in);
    for (const char* key : {"ids", "provenance", "generator_digest", "seed", "resolution", "created_at"})
        CHECK(j.contains(key));
    CHECK(j["seed"] == 77);
    CHECK(j["generator_digest"] == "abc");

    const auto back = data::load_paired_dataset(dir.path(), 16);
    REQUIRE(back.size() == ds.size());
    CHECK(!back.source.digest.empty());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.samples[i].id == ds.samples[i].id);
        CHECK(back.samples[i].mask == ds.samples[i].mask);
        CHECK(back.samples[i].provenance == data::Provenance::synthetic);
        for (std::size_t k = 0; k < ds.samples[i].image.size(); ++k)
            CHECK(std::abs(back.samples[i].image.data[k] - ds.samples[i].image.data[k]) <= 1.0 / 255.0 + 1e-12);
    }
    // Same content, same digest.
    CHECK(data::load_paired_dataset(dir.path(), 16).source.digest == back.source.digest);
}

TEST_CASE("loader errors") {
    testutil::TempDir dir("loaderr");
    CHECK_THROWS_AS(data::load_paired_dataset(dir.path() / "missing", 16), Error);
    fs::create_directories(dir.path() / "images");
    fs::create_directories(dir.path() / "masks");
    try {
        data::load_paired_dataset(dir.path(), 16);
        FAIL("expected EmptyDataset");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyDataset);
    }
    io::Image8 img{8, 8, 3, std::vector<std::uint8_t>(8 * 8 * 3, 100)};
    io::write_png(dir.path() / "images" / "a.png", img);
    try {
        data::load_paired_dataset(dir.path(), 16);
        FAIL("expected MissingMask");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingMask);
    }
    // Mask present now: loads and resizes to the requested resolution.
    data::write_mask_png(dir.path() / "masks" / "a.png", BinaryMask(8, 8, 1));
    const auto ds = data::load_paired_dataset(dir.path(), 16);
    REQUIRE(ds.size() == 1);
    CHECK(ds.samples[0].mask.height == 16);
    CHECK(ds.samples[0].mask.foreground() == 256);
    CHECK(ds.samples[0].image.height == 16);
}

TEST_CASE("resizing") {
    std::mt19937_64 rng(1);
    const auto m = testutil::random_mask(8, 8, rng);
    const auto up = data::resize_nearest(m, 16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) CHECK(up.at(y, x) == m.at(y / 2, x / 2));
    CHECK(data::resize_nearest(up, 8, 8).size() == 64);

    ImageTensor flat(3, 10, 10, 0.25);
    const auto r = data::resize_bilinear(flat, 7, 13);
    CHECK(r.height == 7);
    CHECK(r.width == 13);
    for (double v : r.data) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("split_dataset: disjoint, seeded, size-checked") {
    const auto ds = data::make_toy_dataset(30, 16, 2);
    const std::vector<std::size_t> counts{10, 5, 15};
    const auto a = data::split_dataset(ds, counts, 9);
    const auto b = data::split_dataset(ds, counts, 9);
    REQUIRE(a.size() == 3);
    std::set<std::string> ids;
    for (std::size_t p = 0; p < 3; ++p) {
        CHECK(a[p].size() == counts[p]);
        for (std::size_t i = 0; i < a[p].size(); ++i) {
            CHECK(a[p].samples[i].id == b[p].samples[i].id);
            ids.insert(a[p].samples[i].id);
        }
    }
    CHECK(ids.size() == 30);
    const std::vector<std::size_t> too_many{31};
    CHECK_THROWS_AS(data::split_dataset(ds, too_many, 0), Error);
}

TEST_CASE("assemble_dataset validates resolution and ids") {
    auto ds = data::make_toy_dataset(3, 16, 1);
    CHECK(data::assemble_dataset(ds.samples, 16).size() == 3);
    CHECK_THROWS_AS(data::assemble_dataset(ds.samples, 32), Error);
    auto dup = ds.samples;
    dup[1].id = dup[0].id;
    CHECK_THROWS_AS(data::assemble_dataset(dup, 16), Error);
    CHECK_THROWS_AS(data::assemble_dataset({}, 16), Error);
}
