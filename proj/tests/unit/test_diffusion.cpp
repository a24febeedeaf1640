#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "polypgen/diffusion/process.hpp"

using namespace polypgen;
using namespace polypgen::diffusion;

namespace {

DiffusionConfig cosine(int T) {
    DiffusionConfig c;
    c.timesteps = T;
    return c;
}

void check_rel(double got, double want, double tol) {
    const double scale = std::max(std::abs(want), 1e-300);
    CHECK_MESSAGE(std::abs(got - want) / scale <= tol, "got " << got << " want " << want);
}

// ε̂ = k·x_t for a fixed k; cheap, deterministic, exercises conditioning paths.
class LinearPredictor final : public NoisePredictor {
public:
    explicit LinearPredictor(double k, bool cond = false) : k_(k), cond_(cond) {}
    bool conditional() const override { return cond_; }
    std::vector<ImageTensor> predict(std::span<const ImageTensor> x_t, int t,
                                     std::span<const ImageTensor> conds) const override {
        std::vector<ImageTensor> out;
        for (std::size_t i = 0; i < x_t.size(); ++i) {
            ImageTensor e = x_t[i];
            for (std::size_t j = 0; j < e.size(); ++j) {
                double c = conds.empty() ? 0.0 : conds[i].data[j % conds[i].size()];
                e.data[j] = k_ * e.data[j] + 0.1 * c + 1e-4 * t;
            }
            out.push_back(std::move(e));
        }
        return out;
    }

private:
    double k_;
    bool cond_;
};

}  // namespace

TEST_CASE("cosine schedule matches high-precision reference values") {
    // 40-digit evaluation of the clipped cosine schedule, s = 0.008.
    struct Row {
        int t;
        double beta, alpha_bar, post_var;
    };
    const Row t1000[] = {
        {1, 4.1284224821777802353e-5, 0.9999587157751782222, 0.0},
        {2, 4.6141752736694508433e-5, 0.99991257592736802134, 2.1789496145662040647e-5},
        {250, 0.0013214966366291508494, 0.84701216132690473446, 0.001311815214441575908},
        {500, 0.0031458862304781963534, 0.49384359044063771332, 0.0031361999040579382786},
        {999, 0.74999939290116202778, 2.428766907034468356e-6, 0.74999392818446614338},
        {1000, 0.999, 2.428766907034468356e-9, 0.99899757608819212558},
    };
    const auto s = make_schedule(cosine(1000));
    REQUIRE(s.timesteps == 1000);
    REQUIRE(s.alpha_bar.size() == 1001);
    CHECK(s.alpha_bar[0] == 1.0);
    CHECK(s.beta[0] == 0.0);
    for (const auto& r : t1000) {
        CAPTURE(r.t);
        check_rel(s.beta[r.t], r.beta, 1e-10);
        check_rel(s.alpha_bar[r.t], r.alpha_bar, 1e-10);
        if (r.post_var == 0.0)
            CHECK(s.posterior_var[r.t] == 0.0);
        else
            check_rel(s.posterior_var[r.t], r.post_var, 1e-10);
    }

    const Row t200[] = {
        {1, 2.5497263637203033873e-4, 0.99974502736362796966, 0.0},
        {100, 0.015534553096115906223, 0.49384359044063771332, 0.015295385834735237743},
        {200, 0.999, 6.0717993085493313092e-8, 0.99893940337850337934},
    };
    const auto s2 = make_schedule(cosine(200));
    for (const auto& r : t200) {
        CAPTURE(r.t);
        check_rel(s2.beta[r.t], r.beta, 1e-10);
        check_rel(s2.alpha_bar[r.t], r.alpha_bar, 1e-10);
        if (r.post_var == 0.0)
            CHECK(s2.posterior_var[r.t] == 0.0);
        else
            check_rel(s2.posterior_var[r.t], r.post_var, 1e-10);
    }
}

TEST_CASE("schedule invariants hold for both kinds and several lengths") {
    for (auto kind : {ScheduleKind::cosine, ScheduleKind::linear}) {
        for (int T : {2, 3, 10, 200, 1000}) {
            DiffusionConfig c;
            c.schedule_kind = kind;
            c.timesteps = T;
            const auto s = make_schedule(c);
            CAPTURE(T);
            for (int t = 1; t <= T; ++t) {
                CHECK(s.beta[t] > 0.0);
                CHECK(s.beta[t] <= c.beta_max);
                CHECK(s.alpha[t] == doctest::Approx(1.0 - s.beta[t]).epsilon(1e-15));
                CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
                CHECK(s.alpha_bar[t] > 0.0);
                CHECK(s.posterior_var[t] >= 0.0);
                CHECK(s.posterior_var[t] <= s.beta[t] + 1e-15);
            }
        }
    }
}

TEST_CASE("linear schedule endpoints and product form") {
    DiffusionConfig c;
    c.schedule_kind = ScheduleKind::linear;
    c.timesteps = 1000;
    const auto s = make_schedule(c);
    CHECK(s.beta[1] == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(s.beta[1000] == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(s.beta[500] == doctest::Approx(1e-4 + (0.02 - 1e-4) * 499.0 / 999.0).epsilon(1e-12));
    double prod = 1.0;
    for (int t = 1; t <= 1000; ++t) prod *= 1.0 - s.beta[t];
    CHECK(s.alpha_bar[1000] == doctest::Approx(prod).epsilon(1e-12));
}

TEST_CASE("schedule rejects fewer than two steps and bad parameters") {
    for (int T : {-1, 0, 1}) CHECK_THROWS_AS(make_schedule(cosine(T)), Error);
    auto c = cosine(100);
    c.beta_max = 1.5;
    CHECK_THROWS_AS(make_schedule(c), Error);
}

TEST_CASE("fingerprint is stable and separates configs") {
    const auto a = cosine(200), b = cosine(200);
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.fingerprint().size() == 64);
    auto c = a;
    c.timesteps = 201;
    CHECK(c.fingerprint() != a.fingerprint());
    auto d = a;
    d.conditioning = Conditioning::mask_concat;
    CHECK(d.fingerprint() != a.fingerprint());
    auto e = a;
    e.schedule_kind = ScheduleKind::linear;
    CHECK(e.fingerprint() != a.fingerprint());
    for (auto k : {ScheduleKind::linear, ScheduleKind::cosine}) CHECK(parse_schedule_kind(schedule_kind_name(k)) == k);
    for (auto k : {Conditioning::none, Conditioning::mask_concat}) CHECK(parse_conditioning(conditioning_name(k)) == k);
    CHECK_THROWS_AS(parse_schedule_kind("quadratic"), Error);
}

TEST_CASE("q_sample closed form, t = 0 identity and x0 recovery") {
    const auto s = make_schedule(cosine(200));
    std::mt19937_64 rng(5);
    const auto x0 = testutil::random_image(3, 6, 5, rng);
    const auto eps = testutil::random_image(3, 6, 5, rng, -2.0, 2.0);

    CHECK(q_sample(x0, 0, eps, s) == x0);

    for (int t : {1, 37, 100, 199, 200}) {
        CAPTURE(t);
        const auto xt = q_sample(x0, t, eps, s);
        const double a = std::sqrt(s.alpha_bar[t]), b = std::sqrt(1.0 - s.alpha_bar[t]);
        for (std::size_t i = 0; i < xt.size(); ++i) CHECK(xt.data[i] == doctest::Approx(a * x0.data[i] + b * eps.data[i]));
        const auto back = predict_x0_from_eps(xt, t, eps, s, false);
        double worst = 0.0;
        for (std::size_t i = 0; i < back.size(); ++i) worst = std::max(worst, std::abs(back.data[i] - x0.data[i]));
        CHECK(worst < (t == 200 ? 1e-4 : 1e-9));
    }

    ImageTensor wrong(1, 6, 5);
    CHECK_THROWS_AS(q_sample(x0, 10, wrong, s), Error);
    CHECK_THROWS_AS(q_sample(x0, 201, eps, s), Error);
}

TEST_CASE("predict_x0 clamps into the data range") {
    const auto s = make_schedule(cosine(200));
    ImageTensor xt(1, 2, 2, 3.0), eps(1, 2, 2, -3.0);
    const auto x0 = predict_x0_from_eps(xt, 150, eps, s);
    for (double v : x0.data) CHECK(v == 1.0);
    const auto raw = predict_x0_from_eps(xt, 150, eps, s, false);
    for (double v : raw.data) CHECK(v > 1.0);
}

TEST_CASE("posterior coefficients match the closed form") {
    const auto s = make_schedule(cosine(200));
    for (int t : {1, 2, 50, 200}) {
        const auto c = posterior_coeffs(t, s);
        const double ab = s.alpha_bar[t], abp = s.alpha_bar[t - 1];
        CHECK(c.x0 == doctest::Approx(s.beta[t] * std::sqrt(abp) / (1.0 - ab)).epsilon(1e-12));
        CHECK(c.xt == doctest::Approx((1.0 - abp) * std::sqrt(s.alpha[t]) / (1.0 - ab)).epsilon(1e-12));
    }
    // t = 1: the mean is exactly x0.
    const auto c1 = posterior_coeffs(1, s);
    CHECK(c1.x0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c1.xt == doctest::Approx(0.0));
}

TEST_CASE("p_sample_step at t = 1 is noise free") {
    const auto s = make_schedule(cosine(50));
    LinearPredictor m(0.3);
    std::mt19937_64 rng(1);
    const auto xt = testutil::random_image(1, 4, 4, rng);
    Rng r1(10), r2(99);
    const auto a = p_sample_step(m, xt, 1, nullptr, s, r1);
    const auto b = p_sample_step(m, xt, 1, nullptr, s, r2);
    CHECK(a == b);
    const auto eps = m.predict_one(xt, 1, nullptr);
    const auto expect = posterior_mean(predict_x0_from_eps(xt, 1, eps, s), xt, 1, s);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data[i] == doctest::Approx(expect.data[i]).epsilon(1e-12));
}

TEST_CASE("sampling is deterministic, bounded, and batch equals single") {
    const auto s = make_schedule(cosine(30));
    LinearPredictor m(0.5);
    Rng a(7), b(7);
    const auto x = sample_loop(m, 2, 5, 4, nullptr, s, a);
    const auto y = sample_loop(m, 2, 5, 4, nullptr, s, b);
    CHECK(x == y);
    for (double v : x.data) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    Rng c(8);
    CHECK(sample_loop(m, 2, 5, 4, nullptr, s, c) != x);

    std::vector<Rng> rngs{Rng(7), Rng(8), Rng(9)};
    const auto batch = sample_loop_batch(m, 2, 5, 4, {}, rngs, s);
    REQUIRE(batch.size() == 3);
    CHECK(batch[0] == x);
    for (std::uint64_t k = 8; k <= 9; ++k) {
        Rng r(k);
        CHECK(batch[k - 7] == sample_loop(m, 2, 5, 4, nullptr, s, r));
    }
}

TEST_CASE("conditional batch sampling pairs each item with its condition") {
    const auto s = make_schedule(cosine(20));
    LinearPredictor m(0.2, true);
    std::mt19937_64 g(3);
    std::vector<ImageTensor> conds{testutil::random_image(1, 4, 4, g), testutil::random_image(1, 4, 4, g)};
    std::vector<Rng> rngs{Rng(1), Rng(2)};
    const auto batch = sample_loop_batch(m, 3, 4, 4, conds, rngs, s);
    for (std::size_t i = 0; i < 2; ++i) {
        Rng r(i + 1);
        CHECK(batch[i] == sample_loop(m, 3, 4, 4, &conds[i], s, r));
    }

    Rng r(0);
    CHECK_THROWS_AS(sample_loop(m, 3, 4, 4, nullptr, s, r), Error);
    LinearPredictor u(0.2);
    CHECK_THROWS_AS(sample_loop(u, 3, 4, 4, &conds[0], s, r), Error);
    std::vector<Rng> three{Rng(1), Rng(2), Rng(3)};
    CHECK_THROWS_AS(sample_loop_batch(m, 3, 4, 4, conds, three, s), Error);
}

TEST_CASE("training loss of the zero predictor is the noise energy") {
    const auto s = make_schedule(cosine(100));
    LinearPredictor zero(0.0);
    std::mt19937_64 g(11);
    const auto x0 = testutil::random_image(1, 4, 4, g);
    const auto noise = testutil::random_image(1, 4, 4, g);
    double e = 0.0;
    for (double v : noise.data) e += (v - 1e-4 * 40) * (v - 1e-4 * 40);
    CHECK(training_loss(zero, x0, nullptr, 40, noise, s) == doctest::Approx(e / 16.0).epsilon(1e-12));
}

TEST_CASE("standard_normal draws exactly c*h*w values with unit moments") {
    Rng a(42), b(42);
    const auto t = standard_normal(2, 100, 100, a);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 20000; ++i) n(b);
    // Same generator state afterwards.
    CHECK(a() == b());
    double m = 0, v = 0;
    for (double x : t.data) m += x;
    m /= t.size();
    for (double x : t.data) v += (x - m) * (x - m);
    v /= t.size();
    CHECK(std::abs(m) < 0.03);
    CHECK(std::abs(v - 1.0) < 0.03);
}
