#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qnerf/sampling.hpp"
#include "test_util.hpp"

using namespace qnerf;
using namespace qnerf::sampling;

namespace {
Ray make_ray(double near = 0.1, double far = 8.0) {
    Ray r;
    r.origin = {0, 0, 0};
    r.dir = {0, 0, 1};
    r.near = near;
    r.far = far;
    return r;
}
}  // namespace

TEST_CASE("piecewise_sample: short rays collapse to uniform spacing") {
    auto s = piecewise_sample(make_ray(0.2, 1.0), 16);
    REQUIRE(s.t.size() == 16);
    const double step = s.t[1] - s.t[0];
    for (std::size_t i = 1; i + 1 < s.t.size(); ++i)
        CHECK(s.t[i + 1] - s.t[i] == doctest::Approx(step).epsilon(1e-12));
}

TEST_CASE("piecewise_sample: far-half step ratios share one geometric factor") {
    auto s = piecewise_sample(make_ray(0.1, 20.0), 64);
    const int half = 32;
    std::vector<double> steps;
    for (int i = half; i + 1 < 64; ++i) steps.push_back(s.t[std::size_t(i + 1)] - s.t[std::size_t(i)]);
    const double ratio0 = steps[1] / steps[0];
    CHECK(ratio0 > 1.0);
    for (std::size_t i = 1; i + 1 < steps.size(); ++i)
        CHECK(std::abs(steps[i + 1] / steps[i] - ratio0) < 1e-9);
    CHECK(s.t.back() == doctest::Approx(20.0));
}

TEST_CASE("piecewise_sample: 256 strictly increasing samples spanning [near, far]") {
    auto s = piecewise_sample(make_ray(0.05, 50.0), 256);
    REQUIRE(s.t.size() == 256);
    CHECK(s.t.front() == doctest::Approx(0.05));
    CHECK(s.t.back() == doctest::Approx(50.0));
    for (std::size_t i = 0; i + 1 < s.t.size(); ++i) CHECK(s.t[i] < s.t[i + 1]);
    for (double v : s.t) {
        CHECK(v >= 0.05);
        CHECK(v <= 50.0);
    }
}

TEST_CASE("piecewise_sample: degenerate rays are rejected") {
    Ray bad = make_ray();
    bad.far = bad.near;
    CHECK_THROWS_AS(piecewise_sample(bad, 8), InvalidRay);
    Ray unnorm = make_ray();
    unnorm.dir = {0, 0, 2};
    CHECK_THROWS_AS(piecewise_sample(unnorm, 8), InvalidRay);
    CHECK_THROWS_AS(piecewise_sample(make_ray(), 7), InvalidRay);
}

TEST_CASE("piecewise_sample: jittered samples stay sorted within the span") {
    Rng rng(8);
    auto s = piecewise_sample(make_ray(0.1, 12.0), 64, &rng);
    for (std::size_t i = 0; i + 1 < s.t.size(); ++i) CHECK(s.t[i] <= s.t[i + 1]);
    CHECK(s.t.front() >= 0.1);
    CHECK(s.t.back() <= 12.0);
}

TEST_CASE("proposal_weights: zero density, closed-form single sample, nonnegativity") {
    std::vector<double> z(5, 0.0), d(5, 0.3);
    for (double w : proposal_weights(z, d)) CHECK(w == 0.0);

    // sigma * delta = ln 2: renderer form 1/2, appendix form sigma/2.
    const double sigma = 3.7, delta = std::log(2.0) / sigma;
    auto wr = proposal_weights({sigma}, {delta});
    CHECK(wr[0] == doctest::Approx(0.5).epsilon(1e-12));
    auto wa = proposal_weights_sigma_form({sigma}, {delta});
    CHECK(wa[0] == doctest::Approx(0.5 * sigma).epsilon(1e-12));

    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> sig(16), del(16);
        for (auto& v : sig) v = rng.uniform(0, 5);
        for (auto& v : del) v = rng.uniform(0.01, 0.5);
        for (double w : proposal_weights(sig, del)) CHECK(w >= 0.0);
    }
    CHECK_THROWS_AS(proposal_weights({-1.0}, {0.1}), InvalidDensity);
}

TEST_CASE("resample_pdf: uniform weights stay near-uniform (KS < 0.05 at n = 96)") {
    auto prev = piecewise_sample(make_ray(0.0, 1.0), 32);
    std::vector<double> w(32, 1.0);
    auto next = resample_pdf(prev, w, 96);
    REQUIRE(next.t.size() == 96);
    double ks = 0;
    for (std::size_t i = 0; i < next.t.size(); ++i) {
        const double u = next.t[i];  // already in [0,1]
        ks = std::max(ks, std::abs(u - double(i) / 96.0));
        ks = std::max(ks, std::abs(u - double(i + 1) / 96.0));
    }
    CHECK(ks < 0.05);
}

TEST_CASE("resample_pdf: delta-like weights land every sample in the peaked bin") {
    auto prev = piecewise_sample(make_ray(0.0, 10.0), 16);
    std::vector<double> w(16, 0.0);
    w[9] = 5.0;
    auto next = resample_pdf(prev, w, 24);
    const double lo = prev.t[9];
    const double hi = prev.t[10];
    for (double v : next.t) {
        CHECK(v >= lo);
        CHECK(v <= hi);
    }
}

TEST_CASE("resample_pdf: sorted outputs inside [near,far]; zero weights fall back to uniform") {
    Rng rng(66);
    auto prev = piecewise_sample(make_ray(0.5, 6.0), 32, &rng);
    std::vector<double> w(32);
    for (auto& v : w) v = rng.uniform(0, 1);
    auto next = resample_pdf(prev, w, 48, &rng);
    for (std::size_t i = 0; i + 1 < next.t.size(); ++i) CHECK(next.t[i] <= next.t[i + 1]);
    CHECK(next.t.front() >= 0.5);
    CHECK(next.t.back() <= 6.0);

    std::vector<double> zeros(32, 0.0);
    auto fallback = resample_pdf(prev, zeros, 8);
    CHECK(fallback.t.size() == 8);
    CHECK(fallback.t.front() >= 0.5);
    CHECK(fallback.t.back() <= 6.0);
    // Spread across the whole span rather than collapsing.
    CHECK(fallback.t.back() - fallback.t.front() > 0.5 * (6.0 - 0.5));
}

TEST_CASE("anneal_weights: identity after warmup, flat at step 0, order preserving") {
    std::vector<double> w{0.1, 0.7, 0.3, 0.0};
    auto after = anneal_weights(w, 1000, 10.0, 1000);
    CHECK(after == w);

    auto flat = anneal_weights(w, 0, 10.0, 1000);
    CHECK(flat[0] == doctest::Approx(1.0));
    CHECK(flat[1] == doctest::Approx(1.0));
    CHECK(flat[2] == doctest::Approx(1.0));
    CHECK(flat[3] == 0.0);  // zero mass stays zero

    auto mid = anneal_weights(w, 250, 10.0, 1000);
    CHECK(mid[0] < mid[2]);
    CHECK(mid[2] < mid[1]);

    CHECK(anneal_exponent(500, 10.0, 1000) > anneal_exponent(100, 10.0, 1000));
    CHECK(anneal_exponent(2000, 10.0, 1000) == 1.0);
}

TEST_CASE("hierarchical chain keeps the resampled cascade inside [near, far]") {
    Rng rng(7);
    auto stage0 = piecewise_sample(make_ray(0.2, 15.0), 256, &rng);
    std::vector<double> sig(256), del = stage0.deltas();
    for (auto& v : sig) v = rng.uniform(0, 2);
    auto w0 = proposal_weights(sig, del);
    auto w0a = anneal_weights(w0, 400, 10.0, 1000);
    auto stage1 = resample_pdf(stage0, w0a, 96, &rng);
    CHECK(stage1.t.size() == 96);

    std::vector<double> sig1(96), del1 = stage1.deltas();
    for (auto& v : sig1) v = rng.uniform(0, 2);
    auto w1 = proposal_weights(sig1, del1);
    auto stage2 = resample_pdf(stage1, w1, 48, &rng);
    CHECK(stage2.t.size() == 48);
    for (double v : stage2.t) {
        CHECK(v >= 0.2);
        CHECK(v <= 15.0);
    }
}

TEST_CASE("sampling cascade is bit-exactly reproducible under a fixed seed") {
    auto run = [] {
        Rng rng(99);
        auto s0 = piecewise_sample(make_ray(0.1, 9.0), 64, &rng);
        std::vector<double> sig(64);
        for (auto& v : sig) v = rng.uniform(0, 3);
        auto w = proposal_weights(sig, s0.deltas());
        return resample_pdf(s0, w, 32, &rng).t;
    };
    CHECK(run() == run());
}
