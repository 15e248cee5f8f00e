#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qnerf/metrics.hpp"
#include "test_util.hpp"

using namespace qnerf;
using namespace qnerf::metrics;

namespace {

img::Image textured(int w, int h, uint64_t seed) {
    img::Image im(w, h);
    Rng rng(seed);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                im.at(x, y, c) =
                    0.5 + 0.3 * std::sin(0.9 * x + 1.3 * c) * std::cos(0.7 * y) +
                    0.1 * rng.uniform(-1, 1);
    for (double& v : im.rgb) v = std::clamp(v, 0.0, 1.0);
    return im;
}

// Direct per-window SSIM, no separable filtering: the independent oracle.
double ssim_bruteforce(const img::Image& a, const img::Image& b) {
    const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
    double kernel[11][11];
    double ksum = 0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            const double dx = i - 5.0, dy = j - 5.0;
            kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            ksum += kernel[i][j];
        }
    for (auto& row : kernel)
        for (double& v : row) v /= ksum;

    double total = 0;
    int count = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y + 11 <= a.height; ++y)
            for (int x = 0; x + 11 <= a.width; ++x) {
                double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
                for (int i = 0; i < 11; ++i)
                    for (int j = 0; j < 11; ++j) {
                        const double va = a.at(x + j, y + i, c);
                        const double vb = b.at(x + j, y + i, c);
                        ma += kernel[i][j] * va;
                        mb += kernel[i][j] * vb;
                        maa += kernel[i][j] * va * va;
                        mbb += kernel[i][j] * vb * vb;
                        mab += kernel[i][j] * va * vb;
                    }
                const double vara = maa - ma * ma, varb = mbb - mb * mb, cov = mab - ma * mb;
                total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                         ((ma * ma + mb * mb + c1) * (vara + varb + c2));
                ++count;
            }
    return total / count;
}

double psnr_bruteforce(const img::Image& a, const img::Image& b) {
    double acc = 0;
    int n = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const double d = a.at(x, y, c) - b.at(x, y, c);
                acc += d * d;
                ++n;
            }
    return 10.0 * std::log10(double(n) / acc);
}

}  // namespace

TEST_CASE("psnr: identity sentinel, exact formula cases") {
    auto im = textured(16, 12, 3);
    CHECK(std::isinf(psnr(im, im)));

    // MSE exactly 0.1: all-zero vs all-sqrt(0.1).
    img::Image a(8, 8), b(8, 8);
    for (double& v : b.rgb) v = std::sqrt(0.1);
    CHECK(psnr(a, b) == doctest::Approx(10.0).epsilon(1e-12));

    img::Image ones(8, 8);
    for (double& v : ones.rgb) v = 1.0;
    CHECK(psnr(a, ones) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("psnr and ssim agree with independent brute-force reimplementations") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        auto a = textured(20, 16, 100 + uint64_t(trial));
        auto b = textured(20, 16, 200 + uint64_t(trial));
        CHECK(psnr(a, b) == doctest::Approx(psnr_bruteforce(a, b)).epsilon(1e-9));
        CHECK(ssim(a, b) == doctest::Approx(ssim_bruteforce(a, b)).epsilon(1e-6));
    }
}

TEST_CASE("ssim: identity, inversion, symmetry") {
    auto a = textured(24, 18, 5);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    img::Image inv = a;
    for (double& v : inv.rgb) v = 1.0 - v;
    CHECK(ssim(a, inv) < 0.5);

    auto b = textured(24, 18, 6);
    CHECK(std::abs(ssim(a, b) - ssim(b, a)) < 1e-12);
}

TEST_CASE("rgb_to_hsv: hue origin, achromatic gray, round trip") {
    auto red = rgb_to_hsv(1, 0, 0);
    CHECK(red[0] == doctest::Approx(0.0));
    CHECK(red[1] == doctest::Approx(255.0));
    CHECK(red[2] == doctest::Approx(255.0));

    auto gray = rgb_to_hsv(0.5, 0.5, 0.5);
    CHECK(gray[1] == doctest::Approx(0.0));

    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const double r = rng.uniform(), g = rng.uniform(), b = rng.uniform();
        auto hsv = rgb_to_hsv(r, g, b);
        auto rgb = hsv_to_rgb(hsv[0], hsv[1], hsv[2]);
        CHECK(std::abs(rgb[0] - r) < 1e-6);
        CHECK(std::abs(rgb[1] - g) < 1e-6);
        CHECK(std::abs(rgb[2] - b) < 1e-6);
    }
}

TEST_CASE("ks_two_sample: trivial statistics and symmetry") {
    std::vector<double> a{0.1, 0.5, 0.9, 0.3, 0.7};
    auto same = ks_two_sample(a, a);
    CHECK(same.statistic == doctest::Approx(0.0));
    CHECK(same.p_value == doctest::Approx(1.0));

    std::vector<double> zeros(50, 0.0), ones(50, 1.0);
    auto disjoint = ks_two_sample(zeros, ones);
    CHECK(disjoint.statistic == doctest::Approx(1.0));
    CHECK(disjoint.p_value < 1e-5);

    Rng rng(3);
    std::vector<double> b(40);
    for (auto& v : b) v = rng.uniform();
    auto ab = ks_two_sample(a, b);
    auto ba = ks_two_sample(b, a);
    CHECK(ab.statistic == doctest::Approx(ba.statistic).epsilon(1e-12));
    CHECK(ab.statistic >= 0.0);
    CHECK(ab.statistic <= 1.0);
}

TEST_CASE("hsv_ks_report reproduces the published line format") {
    auto gt = textured(36, 24, 21);
    auto rendered = textured(36, 24, 22);
    auto text = hsv_ks_report(gt, rendered, "GT", "classical");
    CHECK(text.find("hue:") != std::string::npos);
    CHECK(text.find("saturation:") != std::string::npos);
    CHECK(text.find("value:") != std::string::npos);
    CHECK(text.find("GT vs. classical (KS = 0.") != std::string::npos);
    const bool has_p = text.find("p = ") != std::string::npos ||
                       text.find("p < 10^-") != std::string::npos;
    CHECK(has_p);
}

TEST_CASE("format_p_value matches the appendix convention") {
    CHECK(format_p_value(3e-6) == "p < 10^-5");
    CHECK(format_p_value(1e-7) == "p < 10^-6");
    CHECK(format_p_value(0.4135) == "p = 0.4135");
}

TEST_CASE("metric report: mean equals the arithmetic mean of rows; CSV layout") {
    auto report = MetricReport::from_views({{0, 20.0, 0.8}, {1, 30.0, 0.9}, {2, 25.0, 0.7}});
    CHECK(report.mean_psnr == doctest::Approx(25.0));
    CHECK(report.mean_ssim == doctest::Approx(0.8));
    auto csv = report_csv(report);
    CHECK(csv.find("view,psnr,ssim") == 0);
    CHECK(csv.find("mean,") != std::string::npos);

    auto table = report_table({{"1L+2S", 1, 8, 491, 30.74, 0.94}});
    CHECK(table.find("config") != std::string::npos);
    CHECK(table.find("1L+2S") != std::string::npos);
    CHECK(table.find("491") != std::string::npos);
}
