#include "qnerf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qnerf::metrics {

double psnr(const img::Image& a, const img::Image& b) {
    if (a.width != b.width || a.height != b.height) throw ShapeError("psnr: size mismatch");
    double mse = 0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        const double d = a.rgb[i] - b.rgb[i];
        mse += d * d;
    }
    mse /= double(a.rgb.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWin = 11;

const std::array<double, kWin>& gaussian_kernel() {
    static const std::array<double, kWin> k = [] {
        std::array<double, kWin> out{};
        const double sigma = 1.5;
        double total = 0;
        for (int i = 0; i < kWin; ++i) {
            const double x = i - (kWin - 1) / 2.0;
            out[std::size_t(i)] = std::exp(-x * x / (2 * sigma * sigma));
            total += out[std::size_t(i)];
        }
        for (double& v : out) v /= total;
        return out;
    }();
    return k;
}

// Separable valid-region Gaussian filter of one channel.
std::vector<double> blur_valid(const std::vector<double>& chan, int w, int h, int& ow, int& oh) {
    const auto& k = gaussian_kernel();
    ow = w - kWin + 1;
    oh = h - kWin + 1;
    std::vector<double> tmp(std::size_t(ow) * std::size_t(h), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int i = 0; i < kWin; ++i) acc += k[std::size_t(i)] * chan[std::size_t(y) * w + x + i];
            tmp[std::size_t(y) * ow + x] = acc;
        }
    std::vector<double> out(std::size_t(ow) * std::size_t(oh), 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int i = 0; i < kWin; ++i) acc += k[std::size_t(i)] * tmp[std::size_t(y + i) * ow + x];
            out[std::size_t(y) * ow + x] = acc;
        }
    return out;
}

}  // namespace

double ssim(const img::Image& a, const img::Image& b) {
    if (a.width != b.width || a.height != b.height) throw ShapeError("ssim: size mismatch");
    if (a.width < kWin || a.height < kWin) throw ShapeError("ssim: image smaller than the window");
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

    double total = 0;
    for (int c = 0; c < 3; ++c) {
        const std::size_t n = std::size_t(a.width) * std::size_t(a.height);
        std::vector<double> xa(n), xb(n), xaa(n), xbb(n), xab(n);
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < a.width; ++x) {
                const std::size_t i = std::size_t(y) * a.width + x;
                const double va = a.at(x, y, c), vb = b.at(x, y, c);
                xa[i] = va;
                xb[i] = vb;
                xaa[i] = va * va;
                xbb[i] = vb * vb;
                xab[i] = va * vb;
            }
        int ow = 0, oh = 0;
        auto mu_a = blur_valid(xa, a.width, a.height, ow, oh);
        auto mu_b = blur_valid(xb, a.width, a.height, ow, oh);
        auto m_aa = blur_valid(xaa, a.width, a.height, ow, oh);
        auto m_bb = blur_valid(xbb, a.width, a.height, ow, oh);
        auto m_ab = blur_valid(xab, a.width, a.height, ow, oh);
        double acc = 0;
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double va = m_aa[i] - mu_a[i] * mu_a[i];
            const double vb = m_bb[i] - mu_b[i] * mu_b[i];
            const double cov = m_ab[i] - mu_a[i] * mu_b[i];
            acc += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
                   ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
        }
        total += acc / double(mu_a.size());
    }
    return total / 3.0;
}

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    double h = 0;
    if (delta > 0) {
        if (mx == r)
            h = std::fmod((g - b) / delta, 6.0);
        else if (mx == g)
            h = (b - r) / delta + 2.0;
        else
            h = (r - g) / delta + 4.0;
        h *= 60.0;
        if (h < 0) h += 360.0;
    }
    const double s = mx > 0 ? delta / mx : 0.0;
    return {h / 360.0 * 255.0, s * 255.0, mx * 255.0};
}

std::array<double, 3> hsv_to_rgb(double h255, double s255, double v255) {
    const double h = h255 / 255.0 * 360.0;
    const double s = s255 / 255.0;
    const double v = v255 / 255.0;
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) {
        r = c; g = x;
    } else if (hp < 2) {
        r = x; g = c;
    } else if (hp < 3) {
        g = c; b = x;
    } else if (hp < 4) {
        g = x; b = c;
    } else if (hp < 5) {
        r = x; b = c;
    } else {
        r = c; b = x;
    }
    const double m = v - c;
    return {r + m, g + m, b + m};
}

KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw ShapeError("ks_two_sample: empty sample");
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());

    double d = 0;
    std::size_t ia = 0, ib = 0;
    while (ia < sa.size() && ib < sb.size()) {
        const double va = sa[ia], vb = sb[ib];
        if (va <= vb) ++ia;
        if (vb <= va) ++ib;
        d = std::max(d, std::abs(double(ia) / sa.size() - double(ib) / sb.size()));
    }

    // Asymptotic Kolmogorov tail with the finite-size correction.
    const double ne = double(sa.size()) * double(sb.size()) / double(sa.size() + sb.size());
    const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
    double p = 0;
    if (lambda < 1e-9) {
        p = 1.0;
    } else {
        double sign = 1.0;
        for (int j = 1; j <= 100; ++j) {
            const double term = sign * 2.0 * std::exp(-2.0 * j * j * lambda * lambda);
            p += term;
            sign = -sign;
            if (std::abs(term) < 1e-12) break;
        }
        p = std::clamp(p, 0.0, 1.0);
    }
    return {d, p};
}

std::string format_p_value(double p) {
    std::ostringstream os;
    if (p < 1e-3) {
        int k = 3;
        while (k < 16 && p < std::pow(10.0, -(k + 1))) ++k;
        os << "p < 10^-" << k;
    } else {
        os.precision(4);
        os << "p = " << std::fixed << p;
    }
    return os.str();
}

namespace {

void hsv_channels(const img::Image& image, std::vector<double>& h, std::vector<double>& s,
                  std::vector<double>& v) {
    const std::size_t n = std::size_t(image.width) * std::size_t(image.height);
    h.reserve(n);
    s.reserve(n);
    v.reserve(n);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            auto hsv = rgb_to_hsv(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2));
            h.push_back(hsv[0]);
            s.push_back(hsv[1]);
            v.push_back(hsv[2]);
        }
}

std::vector<double> histogram32(const std::vector<double>& xs) {
    std::vector<double> bins(32, 0.0);
    for (double x : xs) {
        int b = int(std::floor(x / 256.0 * 32.0));
        b = std::clamp(b, 0, 31);
        bins[std::size_t(b)] += 1.0;
    }
    return bins;
}

}  // namespace

HsvStats hsv_compare(const img::Image& reference, const img::Image& rendered) {
    std::vector<double> ha, sa, va, hb, sb, vb;
    hsv_channels(reference, ha, sa, va);
    hsv_channels(rendered, hb, sb, vb);
    HsvStats stats;
    stats.hue = {histogram32(hb), ks_two_sample(ha, hb)};
    stats.saturation = {histogram32(sb), ks_two_sample(sa, sb)};
    stats.value = {histogram32(vb), ks_two_sample(va, vb)};
    return stats;
}

std::string hsv_ks_report(const img::Image& reference, const img::Image& rendered,
                          const std::string& label_a, const std::string& label_b) {
    auto stats = hsv_compare(reference, rendered);
    std::ostringstream os;
    os << "HSV channel comparison (Kolmogorov-Smirnov two-sample)\n";
    auto line = [&](const char* name, const HsvChannelStats& c) {
        os << name << " " << label_a << " vs. " << label_b << " (KS = " << std::fixed;
        os.precision(4);
        os << c.ks.statistic << ", " << format_p_value(c.ks.p_value) << ")\n";
    };
    line("hue:       ", stats.hue);
    line("saturation:", stats.saturation);
    line("value:     ", stats.value);
    return os.str();
}

MetricReport MetricReport::from_views(std::vector<ViewMetrics> views) {
    MetricReport r;
    r.views = std::move(views);
    if (r.views.empty()) return r;
    for (const auto& v : r.views) {
        r.mean_psnr += v.psnr;
        r.mean_ssim += v.ssim;
    }
    r.mean_psnr /= double(r.views.size());
    r.mean_ssim /= double(r.views.size());
    return r;
}

std::string report_csv(const MetricReport& report) {
    std::ostringstream os;
    os << "view,psnr,ssim\n";
    os.precision(6);
    for (const auto& v : report.views)
        os << v.view << "," << std::fixed << v.psnr << "," << v.ssim << "\n";
    os << "mean," << std::fixed << report.mean_psnr << "," << report.mean_ssim << "\n";
    return os.str();
}

std::string report_table(const std::vector<TableRow>& rows) {
    std::ostringstream os;
    os << "config        layers  width  params    PSNR     SSIM\n";
    for (const auto& r : rows) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-13s %6d %6d %8lld %7.2f  %6.4f\n", r.config.c_str(),
                      r.layers, r.width, static_cast<long long>(r.params), r.psnr, r.ssim);
        os << buf;
    }
    return os.str();
}

}  // namespace qnerf::metrics
