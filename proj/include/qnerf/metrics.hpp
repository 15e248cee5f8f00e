#pragma once

#include <array>
#include <string>
#include <vector>

#include "qnerf/image.hpp"

namespace qnerf::metrics {

// 10 log10(1 / MSE) over all pixels and channels of [0,1] images;
// +infinity for identical inputs.
double psnr(const img::Image& a, const img::Image& b);

// Standard single-scale SSIM: 11x11 Gaussian window (sigma 1.5), k1 = 0.01,
// k2 = 0.03, dynamic range 1; averaged over the valid region and channels.
double ssim(const img::Image& a, const img::Image& b);

// Hexcone conversion with all three channels scaled to [0,255] to match the
// histogram axes used in the report.
std::array<double, 3> rgb_to_hsv(double r, double g, double b);
std::array<double, 3> hsv_to_rgb(double h255, double s255, double v255);

struct KsResult {
    double statistic = 0.0;  // sup |ECDF_a - ECDF_b|
    double p_value = 1.0;    // asymptotic Kolmogorov distribution
};

KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b);

// "p < 10^-5" below 1e-3, otherwise "p = 0.1234".
std::string format_p_value(double p);

struct HsvChannelStats {
    std::vector<double> histogram;  // 32 bins over [0,255], mass = pixel count
    KsResult ks;                    // against the reference image's channel
};

struct HsvStats {
    HsvChannelStats hue, saturation, value;
};

HsvStats hsv_compare(const img::Image& reference, const img::Image& rendered);

// Plain-text report in the published layout, one line per HSV channel:
//   hue:        GT vs. rendered (KS = 0.0342, p < 10^-5)
std::string hsv_ks_report(const img::Image& reference, const img::Image& rendered,
                          const std::string& label_a = "GT",
                          const std::string& label_b = "rendered");

struct ViewMetrics {
    int view = 0;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    std::vector<ViewMetrics> views;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;

    static MetricReport from_views(std::vector<ViewMetrics> views);
};

std::string report_csv(const MetricReport& report);

struct TableRow {
    std::string config;
    int layers = 0;
    int width = 0;
    int64_t params = 0;
    double psnr = 0.0;
    double ssim = 0.0;
};

// Plain-text table with the columns config / layers / width / params / PSNR / SSIM.
std::string report_table(const std::vector<TableRow>& rows);

}  // namespace qnerf::metrics
