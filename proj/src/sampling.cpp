#include "qnerf/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace qnerf::sampling {

void validate_ray(const Ray& ray) {
    for (double v : ray.origin)
        if (!std::isfinite(v)) throw InvalidRay("non-finite ray origin");
    double n2 = 0;
    for (double v : ray.dir) {
        if (!std::isfinite(v)) throw InvalidRay("non-finite ray direction");
        n2 += v * v;
    }
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-6) throw InvalidRay("ray direction must be unit");
    if (!(ray.near < ray.far)) throw InvalidRay("ray requires near < far");
}

std::vector<double> RaySampleSet::deltas() const {
    std::vector<double> d(t.size());
    for (std::size_t i = 0; i + 1 < t.size(); ++i) d[i] = t[i + 1] - t[i];
    if (!t.empty()) d.back() = far - t.back();
    return d;
}

std::vector<double> RaySampleSet::midpoints() const {
    std::vector<double> m(t.size());
    for (std::size_t i = 0; i + 1 < t.size(); ++i) m[i] = 0.5 * (t[i] + t[i + 1]);
    if (!t.empty()) m.back() = 0.5 * (t.back() + far);
    return m;
}

namespace {

// Smallest s >= 1 with sum_{k=1..m} s^k == target (target > m), by bisection.
double solve_geometric_factor(int m, double target) {
    auto total = [m](double s) {
        double acc = 0, p = 1;
        for (int k = 1; k <= m; ++k) {
            p *= s;
            acc += p;
        }
        return acc;
    };
    double lo = 1.0, hi = 2.0;
    while (total(hi) < target) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (total(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

RaySampleSet piecewise_sample(const Ray& ray, int n, Rng* jitter) {
    validate_ray(ray);
    if (n < 2 || n % 2 != 0) throw InvalidRay("sample count must be even and >= 2");

    RaySampleSet out;
    out.near = ray.near;
    out.far = ray.far;
    out.t.resize(std::size_t(n));

    const double uniform_end = std::min(ray.near + 1.0, ray.far);
    const int half = n / 2;
    const double d0 = (uniform_end - ray.near) / double(half);

    const bool collapsed = ray.far <= ray.near + 1.0 ||
                           (ray.far - uniform_end) <= d0 * double(half - 1);
    if (collapsed) {
        const double step = (ray.far - ray.near) / double(n);
        for (int i = 0; i < n; ++i) out.t[std::size_t(i)] = ray.near + step * i;
    } else {
        for (int i = 0; i < half; ++i) out.t[std::size_t(i)] = ray.near + d0 * i;
        // Far half starts on uniform_end and lands exactly on far.
        const double s = solve_geometric_factor(half - 1, (ray.far - uniform_end) / d0);
        double pos = uniform_end, step = d0;
        out.t[std::size_t(half)] = pos;
        for (int j = 1; j < half; ++j) {
            step *= s;
            pos += step;
            out.t[std::size_t(half + j)] = pos;
        }
        out.t.back() = ray.far;  // pin against accumulated round-off
    }

    if (jitter) out = jitter_samples(out, *jitter);
    return out;
}

RaySampleSet jitter_samples(const RaySampleSet& base, Rng& rng) {
    RaySampleSet out = base;
    for (std::size_t i = 0; i < base.t.size(); ++i) {
        const double hi = i + 1 < base.t.size() ? base.t[i + 1] : base.far;
        out.t[i] = base.t[i] + rng.uniform() * (hi - base.t[i]);
    }
    std::sort(out.t.begin(), out.t.end());
    return out;
}

namespace {

template <bool SigmaForm>
std::vector<double> weights_impl(const std::vector<double>& sigmas,
                                 const std::vector<double>& deltas) {
    if (sigmas.size() != deltas.size()) throw ShapeError("weights: length mismatch");
    std::vector<double> w(sigmas.size());
    double transmittance = 1.0;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        if (sigmas[i] < 0) throw InvalidDensity("negative density");
        if (deltas[i] < 0) throw InvalidDensity("negative interval");
        const double att = std::exp(-sigmas[i] * deltas[i]);
        w[i] = transmittance * (1.0 - att);
        if constexpr (SigmaForm) w[i] *= sigmas[i];
        transmittance *= att;
    }
    return w;
}

}  // namespace

std::vector<double> proposal_weights(const std::vector<double>& sigmas,
                                     const std::vector<double>& deltas) {
    return weights_impl<false>(sigmas, deltas);
}

std::vector<double> proposal_weights_sigma_form(const std::vector<double>& sigmas,
                                                const std::vector<double>& deltas) {
    return weights_impl<true>(sigmas, deltas);
}

RaySampleSet resample_pdf(const RaySampleSet& prev, const std::vector<double>& weights,
                          int n_next, Rng* jitter) {
    if (weights.size() != prev.t.size()) throw ShapeError("resample: weights/bins mismatch");
    if (n_next < 1) throw ShapeError("resample: n_next must be positive");

    std::vector<double> edges = prev.t;
    edges.push_back(prev.far);

    double total = 0;
    for (double w : weights) {
        if (w < 0) throw InvalidDensity("negative weight");
        total += w;
    }

    const std::size_t bins = weights.size();
    std::vector<double> cdf(bins + 1, 0.0);
    if (total <= 0) {
        for (std::size_t i = 0; i <= bins; ++i) cdf[i] = double(i) / double(bins);
    } else {
        for (std::size_t i = 0; i < bins; ++i) cdf[i + 1] = cdf[i] + weights[i] / total;
        cdf[bins] = 1.0;
    }

    RaySampleSet out;
    out.near = prev.near;
    out.far = prev.far;
    out.t.resize(std::size_t(n_next));
    std::size_t bin = 0;
    for (int j = 0; j < n_next; ++j) {
        const double frac = jitter ? jitter->uniform() : 0.5;
        const double u = (double(j) + frac) / double(n_next);
        while (bin + 1 < bins && cdf[bin + 1] <= u) ++bin;
        const double lo = cdf[bin], hi = cdf[bin + 1];
        const double s = hi > lo ? (u - lo) / (hi - lo) : 0.5;
        out.t[std::size_t(j)] = edges[bin] + s * (edges[bin + 1] - edges[bin]);
    }
    std::sort(out.t.begin(), out.t.end());
    return out;
}

double anneal_exponent(int64_t step, double slope, int64_t warmup) {
    if (step < 0) throw ScheduleError("anneal: negative step");
    if (warmup <= 0 || step >= warmup) return 1.0;
    const double x = double(step) / double(warmup);
    return slope * x / ((slope - 1.0) * x + 1.0);
}

std::vector<double> anneal_weights(const std::vector<double>& weights, int64_t step, double slope,
                                   int64_t warmup) {
    const double e = anneal_exponent(step, slope, warmup);
    if (e == 1.0) return weights;
    std::vector<double> out(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i)
        out[i] = weights[i] > 0 ? std::pow(weights[i], e) : 0.0;
    return out;
}

}  // namespace qnerf::sampling
