#include "qnerf/render.hpp"

#include <cmath>

namespace qnerf::render {

using diff::Tape;
using diff::Tensor;
using diff::Var;

RenderedPixel composite(const std::vector<double>& sigmas,
                        const std::vector<std::array<double, 3>>& colors,
                        const std::vector<double>& deltas, const std::vector<double>& midpoints) {
    if (sigmas.size() != colors.size() || sigmas.size() != deltas.size())
        throw ShapeError("composite: mismatched lengths");
    if (!midpoints.empty() && midpoints.size() != sigmas.size())
        throw ShapeError("composite: mismatched midpoints");

    RenderedPixel out;
    out.weights.resize(sigmas.size());
    double transmittance = 1.0;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        if (sigmas[i] < 0) throw InvalidDensity("composite: negative density");
        if (deltas[i] < 0) throw InvalidDensity("composite: negative interval");
        const double att = std::exp(-sigmas[i] * deltas[i]);
        const double w = transmittance * (1.0 - att);
        out.weights[i] = w;
        for (int c = 0; c < 3; ++c) out.color[std::size_t(c)] += w * colors[i][std::size_t(c)];
        out.accumulation += w;
        out.depth += w * (midpoints.empty() ? 0.0 : midpoints[i]);
        transmittance *= att;
    }
    return out;
}

Var composite_node(Tape& t, Var sigma, Var rgb, const std::vector<double>& deltas,
                   const std::vector<double>& midpoints, int64_t n_rays,
                   int64_t samples_per_ray) {
    const Tensor& sv = t.value(sigma);
    const Tensor& cv = t.value(rgb);
    const int64_t m = n_rays * samples_per_ray;
    if (sv.rows != m || sv.cols != 1) throw ShapeError("composite_node: sigma must be [M,1]");
    if (cv.rows != m || cv.cols != 3) throw ShapeError("composite_node: rgb must be [M,3]");
    if (int64_t(deltas.size()) != m || int64_t(midpoints.size()) != m)
        throw ShapeError("composite_node: deltas/midpoints must cover all samples");

    Tensor out(n_rays, 5);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n_rays >= 64)
#endif
    for (int64_t r = 0; r < n_rays; ++r) {
        double transmittance = 1.0;
        double col[3] = {0, 0, 0}, acc = 0, depth = 0;
        for (int64_t i = 0; i < samples_per_ray; ++i) {
            const int64_t k = r * samples_per_ray + i;
            const double att = std::exp(-sv.v[std::size_t(k)] * deltas[std::size_t(k)]);
            const double w = transmittance * (1.0 - att);
            for (int c = 0; c < 3; ++c) col[c] += w * cv.at(k, c);
            acc += w;
            depth += w * midpoints[std::size_t(k)];
            transmittance *= att;
        }
        out.at(r, 0) = col[0];
        out.at(r, 1) = col[1];
        out.at(r, 2) = col[2];
        out.at(r, 3) = acc;
        out.at(r, 4) = depth;
    }

    const bool ng = t.needs_grad(sigma) || t.needs_grad(rgb);
    return t.node(std::move(out), ng,
                  [sigma, rgb, deltas, midpoints, n_rays, samples_per_ray](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        const Tensor& sv2 = tp.value(sigma);
        const Tensor& cv2 = tp.value(rgb);
        const bool want_s = tp.needs_grad(sigma);
        const bool want_c = tp.needs_grad(rgb);
        Tensor* ds = want_s ? &tp.grad(sigma) : nullptr;
        Tensor* dc = want_c ? &tp.grad(rgb) : nullptr;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n_rays >= 64)
#endif
        for (int64_t r = 0; r < n_rays; ++r) {
            const double* gr = &g.v[std::size_t(r * 5)];
            // Forward pass values are cheap to rebuild per ray.
            std::vector<double> w(std::size_t(samples_per_ray), 0.0);
            std::vector<double> trans(std::size_t(samples_per_ray), 0.0);
            std::vector<double> att(std::size_t(samples_per_ray), 0.0);
            double transmittance = 1.0;
            for (int64_t i = 0; i < samples_per_ray; ++i) {
                const int64_t k = r * samples_per_ray + i;
                trans[std::size_t(i)] = transmittance;
                att[std::size_t(i)] = std::exp(-sv2.v[std::size_t(k)] * deltas[std::size_t(k)]);
                w[std::size_t(i)] = transmittance * (1.0 - att[std::size_t(i)]);
                transmittance *= att[std::size_t(i)];
            }
            // u_i = dL/dw_i through color, accumulation, and depth rows.
            std::vector<double> u(std::size_t(samples_per_ray), 0.0);
            for (int64_t i = 0; i < samples_per_ray; ++i) {
                const int64_t k = r * samples_per_ray + i;
                double ui = gr[3] + gr[4] * midpoints[std::size_t(k)];
                for (int c = 0; c < 3; ++c) ui += gr[c] * cv2.at(k, c);
                u[std::size_t(i)] = ui;
                if (want_c)
                    for (int c = 0; c < 3; ++c) dc->at(k, c) += w[std::size_t(i)] * gr[c];
            }
            if (want_s) {
                double suffix = 0.0;  // sum_{i>k} u_i w_i
                for (int64_t k = samples_per_ray - 1; k >= 0; --k) {
                    const int64_t idx = r * samples_per_ray + k;
                    const double dk = deltas[std::size_t(idx)];
                    ds->v[std::size_t(idx)] +=
                        u[std::size_t(k)] * trans[std::size_t(k)] * dk * att[std::size_t(k)] -
                        dk * suffix;
                    suffix += u[std::size_t(k)] * w[std::size_t(k)];
                }
            }
        }
    });
}

Var render_weights_node(Tape& t, Var sigma, const std::vector<double>& deltas, int64_t n_rays,
                        int64_t samples_per_ray) {
    const Tensor& sv = t.value(sigma);
    const int64_t m = n_rays * samples_per_ray;
    if (sv.rows != m || sv.cols != 1) throw ShapeError("render_weights_node: sigma must be [M,1]");
    if (int64_t(deltas.size()) != m) throw ShapeError("render_weights_node: deltas mismatch");

    Tensor out(m, 1);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n_rays >= 64)
#endif
    for (int64_t r = 0; r < n_rays; ++r) {
        double transmittance = 1.0;
        for (int64_t i = 0; i < samples_per_ray; ++i) {
            const int64_t k = r * samples_per_ray + i;
            const double att = std::exp(-sv.v[std::size_t(k)] * deltas[std::size_t(k)]);
            out.v[std::size_t(k)] = transmittance * (1.0 - att);
            transmittance *= att;
        }
    }
    return t.node(std::move(out), t.needs_grad(sigma),
                  [sigma, deltas, n_rays, samples_per_ray](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        const Tensor& sv2 = tp.value(sigma);
        Tensor& ds = tp.grad(sigma);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n_rays >= 64)
#endif
        for (int64_t r = 0; r < n_rays; ++r) {
            std::vector<double> w(std::size_t(samples_per_ray), 0.0);
            std::vector<double> trans(std::size_t(samples_per_ray), 0.0);
            std::vector<double> att(std::size_t(samples_per_ray), 0.0);
            double transmittance = 1.0;
            for (int64_t i = 0; i < samples_per_ray; ++i) {
                const int64_t k = r * samples_per_ray + i;
                trans[std::size_t(i)] = transmittance;
                att[std::size_t(i)] = std::exp(-sv2.v[std::size_t(k)] * deltas[std::size_t(k)]);
                w[std::size_t(i)] = transmittance * (1.0 - att[std::size_t(i)]);
                transmittance *= att[std::size_t(i)];
            }
            double suffix = 0.0;
            for (int64_t k = samples_per_ray - 1; k >= 0; --k) {
                const int64_t idx = r * samples_per_ray + k;
                const double dk = deltas[std::size_t(idx)];
                const double gk = g.v[std::size_t(idx)];
                ds.v[std::size_t(idx)] +=
                    gk * trans[std::size_t(k)] * dk * att[std::size_t(k)] - dk * suffix;
                suffix += gk * w[std::size_t(k)];
            }
        }
    });
}

Var outer_bin_sum_node(Tape& t, Var prop_w, const std::vector<double>& prop_edges,
                       const std::vector<double>& final_edges, int64_t n_rays, int64_t prop_bins,
                       int64_t final_bins) {
    const Tensor& wv = t.value(prop_w);
    if (wv.rows != n_rays * prop_bins || wv.cols != 1)
        throw ShapeError("outer_bin_sum_node: weights must be [rays*prop_bins, 1]");
    if (int64_t(prop_edges.size()) != n_rays * (prop_bins + 1) ||
        int64_t(final_edges.size()) != n_rays * (final_bins + 1))
        throw ShapeError("outer_bin_sum_node: edge arrays mismatch");

    // Precompute per final bin the contiguous overlapping proposal-bin range.
    auto ranges = std::make_shared<std::vector<std::pair<int32_t, int32_t>>>(
        std::size_t(n_rays * final_bins));
    Tensor out(n_rays * final_bins, 1);
    for (int64_t r = 0; r < n_rays; ++r) {
        const double* pe = &prop_edges[std::size_t(r * (prop_bins + 1))];
        const double* fe = &final_edges[std::size_t(r * (final_bins + 1))];
        for (int64_t j = 0; j < final_bins; ++j) {
            const double lo = fe[j], hi = fe[j + 1];
            int64_t p0 = 0;
            while (p0 < prop_bins && pe[p0 + 1] <= lo) ++p0;
            int64_t p1 = p0;
            double acc = 0;
            while (p1 < prop_bins && pe[p1] < hi) {
                acc += wv.v[std::size_t(r * prop_bins + p1)];
                ++p1;
            }
            (*ranges)[std::size_t(r * final_bins + j)] = {int32_t(p0), int32_t(p1)};
            out.v[std::size_t(r * final_bins + j)] = acc;
        }
    }
    return t.node(std::move(out), t.needs_grad(prop_w),
                  [prop_w, ranges, n_rays, prop_bins, final_bins](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        Tensor& dw = tp.grad(prop_w);
        for (int64_t r = 0; r < n_rays; ++r) {
            for (int64_t j = 0; j < final_bins; ++j) {
                const auto [p0, p1] = (*ranges)[std::size_t(r * final_bins + j)];
                const double gj = g.v[std::size_t(r * final_bins + j)];
                for (int32_t p = p0; p < p1; ++p)
                    dw.v[std::size_t(r * prop_bins + p)] += gj;
            }
        }
    });
}

}  // namespace qnerf::render
