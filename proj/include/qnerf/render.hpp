#pragma once

#include <array>
#include <vector>

#include "qnerf/diff.hpp"

namespace qnerf::render {

struct RenderedPixel {
    std::array<double, 3> color{0, 0, 0};
    double accumulation = 0.0;  // sum of weights == 1 - T_final
    double depth = 0.0;         // expected termination distance
    std::vector<double> weights;
};

// Transmittance compositing of one ray: w_i = T_i (1 - exp(-sigma_i delta_i)),
// color = sum w_i c_i, depth = sum w_i t_mid_i.
RenderedPixel composite(const std::vector<double>& sigmas,
                        const std::vector<std::array<double, 3>>& colors,
                        const std::vector<double>& deltas,
                        const std::vector<double>& midpoints = {});

// Batched differentiable compositing. sigma is [M,1] and rgb [M,3] with
// M = n_rays * samples_per_ray; deltas/midpoints are constants of the same
// layout. Output [N,5] rows: (r, g, b, accumulation, depth).
diff::Var composite_node(diff::Tape& t, diff::Var sigma, diff::Var rgb,
                         const std::vector<double>& deltas, const std::vector<double>& midpoints,
                         int64_t n_rays, int64_t samples_per_ray);

// Differentiable per-sample weights with the same batched layout, used for
// proposal supervision; output [M,1].
diff::Var render_weights_node(diff::Tape& t, diff::Var sigma, const std::vector<double>& deltas,
                              int64_t n_rays, int64_t samples_per_ray);

// Sum of proposal weights overlapping each final-sample bin. `prop_w` is the
// proposal stage's [Mp,1] weights; bins are per-ray sorted edge arrays.
// Output [Mf,1] aligned with the final bins.
diff::Var outer_bin_sum_node(diff::Tape& t, diff::Var prop_w,
                             const std::vector<double>& prop_edges,
                             const std::vector<double>& final_edges, int64_t n_rays,
                             int64_t prop_bins, int64_t final_bins);

}  // namespace qnerf::render
