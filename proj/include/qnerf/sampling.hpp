#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qnerf/common.hpp"
#include "qnerf/diff.hpp"

namespace qnerf::sampling {

struct Ray {
    std::array<double, 3> origin{0, 0, 0};
    std::array<double, 3> dir{0, 0, 1};  // unit
    double near = 0.0;
    double far = 1.0;
};

void validate_ray(const Ray& ray);

// Sorted sample positions along one ray plus the far bound; bin i spans
// [t[i], t[i+1]) with t[n] == far.
struct RaySampleSet {
    double near = 0.0;
    double far = 1.0;
    std::vector<double> t;

    std::size_t size() const { return t.size(); }
    std::vector<double> deltas() const;     // n interval lengths, last ends at far
    std::vector<double> midpoints() const;  // n bin midpoints
};

// Half the samples uniform over [near, min(near+1, far)], the other half with
// geometrically growing steps delta_i = delta_0 * s^i landing exactly on far.
// When far <= near + 1 the geometric branch collapses to uniform spacing.
// With an rng, samples are jittered inside their bins (training mode).
RaySampleSet piecewise_sample(const Ray& ray, int n, Rng* jitter = nullptr);

// Stratified jitter of an existing sample set within its bins; the batch path
// reuses one solved base set across rays that share near/far.
RaySampleSet jitter_samples(const RaySampleSet& base, Rng& rng);

// Renderer-form weights w_i = T_i (1 - exp(-sigma_i delta_i)).
std::vector<double> proposal_weights(const std::vector<double>& sigmas,
                                     const std::vector<double>& deltas);

// Variant with an extra sigma_i factor, kept as a tested alternative:
// w_i = T_i sigma_i (1 - exp(-sigma_i delta_i)).
std::vector<double> proposal_weights_sigma_form(const std::vector<double>& sigmas,
                                                const std::vector<double>& deltas);

// Inverse-CDF resampling of n_next points from the piecewise-constant weight
// density over prev's bins. Stratified midpoints when rng is null, jittered
// otherwise; all-zero weights fall back to uniform.
RaySampleSet resample_pdf(const RaySampleSet& prev, const std::vector<double>& weights,
                          int n_next, Rng* jitter = nullptr);

// Exponent annealing w^bias(step) with bias(x, s) = s x / ((s - 1) x + 1)
// evaluated at x = step / warmup; identity once step >= warmup.
std::vector<double> anneal_weights(const std::vector<double>& weights, int64_t step, double slope,
                                   int64_t warmup);
double anneal_exponent(int64_t step, double slope, int64_t warmup);

struct ProposalConfig {
    std::vector<int> stages{256, 96};
    int final_samples = 48;
    int update_every = 5;
    double anneal_slope = 10.0;
    int64_t anneal_warmup = 1000;
};

}  // namespace qnerf::sampling
