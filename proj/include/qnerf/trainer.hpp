#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qnerf/config.hpp"
#include "qnerf/dataset.hpp"
#include "qnerf/field.hpp"
#include "qnerf/metrics.hpp"
#include "qnerf/render.hpp"
#include "qnerf/sampling.hpp"

namespace qnerf::train {

struct LossReport {
    double photometric = 0.0;
    double proposal = 0.0;
    double regularizer = 0.0;
    double total = 0.0;
    double lr = 0.0;
};

struct LossWeights {
    double photometric = 1.0;
    double proposal = 1.0;
    double accumulation = 1e-3;
};

// Everything the loss needs from one sampled batch.
struct CascadeTerms {
    diff::Var pred_rgb;             // [B,3]
    diff::Var accumulation;         // [B,1]
    std::vector<diff::Var> prop_w;  // per proposal stage, [B*bins, 1]
    std::vector<std::vector<double>> prop_edges;
    std::vector<int64_t> prop_bins;
    std::vector<double> final_edges;
    std::vector<double> final_weights;  // detached values
    int64_t final_bins = 0;
    int64_t n_rays = 0;
};

// Photometric MSE + interlevel histogram loss + accumulation regularizer.
// The report receives the unweighted terms and the weighted total.
diff::Var assemble_loss(diff::Tape& t, const CascadeTerms& terms, const diff::Tensor& target,
                        const LossWeights& weights, LossReport& report);

// The optimization loop plus the shared sampling/rendering pipeline.
class Trainer {
public:
    Trainer(const config::RunConfig& cfg, data::Dataset dataset);

    LossReport train_step();
    int64_t step() const { return step_; }

    // Renders a full view with stratified-midpoint sampling and the mean
    // appearance embedding; deterministic.
    img::Image render_view(const data::CameraModel& camera) const;

    // PSNR/SSIM over the held-out split.
    metrics::MetricReport evaluate() const;

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);

    const data::Dataset& dataset() const { return dataset_; }
    const field::Field& field_model() const { return field_; }
    diff::ParamStore& params() { return store_; }
    const config::RunConfig& run_config() const { return cfg_; }

    // Instrumentation for the leakage and dead-parameter contracts.
    const std::vector<int>& sampled_image_log() const { return sampled_images_; }
    std::map<std::string, bool> parameter_groups_with_grads() const { return group_grad_seen_; }

    // Pose error of a train camera against a reference pose.
    double pose_rotation_error(int train_slot, const data::Pose& reference) const;
    double pose_translation_error(int train_slot, const data::Pose& reference) const;

    // One photometric-only step that updates just the pose delta of the given
    // training image; lr = 0 computes the loss and gradients without moving.
    double pose_only_step(int image_index, int n_rays, double lr, uint64_t salt = 0);

    // Direct access for pose-only experiments.
    diff::Parameter& pose_deltas() { return *pose_deltas_; }
    int train_slot_of_image(int image_index) const;

private:
    CascadeTerms run_cascade(diff::Tape& t, const data::RayBatchSpec& batch,
                             const std::vector<int64_t>& appearance_rows, Rng* jitter,
                             int64_t anneal_step) const;

    config::RunConfig cfg_;
    data::Dataset dataset_;
    sampling::ProposalConfig proposal_cfg_;
    diff::ParamStore store_;
    field::Field field_;
    std::vector<field::ProposalNet> proposal_nets_;
    diff::Parameter* pose_deltas_ = nullptr;
    std::map<int, int> image_to_slot_;

    std::map<std::string, diff::AdamState> adam_;
    diff::LrSchedule schedule_;
    int64_t step_ = 0;

    std::vector<int> sampled_images_;
    std::map<std::string, bool> group_grad_seen_;

    void apply_adam(double lr);
    std::string group_of(const std::string& param_name) const;
};

// Append-only metrics CSV: step, lr, loss terms, optional eval metrics.
class MetricsLog {
public:
    explicit MetricsLog(const std::string& path);
    void append(int64_t step, const LossReport& loss, double eval_psnr = -1.0,
                double eval_ssim = -1.0);

private:
    std::string path_;
};

}  // namespace qnerf::train
