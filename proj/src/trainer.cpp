#include "qnerf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace qnerf::train {

using diff::Tape;
using diff::Tensor;
using diff::Var;
using sampling::RaySampleSet;

namespace {

constexpr uint64_t kPurposeBatch = 1;
constexpr uint64_t kPurposeJitter = 2;
constexpr uint64_t kPurposePose = 3;

// Per-sample t replicated over three columns so positions can be assembled
// from existing elementwise primitives.
Tensor t_as_columns(const std::vector<double>& t_flat) {
    Tensor out(int64_t(t_flat.size()), 3);
    for (std::size_t i = 0; i < t_flat.size(); ++i)
        for (int c = 0; c < 3; ++c) out.at(int64_t(i), c) = t_flat[i];
    return out;
}

}  // namespace

Trainer::Trainer(const config::RunConfig& cfg, data::Dataset dataset)
    : cfg_(cfg), dataset_(std::move(dataset)), proposal_cfg_(config::make_proposal_config(cfg)) {
    if (cfg_.threads > 0) qnerf::set_num_threads(cfg_.threads);
    if (dataset_.train_indices.empty()) throw DatasetError("no training frames");
    if (cfg_.rays_per_batch <= 0 || cfg_.total_iters <= 0 || proposal_cfg_.final_samples <= 0)
        throw ConfigError("trainer counts must be positive");
    if (proposal_cfg_.stages.empty()) throw ConfigError("sampling.stages must not be empty");
    for (std::size_t i = 0; i < proposal_cfg_.stages.size(); ++i) {
        if (proposal_cfg_.stages[i] <= 0) throw ConfigError("proposal stages must be positive");
        if (i > 0 && proposal_cfg_.stages[i] >= proposal_cfg_.stages[i - 1])
            throw ConfigError("proposal stage counts must decrease");
    }
    if (cfg_.eval_every > 0 && cfg_.total_iters % cfg_.eval_every != 0)
        throw ConfigError("trainer.eval_every must divide trainer.total_iters");

    schedule_.pre_warmup_lr = cfg_.pre_warmup_lr;
    schedule_.peak_lr = cfg_.peak_lr;
    schedule_.final_lr = cfg_.final_lr;
    schedule_.warmup_steps = cfg_.warmup_steps;
    schedule_.total_steps = cfg_.total_iters;

    Rng init_rng(derive_seed(cfg_.seed, 0xF1E1D));
    auto field_cfg = config::make_field_config(cfg_, int(dataset_.train_indices.size()));
    field_ = field::Field::build(store_, field_cfg, init_rng);

    for (std::size_t s = 0; s < proposal_cfg_.stages.size(); ++s) {
        enc::HashEncodingConfig hc;
        hc.name = "proposal" + std::to_string(s);
        auto per_stage = [&](const std::vector<int64_t>& v, int64_t fallback) {
            return s < v.size() ? v[s] : (v.empty() ? fallback : v.back());
        };
        hc.levels = int(per_stage(cfg_.proposal_levels, 5));
        hc.features_per_level = 1;
        hc.base_resolution = 16;
        hc.max_resolution = int(per_stage(cfg_.proposal_max_res, 128));
        hc.table_size_log2 = int(per_stage(cfg_.proposal_table_log2, 17));
        const int hidden = int(per_stage(cfg_.proposal_hidden, 16));
        proposal_nets_.push_back(
            field::ProposalNet::build(store_, "proposal" + std::to_string(s), hc, hidden,
                                      init_rng));
    }

    pose_deltas_ = &store_.create("pose.deltas", int64_t(dataset_.train_indices.size()), 6);
    pose_deltas_->requires_grad = cfg_.pose_optimization;
    for (std::size_t slot = 0; slot < dataset_.train_indices.size(); ++slot)
        image_to_slot_[dataset_.train_indices[slot]] = int(slot);
}

int Trainer::train_slot_of_image(int image_index) const {
    auto it = image_to_slot_.find(image_index);
    return it == image_to_slot_.end() ? -1 : it->second;
}

std::string Trainer::group_of(const std::string& name) const {
    if (name.rfind("pose.", 0) == 0) return "pose_deltas";
    if (name == "field.appearance") return "appearance";
    if (name.rfind("proposal", 0) == 0) return "proposal";
    if (name.find("hash_table") != std::string::npos) return "hash_tables";
    if (name.find("qiren") != std::string::npos && name.find("angles") != std::string::npos)
        return "quantum_angles";
    return "classical_weights";
}

CascadeTerms Trainer::run_cascade(Tape& t, const data::RayBatchSpec& batch,
                                            const std::vector<int64_t>& appearance_rows,
                                            Rng* jitter, int64_t anneal_step) const {
    const int64_t n_rays = int64_t(batch.cameras.size());
    Var rays = data::pose_rays_node(t, *pose_deltas_, batch);
    Var origins = diff::slice_cols(t, rays, 0, 3);
    Var dirs = diff::slice_cols(t, rays, 3, 6);

    CascadeTerms result;
    result.n_rays = n_rays;
    for (int stage_count : proposal_cfg_.stages) result.prop_bins.push_back(stage_count);
    result.final_bins = proposal_cfg_.final_samples;

    std::vector<RaySampleSet> sets{std::size_t(n_rays)};
    {
        sampling::Ray proto;
        proto.near = cfg_.near;
        proto.far = cfg_.far;
        // One solved base set; rays only differ by their stratified jitter.
        const RaySampleSet base = sampling::piecewise_sample(proto, proposal_cfg_.stages[0]);
        for (int64_t r = 0; r < n_rays; ++r)
            sets[std::size_t(r)] = jitter ? sampling::jitter_samples(base, *jitter) : base;
    }

    std::vector<int> counts = proposal_cfg_.stages;
    counts.push_back(proposal_cfg_.final_samples);

    Var sigma_final{}, rgb_final{};
    std::vector<double> deltas_flat, mids_flat;
    for (std::size_t stage = 0; stage < counts.size(); ++stage) {
        const int64_t per_ray = counts[stage];
        std::vector<double> t_flat(std::size_t(n_rays * per_ray), 0.0);
        deltas_flat.assign(std::size_t(n_rays * per_ray), 0.0);
        mids_flat.assign(std::size_t(n_rays * per_ray), 0.0);
        for (int64_t r = 0; r < n_rays; ++r) {
            const auto& s = sets[std::size_t(r)];
            const auto d = s.deltas();
            const auto m = s.midpoints();
            for (int64_t i = 0; i < per_ray; ++i) {
                t_flat[std::size_t(r * per_ray + i)] = s.t[std::size_t(i)];
                deltas_flat[std::size_t(r * per_ray + i)] = d[std::size_t(i)];
                mids_flat[std::size_t(r * per_ray + i)] = m[std::size_t(i)];
            }
        }
        Var rep_o = diff::repeat_rows(t, origins, per_ray);
        Var rep_d = diff::repeat_rows(t, dirs, per_ray);
        Var positions = diff::add(t, rep_o, diff::mul(t, rep_d, t.constant(t_as_columns(t_flat))));

        const bool is_final = stage + 1 == counts.size();
        if (!is_final) {
            Var sigma = proposal_nets_[stage].density(t, positions);
            Var weights = render::render_weights_node(t, sigma, deltas_flat, n_rays, per_ray);
            result.prop_w.push_back(weights);
            std::vector<double> edges(std::size_t(n_rays * (per_ray + 1)), 0.0);
            for (int64_t r = 0; r < n_rays; ++r) {
                const auto& s = sets[std::size_t(r)];
                for (int64_t i = 0; i < per_ray; ++i)
                    edges[std::size_t(r * (per_ray + 1) + i)] = s.t[std::size_t(i)];
                edges[std::size_t(r * (per_ray + 1) + per_ray)] = s.far;
            }
            result.prop_edges.push_back(std::move(edges));

            // Resampling consumes annealed weight values; gradients reach the
            // proposal nets only through the interlevel loss.
            const auto& wv = t.value(weights);
            std::vector<RaySampleSet> next{std::size_t(n_rays)};
            for (int64_t r = 0; r < n_rays; ++r) {
                std::vector<double> w(wv.v.begin() + r * per_ray,
                                      wv.v.begin() + (r + 1) * per_ray);
                auto annealed = sampling::anneal_weights(w, anneal_step,
                                                         proposal_cfg_.anneal_slope,
                                                         proposal_cfg_.anneal_warmup);
                next[std::size_t(r)] = sampling::resample_pdf(sets[std::size_t(r)], annealed,
                                                              counts[stage + 1], jitter);
            }
            sets = std::move(next);
        } else {
            Var appearance{};
            if (field_.has_appearance()) {
                if (appearance_rows.empty()) {
                    appearance = field_.mean_appearance(t, n_rays * per_ray);
                } else {
                    appearance =
                        diff::repeat_rows(t, field_.appearance_rows(t, appearance_rows), per_ray);
                }
            }
            auto out = field_.forward(t, positions, rep_d, appearance);
            sigma_final = out.sigma;
            rgb_final = out.rgb;

            std::vector<double> edges(std::size_t(n_rays * (per_ray + 1)), 0.0);
            for (int64_t r = 0; r < n_rays; ++r) {
                const auto& s = sets[std::size_t(r)];
                for (int64_t i = 0; i < per_ray; ++i)
                    edges[std::size_t(r * (per_ray + 1) + i)] = s.t[std::size_t(i)];
                edges[std::size_t(r * (per_ray + 1) + per_ray)] = s.far;
            }
            result.final_edges = std::move(edges);
        }
    }

    const int64_t n_final = proposal_cfg_.final_samples;
    Var composed = render::composite_node(t, sigma_final, rgb_final, deltas_flat, mids_flat,
                                          n_rays, n_final);
    result.pred_rgb = diff::slice_cols(t, composed, 0, 3);
    result.accumulation = diff::slice_cols(t, composed, 3, 4);

    const auto& sv = t.value(sigma_final);
    result.final_weights.assign(std::size_t(n_rays * n_final), 0.0);
    for (int64_t r = 0; r < n_rays; ++r) {
        double transmittance = 1.0;
        for (int64_t i = 0; i < n_final; ++i) {
            const std::size_t k = std::size_t(r * n_final + i);
            const double att = std::exp(-sv.v[k] * deltas_flat[k]);
            result.final_weights[k] = transmittance * (1.0 - att);
            transmittance *= att;
        }
    }
    return result;
}

Var assemble_loss(Tape& t, const CascadeTerms& terms, const Tensor& target,
                  const LossWeights& weights, LossReport& report) {
    Var diff_rgb = diff::sub(t, terms.pred_rgb, t.constant(target));
    Var photometric = diff::mean(t, diff::mul(t, diff_rgb, diff_rgb));

    // Interlevel histogram loss binding each proposal stage to the detached
    // final weights: mean over final bins of max(0, w_f - bound)^2 / (w_f + eps).
    Var proposal_loss = t.constant(Tensor::scalar(0.0));
    {
        const int64_t n_final = terms.final_bins;
        Tensor wf(terms.n_rays * n_final, 1);
        Tensor inv(terms.n_rays * n_final, 1);
        for (std::size_t k = 0; k < terms.final_weights.size(); ++k) {
            wf.v[k] = terms.final_weights[k];
            inv.v[k] = 1.0 / (terms.final_weights[k] + 1e-7);
        }
        for (std::size_t stage = 0; stage < terms.prop_w.size(); ++stage) {
            Var bound = render::outer_bin_sum_node(t, terms.prop_w[stage],
                                                   terms.prop_edges[stage], terms.final_edges,
                                                   terms.n_rays, terms.prop_bins[stage],
                                                   n_final);
            Var excess = diff::relu(t, diff::sub(t, t.constant(wf), bound));
            Var term = diff::mul(t, diff::mul(t, excess, excess), t.constant(inv));
            proposal_loss = diff::add(t, proposal_loss, diff::mean(t, term));
        }
    }

    Var acc = terms.accumulation;
    Var reg = diff::mean(
        t, diff::mul(t, acc, diff::add_scalar(t, diff::scale(t, acc, -1.0), 1.0)));

    Var total = diff::add(
        t,
        diff::add(t, diff::scale(t, photometric, weights.photometric),
                  diff::scale(t, proposal_loss, weights.proposal)),
        diff::scale(t, reg, weights.accumulation));

    report.photometric = t.value(photometric).v[0];
    report.proposal = t.value(proposal_loss).v[0];
    report.regularizer = t.value(reg).v[0];
    report.total = t.value(total).v[0];
    if (!std::isfinite(report.total)) throw NonFiniteLoss("training loss is not finite");
    return total;
}

LossReport Trainer::train_step() {
    Rng batch_rng(derive_seed(cfg_.seed, kPurposeBatch, uint64_t(step_)));
    Rng jitter_rng(derive_seed(cfg_.seed, kPurposeJitter, uint64_t(step_)));

    data::RayBatchSpec batch;
    std::vector<int64_t> appearance_rows;
    Tensor target(cfg_.rays_per_batch, 3);
    for (int i = 0; i < cfg_.rays_per_batch; ++i) {
        const int img_idx =
            dataset_.train_indices[batch_rng.uniform_index(dataset_.train_indices.size())];
        const auto& frame = dataset_.frames[std::size_t(img_idx)];
        const int px = int(batch_rng.uniform_index(uint64_t(frame.camera.width)));
        const int py = int(batch_rng.uniform_index(uint64_t(frame.camera.height)));
        const int slot = train_slot_of_image(img_idx);
        batch.cameras.push_back(frame.camera);
        batch.pixels.push_back({px, py});
        batch.delta_rows.push_back(cfg_.pose_optimization ? slot : -1);
        appearance_rows.push_back(slot);
        sampled_images_.push_back(img_idx);
        for (int c = 0; c < 3; ++c) target.at(i, c) = frame.image.at(px, py, c);
    }

    Tape t;
    auto cascade = run_cascade(t, batch, appearance_rows, &jitter_rng, step_);
    LossReport report;
    LossWeights weights{cfg_.photometric_weight, cfg_.proposal_weight, cfg_.accumulation_weight};
    Var total = assemble_loss(t, cascade, target, weights, report);

    store_.zero_grads();
    t.backward(total);

    for (auto* p : store_.all()) {
        if (!p->requires_grad) continue;
        bool any = false;
        for (double g : p->grad.v)
            if (g != 0.0) {
                any = true;
                break;
            }
        if (any) group_grad_seen_[group_of(p->name)] = true;
    }

    const double lr = diff::lr_at(schedule_, std::min(step_, schedule_.total_steps));
    report.lr = lr;
    apply_adam(lr);
    ++step_;
    return report;
}

double Trainer::pose_only_step(int image_index, int n_rays, double lr, uint64_t salt) {
    const int slot = train_slot_of_image(image_index);
    if (slot < 0) throw IndexError("pose_only_step: not a training image");
    pose_deltas_->requires_grad = true;  // pose-only refinement overrides the run flag
    Rng rng(derive_seed(cfg_.seed, kPurposePose, salt));
    const auto& frame = dataset_.frames[std::size_t(image_index)];

    data::RayBatchSpec batch;
    std::vector<int64_t> appearance_rows;
    Tensor target(n_rays, 3);
    for (int i = 0; i < n_rays; ++i) {
        const int px = int(rng.uniform_index(uint64_t(frame.camera.width)));
        const int py = int(rng.uniform_index(uint64_t(frame.camera.height)));
        batch.cameras.push_back(frame.camera);
        batch.pixels.push_back({px, py});
        batch.delta_rows.push_back(slot);
        appearance_rows.push_back(slot);
        for (int c = 0; c < 3; ++c) target.at(i, c) = frame.image.at(px, py, c);
    }

    Tape t;
    auto cascade = run_cascade(t, batch, appearance_rows, nullptr, proposal_cfg_.anneal_warmup);
    Var diff_rgb = diff::sub(t, cascade.pred_rgb, t.constant(target));
    Var photometric = diff::mean(t, diff::mul(t, diff_rgb, diff_rgb));
    const double loss = t.value(photometric).v[0];

    store_.zero_grads();
    t.backward(photometric);
    if (lr > 0)
        diff::adam_step(adam_["pose.deltas"], pose_deltas_->value, pose_deltas_->grad, lr);
    return loss;
}

void Trainer::apply_adam(double lr) {
    const bool update_proposals = (step_ % proposal_cfg_.update_every) == 0;
    for (auto* p : store_.all()) {
        if (!p->requires_grad) continue;
        const std::string group = group_of(p->name);
        if (group == "proposal" && !update_proposals) continue;
        const double eff_lr = group == "pose_deltas" ? lr * cfg_.pose_lr_scale : lr;
        diff::adam_step(adam_[p->name], p->value, p->grad, eff_lr);
    }
}

img::Image Trainer::render_view(const data::CameraModel& camera) const {
    img::Image out(camera.width, camera.height);
    const int chunk = std::max(1, cfg_.eval_rays_per_batch);
    std::vector<std::pair<int, int>> pixels;
    pixels.reserve(std::size_t(camera.width) * std::size_t(camera.height));
    for (int y = 0; y < camera.height; ++y)
        for (int x = 0; x < camera.width; ++x) pixels.push_back({x, y});

    for (std::size_t base = 0; base < pixels.size(); base += std::size_t(chunk)) {
        const std::size_t count = std::min(std::size_t(chunk), pixels.size() - base);
        data::RayBatchSpec batch;
        for (std::size_t i = 0; i < count; ++i) {
            batch.cameras.push_back(camera);
            batch.pixels.push_back(pixels[base + i]);
            batch.delta_rows.push_back(-1);  // eval poses stay frozen
        }
        Tape t;
        auto cascade = run_cascade(t, batch, {}, nullptr, proposal_cfg_.anneal_warmup);
        const Tensor& rgb = t.value(cascade.pred_rgb);
        for (std::size_t i = 0; i < count; ++i) {
            const auto [x, y] = pixels[base + i];
            for (int c = 0; c < 3; ++c)
                out.at(x, y, c) = std::clamp(rgb.at(int64_t(i), c), 0.0, 1.0);
        }
    }
    return out;
}

metrics::MetricReport Trainer::evaluate() const {
    std::vector<metrics::ViewMetrics> views;
    for (int idx : dataset_.eval_indices) {
        const auto& frame = dataset_.frames[std::size_t(idx)];
        auto rendered = render_view(frame.camera);
        metrics::ViewMetrics vm;
        vm.view = idx;
        vm.psnr = metrics::psnr(frame.image, rendered);
        vm.ssim = frame.image.width >= 11 && frame.image.height >= 11
                      ? metrics::ssim(frame.image, rendered)
                      : 1.0;
        views.push_back(vm);
    }
    return metrics::MetricReport::from_views(std::move(views));
}

double Trainer::pose_rotation_error(int train_slot, const data::Pose& reference) const {
    std::array<double, 6> delta{};
    for (int k = 0; k < 6; ++k) delta[std::size_t(k)] = pose_deltas_->value.at(train_slot, k);
    const auto& cam = dataset_.frames[std::size_t(dataset_.train_indices[std::size_t(train_slot)])]
                          .camera;
    auto refined = data::pose_compose(data::se3_exp(delta), cam.cam_to_world);
    return data::rotation_angle_between(refined, reference);
}

double Trainer::pose_translation_error(int train_slot, const data::Pose& reference) const {
    std::array<double, 6> delta{};
    for (int k = 0; k < 6; ++k) delta[std::size_t(k)] = pose_deltas_->value.at(train_slot, k);
    const auto& cam = dataset_.frames[std::size_t(dataset_.train_indices[std::size_t(train_slot)])]
                          .camera;
    auto refined = data::pose_compose(data::se3_exp(delta), cam.cam_to_world);
    return data::translation_distance(refined, reference);
}

MetricsLog::MetricsLog(const std::string& path) : path_(path) {
    std::ofstream out(path_, std::ios::trunc);
    out << "step,lr,photometric,proposal,regularizer,total,eval_psnr,eval_ssim\n";
}

void MetricsLog::append(int64_t step, const LossReport& loss, double eval_psnr,
                        double eval_ssim) {
    std::ofstream out(path_, std::ios::app);
    out.precision(10);
    out << step << "," << loss.lr << "," << loss.photometric << "," << loss.proposal << ","
        << loss.regularizer << "," << loss.total << ",";
    if (eval_psnr >= 0)
        out << eval_psnr << "," << eval_ssim;
    else
        out << ",";
    out << "\n";
}

}  // namespace qnerf::train
