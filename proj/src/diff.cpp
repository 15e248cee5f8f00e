#include "qnerf/diff.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <cmath>

namespace qnerf::diff {

bool Tensor::all_finite() const {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

Var Tape::constant(Tensor value) {
    nodes_.push_back(NodeRec{std::move(value), nullptr, {}, false, false, {}});
    return Var{int32_t(nodes_.size() - 1)};
}

Var Tape::leaf(Parameter& p) {
    NodeRec rec;
    rec.param = &p;
    rec.needs_grad = p.requires_grad;
    nodes_.push_back(std::move(rec));
    return Var{int32_t(nodes_.size() - 1)};
}

Var Tape::node(Tensor value, bool needs_grad, std::function<void(Tape&, Var)> backward) {
    nodes_.push_back(NodeRec{std::move(value), nullptr, {}, false, needs_grad,
                             needs_grad ? std::move(backward) : std::function<void(Tape&, Var)>{}});
    return Var{int32_t(nodes_.size() - 1)};
}

const Tensor& Tape::value(Var x) const {
    const NodeRec& n = nodes_[std::size_t(x.idx)];
    return n.param ? n.param->value : n.value;
}

bool Tape::needs_grad(Var x) const { return nodes_[std::size_t(x.idx)].needs_grad; }

Tensor& Tape::grad(Var x) {
    NodeRec& n = nodes_[std::size_t(x.idx)];
    if (!n.has_grad) {
        const Tensor& val = n.param ? n.param->value : n.value;
        n.grad = Tensor(val.rows, val.cols, 0.0);
        n.has_grad = true;
    }
    return n.grad;
}

bool Tape::grad_allocated(Var x) const { return nodes_[std::size_t(x.idx)].has_grad; }

void Tape::backward(Var root) {
    if (!root.valid() || std::size_t(root.idx) >= nodes_.size())
        throw GraphError("backward root is not on this tape");
    if (value(root).size() != 1) throw GraphError("backward root must be a scalar");
    grad(root).v[0] = 1.0;
    for (int32_t i = root.idx; i >= 0; --i) {
        NodeRec& n = nodes_[std::size_t(i)];
        if (!n.needs_grad || !n.has_grad) continue;
        if (n.bw) n.bw(*this, Var{i});
        if (n.param && n.param->requires_grad) {
            Tensor& pg = n.param->grad;
            if (pg.size() != n.grad.size()) n.param->zero_grad();
            for (std::size_t k = 0; k < n.grad.v.size(); ++k) pg.v[k] += n.grad.v[k];
        }
    }
}

namespace {

constexpr int64_t kParallelRows = 256;

void check_shape(bool ok, const char* what) {
    if (!ok) throw GraphError(std::string("shape mismatch in ") + what);
}

// Elementwise helper: out = f(a); backward da += g * df(a, out).
template <typename Fwd, typename Bwd>
Var unary_ew(Tape& t, Var a, Fwd f, Bwd dfda) {
    const Tensor& av = t.value(a);
    Tensor out(av.rows, av.cols);
    for (std::size_t i = 0; i < av.v.size(); ++i) out.v[i] = f(av.v[i]);
    return t.node(std::move(out), t.needs_grad(a), [a, dfda](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        const Tensor& av2 = tp.value(a);
        const Tensor& ov = tp.value(self);
        Tensor& da = tp.grad(a);
        for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] += g.v[i] * dfda(av2.v[i], ov.v[i]);
    });
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    check_shape(av.cols == bv.rows, "matmul");
    const int64_t n = av.rows, k = av.cols, m = bv.cols;
    Tensor out(n, m);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n >= kParallelRows)
#endif
    for (int64_t i = 0; i < n; ++i) {
        const double* arow = &av.v[std::size_t(i * k)];
        double* orow = &out.v[std::size_t(i * m)];
        for (int64_t p = 0; p < k; ++p) {
            const double x = arow[p];
            if (x == 0.0) continue;
            const double* brow = &bv.v[std::size_t(p * m)];
            for (int64_t j = 0; j < m; ++j) orow[j] += x * brow[j];
        }
    }
    const bool ng = t.needs_grad(a) || t.needs_grad(b);
    return t.node(std::move(out), ng, [a, b, n, k, m](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        const Tensor& av2 = tp.value(a);
        const Tensor& bv2 = tp.value(b);
        if (tp.needs_grad(a)) {
            Tensor& da = tp.grad(a);  // da += g . b^T
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n >= kParallelRows)
#endif
            for (int64_t i = 0; i < n; ++i) {
                const double* grow = &g.v[std::size_t(i * m)];
                double* darow = &da.v[std::size_t(i * k)];
                for (int64_t p = 0; p < k; ++p) {
                    const double* brow = &bv2.v[std::size_t(p * m)];
                    double acc = 0.0;
                    for (int64_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
                    darow[p] += acc;
                }
            }
        }
        if (tp.needs_grad(b)) {
            Tensor& db = tp.grad(b);  // db += a^T . g
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (k >= 8 && n >= kParallelRows)
#endif
            for (int64_t p = 0; p < k; ++p) {
                double* dbrow = &db.v[std::size_t(p * m)];
                for (int64_t i = 0; i < n; ++i) {
                    const double x = av2.v[std::size_t(i * k + p)];
                    if (x == 0.0) continue;
                    const double* grow = &g.v[std::size_t(i * m)];
                    for (int64_t j = 0; j < m; ++j) dbrow[j] += x * grow[j];
                }
            }
        }
    });
}

Var add(Tape& t, Var a, Var b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    check_shape(av.same_shape(bv), "add");
    Tensor out(av.rows, av.cols);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = av.v[i] + bv.v[i];
    return t.node(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        if (tp.needs_grad(a)) {
            Tensor& da = tp.grad(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] += g.v[i];
        }
        if (tp.needs_grad(b)) {
            Tensor& db = tp.grad(b);
            for (std::size_t i = 0; i < g.v.size(); ++i) db.v[i] += g.v[i];
        }
    });
}

Var add_row(Tape& t, Var a, Var row) {
    const Tensor& av = t.value(a);
    const Tensor& rv = t.value(row);
    check_shape(rv.rows == 1 && rv.cols == av.cols, "add_row");
    Tensor out(av.rows, av.cols);
    for (int64_t i = 0; i < av.rows; ++i)
        for (int64_t j = 0; j < av.cols; ++j) out.at(i, j) = av.at(i, j) + rv.at(0, j);
    return t.node(std::move(out), t.needs_grad(a) || t.needs_grad(row),
                  [a, row](Tape& tp, Var self) {
                      const Tensor& g = tp.grad(self);
                      if (tp.needs_grad(a)) {
                          Tensor& da = tp.grad(a);
                          for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] += g.v[i];
                      }
                      if (tp.needs_grad(row)) {
                          Tensor& dr = tp.grad(row);
                          for (int64_t i = 0; i < g.rows; ++i)
                              for (int64_t j = 0; j < g.cols; ++j) dr.at(0, j) += g.at(i, j);
                      }
                  });
}

Var sub(Tape& t, Var a, Var b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    check_shape(av.same_shape(bv), "sub");
    Tensor out(av.rows, av.cols);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = av.v[i] - bv.v[i];
    return t.node(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        if (tp.needs_grad(a)) {
            Tensor& da = tp.grad(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] += g.v[i];
        }
        if (tp.needs_grad(b)) {
            Tensor& db = tp.grad(b);
            for (std::size_t i = 0; i < g.v.size(); ++i) db.v[i] -= g.v[i];
        }
    });
}

Var mul(Tape& t, Var a, Var b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    check_shape(av.same_shape(bv), "mul");
    Tensor out(av.rows, av.cols);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = av.v[i] * bv.v[i];
    return t.node(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        const Tensor& av2 = tp.value(a);
        const Tensor& bv2 = tp.value(b);
        if (tp.needs_grad(a)) {
            Tensor& da = tp.grad(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] += g.v[i] * bv2.v[i];
        }
        if (tp.needs_grad(b)) {
            Tensor& db = tp.grad(b);
            for (std::size_t i = 0; i < g.v.size(); ++i) db.v[i] += g.v[i] * av2.v[i];
        }
    });
}

Var scale(Tape& t, Var a, double c) {
    return unary_ew(t, a, [c](double x) { return c * x; },
                    [c](double, double) { return c; });
}

Var add_scalar(Tape& t, Var a, double c) {
    return unary_ew(t, a, [c](double x) { return x + c; },
                    [](double, double) { return 1.0; });
}

Var exp(Tape& t, Var a) {
    return unary_ew(t, a, [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

Var sin(Tape& t, Var a) {
    return unary_ew(t, a, [](double x) { return std::sin(x); },
                    [](double x, double) { return std::cos(x); });
}

Var cos(Tape& t, Var a) {
    return unary_ew(t, a, [](double x) { return std::cos(x); },
                    [](double x, double) { return -std::sin(x); });
}

Var relu(Tape& t, Var a) {
    return unary_ew(t, a, [](double x) { return x > 0 ? x : 0.0; },
                    [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

namespace {
inline double softplus_val(double x) {
    // log1p(exp(-|x|)) + max(x, 0): overflow-safe on both tails.
    return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}
inline double sigmoid_val(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
}  // namespace

Var softplus(Tape& t, Var a) {
    return unary_ew(t, a, softplus_val, [](double x, double) { return sigmoid_val(x); });
}

Var sigmoid(Tape& t, Var a) {
    return unary_ew(t, a, sigmoid_val, [](double, double y) { return y * (1.0 - y); });
}

Var sum(Tape& t, Var a) {
    const Tensor& av = t.value(a);
    double acc = 0.0;
    for (double x : av.v) acc += x;
    return t.node(Tensor::scalar(acc), t.needs_grad(a), [a](Tape& tp, Var self) {
        const double g = tp.grad(self).v[0];
        Tensor& da = tp.grad(a);
        for (double& x : da.v) x += g;
    });
}

Var mean(Tape& t, Var a) {
    const int64_t n = t.value(a).size();
    check_shape(n > 0, "mean");
    return scale(t, sum(t, a), 1.0 / double(n));
}

Var gather_rows(Tape& t, Var table, std::vector<int64_t> idx) {
    const Tensor& tv = t.value(table);
    for (int64_t i : idx)
        if (i < 0 || i >= tv.rows) throw IndexError("gather_rows index out of range");
    Tensor out(int64_t(idx.size()), tv.cols);
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy_n(&tv.v[std::size_t(idx[r] * tv.cols)], std::size_t(tv.cols),
                    &out.v[r * std::size_t(tv.cols)]);
    return t.node(std::move(out), t.needs_grad(table),
                  [table, idx = std::move(idx)](Tape& tp, Var self) {
                      const Tensor& g = tp.grad(self);
                      Tensor& dt = tp.grad(table);
                      for (std::size_t r = 0; r < idx.size(); ++r)
                          for (int64_t j = 0; j < g.cols; ++j)
                              dt.at(idx[r], j) += g.at(int64_t(r), j);
                  });
}

Var repeat_rows(Tape& t, Var a, int64_t times) {
    const Tensor& av = t.value(a);
    check_shape(times >= 1, "repeat_rows");
    Tensor out(av.rows * times, av.cols);
    for (int64_t i = 0; i < av.rows; ++i)
        for (int64_t r = 0; r < times; ++r)
            std::copy_n(&av.v[std::size_t(i * av.cols)], std::size_t(av.cols),
                        &out.v[std::size_t((i * times + r) * av.cols)]);
    return t.node(std::move(out), t.needs_grad(a), [a, times](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        Tensor& da = tp.grad(a);
        for (int64_t i = 0; i < da.rows; ++i)
            for (int64_t r = 0; r < times; ++r)
                for (int64_t j = 0; j < g.cols; ++j) da.at(i, j) += g.at(i * times + r, j);
    });
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
    check_shape(!parts.empty(), "concat_cols");
    const int64_t rows = t.value(parts[0]).rows;
    int64_t cols = 0;
    bool ng = false;
    for (Var p : parts) {
        check_shape(t.value(p).rows == rows, "concat_cols");
        cols += t.value(p).cols;
        ng = ng || t.needs_grad(p);
    }
    Tensor out(rows, cols);
    int64_t off = 0;
    for (Var p : parts) {
        const Tensor& pv = t.value(p);
        for (int64_t i = 0; i < rows; ++i)
            std::copy_n(&pv.v[std::size_t(i * pv.cols)], std::size_t(pv.cols),
                        &out.v[std::size_t(i * cols + off)]);
        off += pv.cols;
    }
    return t.node(std::move(out), ng, [parts, cols](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        int64_t off2 = 0;
        for (Var p : parts) {
            const int64_t pc = tp.value(p).cols;
            if (tp.needs_grad(p)) {
                Tensor& dp = tp.grad(p);
                for (int64_t i = 0; i < g.rows; ++i)
                    for (int64_t j = 0; j < pc; ++j) dp.at(i, j) += g.at(i, off2 + j);
            }
            off2 += pc;
        }
    });
}

Var slice_cols(Tape& t, Var a, int64_t c0, int64_t c1) {
    const Tensor& av = t.value(a);
    check_shape(0 <= c0 && c0 < c1 && c1 <= av.cols, "slice_cols");
    Tensor out(av.rows, c1 - c0);
    for (int64_t i = 0; i < av.rows; ++i)
        std::copy_n(&av.v[std::size_t(i * av.cols + c0)], std::size_t(c1 - c0),
                    &out.v[std::size_t(i * out.cols)]);
    return t.node(std::move(out), t.needs_grad(a), [a, c0](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        Tensor& da = tp.grad(a);
        for (int64_t i = 0; i < g.rows; ++i)
            for (int64_t j = 0; j < g.cols; ++j) da.at(i, c0 + j) += g.at(i, j);
    });
}

Var quantum_layer(Tape& t, std::shared_ptr<const qsim::CircuitProgram> prog, Var params,
                  Var features) {
    const Tensor& pv = t.value(params);
    const Tensor& fv = t.value(features);
    if (int(pv.size()) != prog->n_params())
        throw ParamArityError("quantum_layer: params size mismatch");
    if (int(fv.cols) != prog->n_features())
        throw ParamArityError("quantum_layer: feature width mismatch");

    const int64_t n_rows = fv.rows;
    const int nq = prog->n_qubits();
    Tensor out(n_rows, nq);
    {
        std::vector<double> p(pv.v.begin(), pv.v.end());
#ifdef _OPENMP
#pragma omp parallel if (n_rows >= 16)
#endif
        {
            qsim::AdjointWorkspace ws;
            std::vector<double> feat(std::size_t(prog->n_features()));
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
            for (int64_t i = 0; i < n_rows; ++i) {
                std::copy_n(&fv.v[std::size_t(i * fv.cols)], feat.size(), feat.begin());
                const auto& psi = ws.forward(*prog, p, feat);
                auto z = qsim::expectation(psi, {});
                std::copy(z.begin(), z.end(), &out.v[std::size_t(i * nq)]);
            }
        }
    }

    const bool ng = t.needs_grad(params) || t.needs_grad(features);
    return t.node(std::move(out), ng, [prog, params, features, n_rows, nq](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        const Tensor& pv2 = tp.value(params);
        const Tensor& fv2 = tp.value(features);
        std::vector<double> p(pv2.v.begin(), pv2.v.end());

        const bool want_p = tp.needs_grad(params);
        const bool want_f = tp.needs_grad(features);
        Tensor* df = want_f ? &tp.grad(features) : nullptr;
        Tensor* dp = want_p ? &tp.grad(params) : nullptr;

        const int n_threads = qnerf::num_threads();
        std::vector<std::vector<double>> dp_partial(
            std::size_t(n_threads), std::vector<double>(p.size(), 0.0));

#ifdef _OPENMP
#pragma omp parallel num_threads(n_threads) if (n_rows >= 16)
#endif
        {
#ifdef _OPENMP
            const int tid = omp_get_thread_num();
#else
            const int tid = 0;
#endif
            qsim::AdjointWorkspace ws;
            std::vector<double> feat(std::size_t(prog->n_features()), 0.0);
            std::vector<double> upstream(std::size_t(nq), 0.0);
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
            for (int64_t i = 0; i < n_rows; ++i) {
                std::copy_n(&fv2.v[std::size_t(i * fv2.cols)], feat.size(), feat.begin());
                std::copy_n(&g.v[std::size_t(i * nq)], upstream.size(), upstream.begin());
                auto grads = ws.run(*prog, p, feat, {}, upstream);
                if (want_f)
                    for (std::size_t j = 0; j < grads.d_features.size(); ++j)
                        df->v[std::size_t(i) * std::size_t(fv2.cols) + j] += grads.d_features[j];
                if (want_p)
                    for (std::size_t j = 0; j < grads.d_params.size(); ++j)
                        dp_partial[std::size_t(tid)][j] += grads.d_params[j];
            }
        }
        // Merge per-thread parameter gradients in thread order: deterministic
        // for a fixed thread count.
        if (want_p)
            for (const auto& part : dp_partial)
                for (std::size_t j = 0; j < part.size(); ++j) dp->v[j] += part[j];
    });
}

void adam_step(AdamState& state, Tensor& param, const Tensor& grad, double lr,
               const AdamConfig& cfg) {
    if (!grad.same_shape(param)) throw GraphError("adam_step: grad shape mismatch");
    if (!grad.all_finite()) throw NonFiniteGradient("adam_step: non-finite gradient");
    if (state.m.size() != param.size()) {
        state.m = Tensor(param.rows, param.cols, 0.0);
        state.v = Tensor(param.rows, param.cols, 0.0);
        state.step = 0;
    }
    state.step += 1;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, double(state.step));
    const double bc2 = 1.0 - std::pow(b2, double(state.step));
    for (std::size_t i = 0; i < param.v.size(); ++i) {
        const double g = grad.v[i];
        state.m.v[i] = b1 * state.m.v[i] + (1 - b1) * g;
        state.v.v[i] = b2 * state.v.v[i] + (1 - b2) * g * g;
        const double mhat = state.m.v[i] / bc1;
        const double vhat = state.v.v[i] / bc2;
        param.v[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

double lr_at(const LrSchedule& s, int64_t step) {
    if (step < 0 || step > s.total_steps) throw ScheduleError("lr_at: step out of range");
    if (step < s.warmup_steps) {
        const double t = double(step) / double(s.warmup_steps);
        const double ramp = 0.5 * (1.0 - std::cos(M_PI * t));
        return s.pre_warmup_lr + (s.peak_lr - s.pre_warmup_lr) * ramp;
    }
    const int64_t decay_steps = s.total_steps - s.warmup_steps;
    if (decay_steps <= 0) return s.final_lr;
    const double t = double(step - s.warmup_steps) / double(decay_steps);
    return s.peak_lr * std::pow(s.final_lr / s.peak_lr, t);
}

Parameter& ParamStore::create(const std::string& name, int64_t rows, int64_t cols) {
    if (contains(name)) throw GraphError("parameter already exists: " + name);
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->value = Tensor(rows, cols, 0.0);
    p->zero_grad();
    params_.push_back(std::move(p));
    return *params_.back();
}

Parameter& ParamStore::get(const std::string& name) {
    for (auto& p : params_)
        if (p->name == name) return *p;
    throw GraphError("no such parameter: " + name);
}

const Parameter& ParamStore::get(const std::string& name) const {
    for (const auto& p : params_)
        if (p->name == name) return *p;
    throw GraphError("no such parameter: " + name);
}

bool ParamStore::contains(const std::string& name) const {
    for (const auto& p : params_)
        if (p->name == name) return true;
    return false;
}

std::vector<Parameter*> ParamStore::all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::vector<const Parameter*> ParamStore::all() const {
    std::vector<const Parameter*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
}

void ParamStore::zero_grads() {
    for (auto& p : params_) p->zero_grad();
}

int64_t ParamStore::total_size() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
}

}  // namespace qnerf::diff
