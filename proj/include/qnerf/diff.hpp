#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qnerf/common.hpp"
#include "qnerf/qsim.hpp"

namespace qnerf::diff {

// Dense row-major matrix of doubles. Vectors are n x 1 or 1 x n.
struct Tensor {
    int64_t rows = 0;
    int64_t cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int64_t r, int64_t c, double fill = 0.0) : rows(r), cols(c), v(std::size_t(r * c), fill) {}

    static Tensor scalar(double x) {
        Tensor t(1, 1);
        t.v[0] = x;
        return t;
    }
    static Tensor row(std::vector<double> data) {
        Tensor t;
        t.rows = 1;
        t.cols = int64_t(data.size());
        t.v = std::move(data);
        return t;
    }

    int64_t size() const { return rows * cols; }
    double& at(int64_t r, int64_t c) { return v[std::size_t(r * cols + c)]; }
    double at(int64_t r, int64_t c) const { return v[std::size_t(r * cols + c)]; }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;
};

// A named trainable tensor with externally owned storage; tapes accumulate
// into `grad` so parameters survive across iterations without copies.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool requires_grad = true;

    void zero_grad() {
        grad.rows = value.rows;
        grad.cols = value.cols;
        grad.v.assign(std::size_t(value.size()), 0.0);
    }
};

class Tape;

struct Var {
    int32_t idx = -1;
    bool valid() const { return idx >= 0; }
};

// Records one forward pass; backward() replays it in reverse. Single-owner
// during a pass; parameters may be shared read-only across tapes.
class Tape {
public:
    Var constant(Tensor value);
    Var leaf(Parameter& p);

    // Registers an op node. The closure reads grad(self) and accumulates into
    // its inputs' grads; `needs_grad` should be the OR over inputs.
    Var node(Tensor value, bool needs_grad, std::function<void(Tape&, Var)> backward);

    const Tensor& value(Var x) const;
    bool needs_grad(Var x) const;
    // Accumulation target; allocates zeros on first touch.
    Tensor& grad(Var x);
    bool grad_allocated(Var x) const;

    // Reverse sweep from a scalar root; adds leaf gradients into their
    // Parameters.
    void backward(Var root);

    std::size_t size() const { return nodes_.size(); }

private:
    struct NodeRec {
        Tensor value;
        Parameter* param = nullptr;
        Tensor grad;
        bool has_grad = false;
        bool needs_grad = false;
        std::function<void(Tape&, Var)> bw;
    };
    // Deque keeps value/grad references stable while new nodes are appended.
    std::deque<NodeRec> nodes_;
};

// ---- primitives ----------------------------------------------------------

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var add_row(Tape& t, Var a, Var row);  // row broadcast over a's rows
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double c);
Var add_scalar(Tape& t, Var a, double c);
Var exp(Tape& t, Var a);
Var sin(Tape& t, Var a);
Var cos(Tape& t, Var a);
Var relu(Tape& t, Var a);
Var softplus(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);
Var sum(Tape& t, Var a);
Var mean(Tape& t, Var a);
Var gather_rows(Tape& t, Var table, std::vector<int64_t> idx);
Var repeat_rows(Tape& t, Var a, int64_t times);  // each row repeated `times`
Var concat_cols(Tape& t, const std::vector<Var>& parts);
Var slice_cols(Tape& t, Var a, int64_t c0, int64_t c1);

// Batched circuit evaluation: each row of `features` feeds the program's
// feature slots; output row holds per-qubit <Z>. Backward bridges to the
// adjoint engine for both the angles and the trainable parameters.
Var quantum_layer(Tape& t, std::shared_ptr<const qsim::CircuitProgram> prog, Var params, Var features);

// ---- optimizer & schedule -------------------------------------------------

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Tensor m, v;
    int64_t step = 0;
};

void adam_step(AdamState& state, Tensor& param, const Tensor& grad, double lr,
               const AdamConfig& cfg = {});

struct LrSchedule {
    double pre_warmup_lr = 1e-8;
    double peak_lr = 1e-2;
    double final_lr = 1e-4;
    int64_t warmup_steps = 0;
    int64_t total_steps = 30000;
};

// Cosine ramp from pre_warmup_lr to peak_lr over the warmup, then exponential
// decay hitting final_lr exactly at total_steps.
double lr_at(const LrSchedule& s, int64_t step);

// ---- parameter registry ----------------------------------------------------

class ParamStore {
public:
    Parameter& create(const std::string& name, int64_t rows, int64_t cols);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    void zero_grads();
    int64_t total_size() const;

private:
    // Stable addresses: parameters are handed out by reference.
    std::vector<std::unique_ptr<Parameter>> params_;
};

}  // namespace qnerf::diff
