#pragma once

#include <memory>
#include <string>
#include <vector>

#include "qnerf/diff.hpp"
#include "qnerf/qsim.hpp"

namespace qnerf::qiren {

// "xL+yS": x stacked quantum layers, y data re-uploads inside each layer.
struct StackSpec {
    int layers = 1;     // L
    int reuploads = 1;  // S
    int n_qubits = 8;
    // Structural profile that reproduces the published color-network budgets:
    // an extra input re-embedding stage, single-axis RY encoding, two
    // entangling rotation blocks per re-upload, and measurement/angle skip
    // concatenation between stages.
    bool table_compat = false;
    bool small_angle_init = false;
};

StackSpec parse_spec(const std::string& text);
std::string format_spec(const StackSpec& spec);

struct QirenLayerSpec {
    int n_qubits = 8;
    int reuploads = 1;      // S
    int in_dim = 0;         // pre-map input width
    int enc_rotations = 2;  // data rotations per qubit per re-upload: RZ,RY or RY
    int euler_blocks = 1;   // trainable rotation blocks per re-upload

    int angle_slots() const { return enc_rotations * n_qubits; }
    int trainable_angles() const { return 3 * n_qubits * euler_blocks * reuploads; }
};

// Circuit for one layer: S repetitions of [encoding rotations, trainable
// Euler rotations, CZ ring]. Feature slots are shared across re-uploads so a
// re-upload re-applies the same data angles.
qsim::CircuitProgram build_layer_program(const QirenLayerSpec& spec);

// One quantum layer bound to its trainable tensors.
struct QirenLayer {
    QirenLayerSpec spec;
    std::shared_ptr<const qsim::CircuitProgram> program;
    diff::Parameter* premap_w = nullptr;  // [in_dim, angle_slots]
    diff::Parameter* premap_b = nullptr;  // [1, angle_slots]
    diff::Parameter* angles = nullptr;    // [1, trainable_angles]
};

// Stack of QIREN layers with a final linear readout.
class QirenStack {
public:
    QirenStack() = default;

    // Creates all trainable tensors inside `store` under `prefix.*`.
    static QirenStack build(diff::ParamStore& store, const std::string& prefix,
                            const StackSpec& spec, int in_dim, int out_dim, Rng& rng);

    bool empty() const { return layers_.empty(); }
    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }
    const StackSpec& spec() const { return spec_; }
    const std::vector<QirenLayer>& layers() const { return layers_; }

    // [N, in_dim] -> [N, out_dim]; raw affine readout of the final <Z>.
    diff::Var forward(diff::Tape& t, diff::Var input) const;

    // Exact count of trainable scalars (pre-maps, Euler angles, readout).
    int64_t count_params() const;

    std::string describe() const;

private:
    StackSpec spec_;
    int in_dim_ = 0;
    int out_dim_ = 0;
    std::vector<QirenLayer> layers_;
    diff::Parameter* head_w_ = nullptr;
    diff::Parameter* head_b_ = nullptr;
};

// Closed-form count for the default structure; property tests pin the built
// stacks against it.
int64_t count_params_formula(const StackSpec& spec, int in_dim, int out_dim);

// Angle pre-map as a standalone op: angles = input . W + b.
diff::Var angle_premap(diff::Tape& t, diff::Var input, diff::Parameter& w, diff::Parameter& b);

}  // namespace qnerf::qiren
