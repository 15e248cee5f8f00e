#include "qnerf/qiren.hpp"

#include <cmath>
#include <sstream>

namespace qnerf::qiren {

using diff::Parameter;
using diff::Tape;
using diff::Tensor;
using diff::Var;
using qsim::AngleSlot;
using qsim::CircuitBuilder;
using qsim::CircuitProgram;

StackSpec parse_spec(const std::string& text) {
    // Accepts "3L+4S" (case-insensitive, optional spaces).
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(char(std::toupper(c)));
    const auto lpos = s.find('L');
    const auto plus = s.find('+');
    const auto spos = s.find('S');
    if (lpos == std::string::npos || plus == std::string::npos || spos == std::string::npos ||
        !(lpos < plus && plus < spos) || spos + 1 != s.size())
        throw ConfigError("bad QIREN spec string: '" + text + "' (expected e.g. \"2L+4S\")");
    StackSpec spec;
    try {
        spec.layers = std::stoi(s.substr(0, lpos));
        spec.reuploads = std::stoi(s.substr(plus + 1, spos - plus - 1));
    } catch (const std::exception&) {
        throw ConfigError("bad QIREN spec string: '" + text + "'");
    }
    if (spec.layers < 0 || spec.reuploads < 1)
        throw ConfigError("QIREN spec out of range: '" + text + "'");
    return spec;
}

std::string format_spec(const StackSpec& spec) {
    return std::to_string(spec.layers) + "L+" + std::to_string(spec.reuploads) + "S";
}

CircuitProgram build_layer_program(const QirenLayerSpec& spec) {
    if (spec.n_qubits < 1 || spec.n_qubits > qsim::kMaxQubits)
        throw CapacityError("layer qubit count exceeds the simulator cap");
    CircuitBuilder b(spec.n_qubits);
    int param_idx = 0;
    for (int r = 0; r < spec.reuploads; ++r) {
        // Encoding sub-block: same feature slots every re-upload.
        for (int q = 0; q < spec.n_qubits; ++q) {
            if (spec.enc_rotations == 2) {
                b.rz(q, AngleSlot::feature(2 * q));
                b.ry(q, AngleSlot::feature(2 * q + 1));
            } else {
                b.ry(q, AngleSlot::feature(q));
            }
        }
        // Trainable Euler sub-blocks: U_rot = Rz(psi) Ry(theta) Rz(phi),
        // rightmost applied first, then the CZ ring entangler.
        for (int blk = 0; blk < spec.euler_blocks; ++blk) {
            for (int q = 0; q < spec.n_qubits; ++q) {
                b.rz(q, AngleSlot::param(param_idx++));
                b.ry(q, AngleSlot::param(param_idx++));
                b.rz(q, AngleSlot::param(param_idx++));
            }
            if (spec.n_qubits >= 2)
                for (int q = 0; q < spec.n_qubits; ++q) b.cz(q, (q + 1) % spec.n_qubits);
        }
    }
    return std::move(b).build();
}

namespace {

void init_linear(Parameter& w, Parameter& b, Rng& rng) {
    const double bound = 1.0 / std::sqrt(double(std::max<int64_t>(1, w.value.rows)));
    for (double& v : w.value.v) v = rng.uniform(-bound, bound);
    for (double& v : b.value.v) v = rng.uniform(-bound, bound);
}

}  // namespace

QirenStack QirenStack::build(diff::ParamStore& store, const std::string& prefix,
                             const StackSpec& spec, int in_dim, int out_dim, Rng& rng) {
    QirenStack st;
    st.spec_ = spec;
    st.in_dim_ = in_dim;
    st.out_dim_ = out_dim;
    if (spec.layers == 0) return st;

    const int n = spec.n_qubits;
    const int stages = spec.table_compat ? spec.layers + 1 : spec.layers;
    if (spec.table_compat && in_dim != 2 * n)
        throw DimError("table-compat stacks take in_dim == 2 * n_qubits (got " +
                       std::to_string(in_dim) + ")");

    int d = in_dim;
    for (int i = 0; i < stages; ++i) {
        QirenLayerSpec ls;
        ls.n_qubits = n;
        ls.reuploads = spec.reuploads;
        ls.in_dim = d;
        ls.enc_rotations = spec.table_compat ? 1 : 2;
        ls.euler_blocks = spec.table_compat ? 2 : 1;

        QirenLayer layer;
        layer.spec = ls;
        layer.program = std::make_shared<const CircuitProgram>(build_layer_program(ls));
        const std::string base = prefix + ".layer" + std::to_string(i);
        layer.premap_w = &store.create(base + ".premap_w", ls.in_dim, ls.angle_slots());
        layer.premap_b = &store.create(base + ".premap_b", 1, ls.angle_slots());
        layer.angles = &store.create(base + ".angles", 1, ls.trainable_angles());
        init_linear(*layer.premap_w, *layer.premap_b, rng);
        const double amax = spec.small_angle_init ? 0.1 : M_PI;
        for (double& v : layer.angles->value.v) v = rng.uniform(-amax, amax);
        st.layers_.push_back(layer);

        d = spec.table_compat ? 2 * n : n;
    }
    st.head_w_ = &store.create(prefix + ".head_w", n, out_dim);
    st.head_b_ = &store.create(prefix + ".head_b", 1, out_dim);
    init_linear(*st.head_w_, *st.head_b_, rng);
    return st;
}

Var angle_premap(Tape& t, Var input, Parameter& w, Parameter& b) {
    const Tensor& iv = t.value(input);
    if (iv.cols != w.value.rows) throw DimError("angle_premap input width mismatch");
    return diff::add_row(t, diff::matmul(t, input, t.leaf(w)), t.leaf(b));
}

Var QirenStack::forward(Tape& t, Var input) const {
    const Tensor& iv = t.value(input);
    if (int(iv.cols) != in_dim_) throw DimError("stack input width mismatch");
    if (layers_.empty()) throw DimError("forward on an empty stack");

    Var u = input;
    Var z{};
    for (const QirenLayer& layer : layers_) {
        Var angles = angle_premap(t, u, *layer.premap_w, *layer.premap_b);
        z = diff::quantum_layer(t, layer.program, t.leaf(*layer.angles), angles);
        u = spec_.table_compat ? diff::concat_cols(t, {z, angles}) : z;
    }
    return diff::add_row(t, diff::matmul(t, z, t.leaf(*head_w_)), t.leaf(*head_b_));
}

int64_t QirenStack::count_params() const {
    int64_t n = 0;
    for (const QirenLayer& layer : layers_)
        n += layer.premap_w->value.size() + layer.premap_b->value.size() +
             layer.angles->value.size();
    if (head_w_) n += head_w_->value.size() + head_b_->value.size();
    return n;
}

int64_t count_params_formula(const StackSpec& spec, int in_dim, int out_dim) {
    if (spec.layers == 0) return 0;
    const int64_t n = spec.n_qubits;
    const int64_t S = spec.reuploads;
    if (spec.table_compat) {
        // (L+1) stages of [premap (2n -> n) + 2 Euler blocks per re-upload]
        // plus the readout head.
        const int64_t per_stage = n * (2 * n + 1) + 2 * 3 * n * S;
        return (spec.layers + 1) * per_stage + (n + 1) * out_dim;
    }
    const int64_t slots = 2 * n;
    int64_t total = 0;
    int64_t d = in_dim;
    for (int i = 0; i < spec.layers; ++i) {
        total += (d + 1) * slots + 3 * n * S;
        d = n;
    }
    total += (n + 1) * out_dim;
    return total;
}

std::string QirenStack::describe() const {
    std::ostringstream os;
    os << "QIREN stack " << format_spec(spec_) << "  (" << spec_.n_qubits << " qubits, in "
       << in_dim_ << ", out " << out_dim_ << (spec_.table_compat ? ", table-compat" : "")
       << ", params " << count_params() << ")\n";
    int i = 0;
    for (const QirenLayer& layer : layers_) {
        os << "-- layer " << i++ << ": premap " << layer.spec.in_dim << " -> "
           << layer.spec.angle_slots() << ", " << layer.spec.trainable_angles()
           << " trainable angles\n";
        os << layer.program->to_text();
    }
    return os.str();
}

}  // namespace qnerf::qiren
