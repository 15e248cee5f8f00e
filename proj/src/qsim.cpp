#include "qnerf/qsim.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

namespace qnerf {

namespace {
std::atomic<int> g_threads{0};
}

void set_num_threads(int n) {
    g_threads.store(n < 0 ? 0 : n);
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#endif
}

int num_threads() {
    int n = g_threads.load();
    if (n > 0) return n;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace qnerf

namespace qnerf::qsim {

bool is_rotation(GateKind k) {
    return k == GateKind::RX || k == GateKind::RY || k == GateKind::RZ;
}

bool is_two_qubit(GateKind k) { return k == GateKind::CZ || k == GateKind::CNOT; }

const char* gate_name(GateKind k) {
    switch (k) {
        case GateKind::RX: return "RX";
        case GateKind::RY: return "RY";
        case GateKind::RZ: return "RZ";
        case GateKind::X: return "X";
        case GateKind::H: return "H";
        case GateKind::CZ: return "CZ";
        case GateKind::CNOT: return "CNOT";
    }
    return "?";
}

StateVector StateVector::zero_state(int n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits)
        throw CapacityError("state size out of range: " + std::to_string(n_qubits) + " qubits");
    StateVector s;
    s.n_qubits = n_qubits;
    s.amp.assign(std::size_t(1) << n_qubits, cplx(0, 0));
    s.amp[0] = cplx(1, 0);
    return s;
}

double StateVector::norm() const {
    double acc = 0.0;
    for (const cplx& a : amp) acc += double(std::norm(a));
    return std::sqrt(acc);
}

CircuitProgram::CircuitProgram(int n_qubits, std::vector<Gate> ops)
    : n_qubits_(n_qubits), ops_(std::move(ops)) {
    for (const Gate& g : ops_) {
        if (g.angle.tag == SlotTag::Param) n_params_ = std::max(n_params_, g.angle.index + 1);
        if (g.angle.tag == SlotTag::Feature) n_features_ = std::max(n_features_, g.angle.index + 1);
    }
}

std::string CircuitProgram::to_text() const {
    std::ostringstream os;
    os << "qubits: " << n_qubits_ << "\n"
       << "params: " << n_params_ << "  features: " << n_features_ << "  gates: " << ops_.size()
       << "\n";
    int i = 0;
    for (const Gate& g : ops_) {
        os << "  [" << i++ << "] " << gate_name(g.kind) << " q" << g.q0;
        if (g.q1 >= 0) os << " q" << g.q1;
        if (is_rotation(g.kind)) {
            switch (g.angle.tag) {
                case SlotTag::Constant: os << "  angle=" << g.angle.value; break;
                case SlotTag::Param: os << "  angle=param[" << g.angle.index << "]"; break;
                case SlotTag::Feature: os << "  angle=feature[" << g.angle.index << "]"; break;
            }
        }
        os << "\n";
    }
    return os.str();
}

CircuitBuilder::CircuitBuilder(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits)
        throw CapacityError("circuit qubit count out of range: " + std::to_string(n_qubits));
}

void CircuitBuilder::check_qubit(int q) const {
    if (q < 0 || q >= n_qubits_)
        throw InvalidQubit("qubit index " + std::to_string(q) + " out of range for " +
                           std::to_string(n_qubits_) + " qubits");
}

CircuitBuilder& CircuitBuilder::rot(GateKind k, int q, AngleSlot a) {
    check_qubit(q);
    ops_.push_back(Gate{k, q, -1, a});
    return *this;
}

CircuitBuilder& CircuitBuilder::x(int q) {
    check_qubit(q);
    ops_.push_back(Gate{GateKind::X, q, -1, {}});
    return *this;
}

CircuitBuilder& CircuitBuilder::h(int q) {
    check_qubit(q);
    ops_.push_back(Gate{GateKind::H, q, -1, {}});
    return *this;
}

CircuitBuilder& CircuitBuilder::cz(int a, int b) {
    check_qubit(a);
    check_qubit(b);
    if (a == b) throw InvalidQubit("CZ qubits must be distinct");
    ops_.push_back(Gate{GateKind::CZ, a, b, {}});
    return *this;
}

CircuitBuilder& CircuitBuilder::cnot(int control, int target) {
    check_qubit(control);
    check_qubit(target);
    if (control == target) throw InvalidQubit("CNOT qubits must be distinct");
    ops_.push_back(Gate{GateKind::CNOT, control, target, {}});
    return *this;
}

CircuitProgram CircuitBuilder::build() && {
    return CircuitProgram(n_qubits_, std::move(ops_));
}

namespace {

constexpr std::ptrdiff_t kAmpParallelThreshold = 1 << 14;

inline bool use_amp_parallel(std::ptrdiff_t n) {
#ifdef _OPENMP
    return n >= kAmpParallelThreshold && !omp_in_parallel();
#else
    (void)n;
    return false;
#endif
}

// 2x2 kernel over the (i, i|mask) amplitude pairs. The parallel branch is
// taken only for big standalone states; batched evaluation parallelizes over
// rows instead and must not pay per-gate region setup. Writes are disjoint,
// so both branches produce identical results.
template <typename F>
inline void for_each_pair(std::vector<cplx>& amp, std::size_t mask, F&& f) {
    const std::ptrdiff_t n = std::ptrdiff_t(amp.size());
#ifdef _OPENMP
    if (use_amp_parallel(n)) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            if ((std::size_t(i) & mask) == 0) f(std::size_t(i), std::size_t(i) | mask);
        }
        return;
    }
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        if ((std::size_t(i) & mask) == 0) f(std::size_t(i), std::size_t(i) | mask);
    }
}

inline void apply_single(std::vector<cplx>& amp, int q, cplx u00, cplx u01, cplx u10, cplx u11) {
    for_each_pair(amp, std::size_t(1) << q, [&](std::size_t i0, std::size_t i1) {
        const cplx a = amp[i0], b = amp[i1];
        amp[i0] = u00 * a + u01 * b;
        amp[i1] = u10 * a + u11 * b;
    });
}

}  // namespace

void apply_gate(StateVector& state, const Gate& gate, double angle) {
    const int n = state.n_qubits;
    auto check = [&](int q) {
        if (q < 0 || q >= n)
            throw InvalidQubit("gate target " + std::to_string(q) + " out of range for " +
                               std::to_string(n) + " qubits");
    };
    check(gate.q0);
    if (is_two_qubit(gate.kind)) {
        check(gate.q1);
        if (gate.q0 == gate.q1) throw InvalidQubit("two-qubit gate targets must be distinct");
    }

    std::vector<cplx>& amp = state.amp;
    const real c = real(std::cos(angle / 2));
    const real s = real(std::sin(angle / 2));
    switch (gate.kind) {
        case GateKind::RX:
            apply_single(amp, gate.q0, cplx(c, 0), cplx(0, -s), cplx(0, -s), cplx(c, 0));
            break;
        case GateKind::RY:
            apply_single(amp, gate.q0, cplx(c, 0), cplx(-s, 0), cplx(s, 0), cplx(c, 0));
            break;
        case GateKind::RZ:
            apply_single(amp, gate.q0, cplx(c, -s), cplx(0, 0), cplx(0, 0), cplx(c, s));
            break;
        case GateKind::X:
            for_each_pair(amp, std::size_t(1) << gate.q0,
                          [&](std::size_t i0, std::size_t i1) { std::swap(amp[i0], amp[i1]); });
            break;
        case GateKind::H: {
            const real r = real(1.0 / std::sqrt(2.0));
            apply_single(amp, gate.q0, cplx(r, 0), cplx(r, 0), cplx(r, 0), cplx(-r, 0));
            break;
        }
        case GateKind::CZ: {
            const std::size_t m = (std::size_t(1) << gate.q0) | (std::size_t(1) << gate.q1);
            const std::ptrdiff_t dim = std::ptrdiff_t(amp.size());
#ifdef _OPENMP
            if (use_amp_parallel(dim)) {
#pragma omp parallel for schedule(static)
                for (std::ptrdiff_t i = 0; i < dim; ++i)
                    if ((std::size_t(i) & m) == m) amp[i] = -amp[i];
                break;
            }
#endif
            for (std::ptrdiff_t i = 0; i < dim; ++i)
                if ((std::size_t(i) & m) == m) amp[i] = -amp[i];
            break;
        }
        case GateKind::CNOT: {
            const std::size_t cm = std::size_t(1) << gate.q0;
            const std::size_t tm = std::size_t(1) << gate.q1;
            const std::ptrdiff_t dim = std::ptrdiff_t(amp.size());
            for (std::ptrdiff_t i = 0; i < dim; ++i) {
                const std::size_t u = std::size_t(i);
                if ((u & cm) && !(u & tm)) std::swap(amp[u], amp[u | tm]);
            }
            break;
        }
    }
}

StateVector apply_gate(const StateVector& state, const Gate& gate) {
    StateVector out = state;
    apply_gate(out, gate, gate.angle.tag == SlotTag::Constant ? gate.angle.value : 0.0);
    return out;
}

namespace {

inline double resolve_angle(const Gate& g, const std::vector<double>& params,
                            const std::vector<double>& features) {
    switch (g.angle.tag) {
        case SlotTag::Constant: return g.angle.value;
        case SlotTag::Param: return params[std::size_t(g.angle.index)];
        case SlotTag::Feature: return features[std::size_t(g.angle.index)];
    }
    return 0.0;
}

inline void check_arity(const CircuitProgram& prog, const std::vector<double>& params,
                        const std::vector<double>& features) {
    if (int(params.size()) != prog.n_params())
        throw ParamArityError("expected " + std::to_string(prog.n_params()) + " params, got " +
                              std::to_string(params.size()));
    if (int(features.size()) != prog.n_features())
        throw ParamArityError("expected " + std::to_string(prog.n_features()) +
                              " features, got " + std::to_string(features.size()));
}

void run_into(StateVector& psi, const CircuitProgram& prog, const std::vector<double>& params,
              const std::vector<double>& features) {
    psi.n_qubits = prog.n_qubits();
    psi.amp.assign(std::size_t(1) << prog.n_qubits(), cplx(0, 0));
    psi.amp[0] = cplx(1, 0);
    for (const Gate& g : prog.ops()) apply_gate(psi, g, resolve_angle(g, params, features));
}

}  // namespace

StateVector run_circuit(const CircuitProgram& prog, const std::vector<double>& params,
                        const std::vector<double>& features) {
    check_arity(prog, params, features);
    StateVector psi;
    run_into(psi, prog, params, features);
    return psi;
}

std::vector<double> expectation(const StateVector& state, const Observable&) {
    const int n = state.n_qubits;
    std::vector<double> z(std::size_t(n), 0.0);
    for (std::size_t i = 0; i < state.amp.size(); ++i) {
        const double p = double(std::norm(state.amp[i]));
        if (p == 0.0) continue;
        for (int q = 0; q < n; ++q) z[std::size_t(q)] += ((i >> q) & 1) ? -p : p;
    }
    return z;
}

std::vector<double> measure_probabilities(const StateVector& state) {
    std::vector<double> p(state.amp.size());
    for (std::size_t i = 0; i < state.amp.size(); ++i) p[i] = double(std::norm(state.amp[i]));
    return p;
}

namespace {

// Inverse of a gate with the given resolved angle.
void apply_gate_dagger(StateVector& psi, const Gate& g, double angle) {
    if (is_rotation(g.kind)) {
        apply_gate(psi, g, -angle);
    } else {
        apply_gate(psi, g, 0.0);  // X, H, CZ, CNOT are self-inverse
    }
}

// Im(<lam| P |psi>) for the rotation generator P acting on qubit q.
double generator_overlap(const StateVector& lam, const StateVector& psi, GateKind kind, int q) {
    const std::size_t mask = std::size_t(1) << q;
    std::complex<double> acc(0, 0);
    for (std::size_t i = 0; i < psi.amp.size(); ++i) {
        std::complex<double> pv;
        const std::complex<double> a(psi.amp[i]);
        switch (kind) {
            case GateKind::RX: {  // X|i> swaps the bit
                const std::complex<double> b(psi.amp[i ^ mask]);
                pv = b;
                break;
            }
            case GateKind::RY: {  // Y = i(|1><0| - |0><1|) on the bit
                const std::complex<double> b(psi.amp[i ^ mask]);
                pv = (i & mask) ? std::complex<double>(0, 1) * b
                                : std::complex<double>(0, -1) * b;
                break;
            }
            case GateKind::RZ:
                pv = (i & mask) ? -a : a;
                break;
            default:
                return 0.0;
        }
        acc += std::conj(std::complex<double>(lam.amp[i])) * pv;
    }
    return acc.imag();
}

}  // namespace

AdjointGradients AdjointWorkspace::run(const CircuitProgram& prog,
                                       const std::vector<double>& params,
                                       const std::vector<double>& features,
                                       const Observable& obs, const std::vector<double>& upstream) {
    check_arity(prog, params, features);
    if (int(upstream.size()) != prog.n_qubits())
        throw ParamArityError("upstream must have one cotangent per qubit");
    (void)obs;

    run_into(psi_, prog, params, features);

    // lam = (sum_q u_q Z_q) |psi>, a diagonal operator in the Z basis.
    const int n = prog.n_qubits();
    lam_.n_qubits = n;
    lam_.amp.resize(psi_.amp.size());
    for (std::size_t i = 0; i < psi_.amp.size(); ++i) {
        double d = 0.0;
        for (int q = 0; q < n; ++q) d += ((i >> q) & 1) ? -upstream[std::size_t(q)]
                                                        : upstream[std::size_t(q)];
        lam_.amp[i] = psi_.amp[i] * real(d);
    }

    AdjointGradients out;
    out.d_params.assign(std::size_t(prog.n_params()), 0.0);
    out.d_features.assign(std::size_t(prog.n_features()), 0.0);

    // Backward sweep: with psi_k the state after gate k,
    // dE/dtheta_k = Im(<lam_k| P |psi_k>) for G = exp(-i theta P / 2).
    const auto& ops = prog.ops();
    for (std::size_t k = ops.size(); k-- > 0;) {
        const Gate& g = ops[k];
        const double angle = resolve_angle(g, params, features);
        if (is_rotation(g.kind) && g.angle.tag != SlotTag::Constant) {
            const double grad = generator_overlap(lam_, psi_, g.kind, g.q0);
            if (g.angle.tag == SlotTag::Param)
                out.d_params[std::size_t(g.angle.index)] += grad;
            else
                out.d_features[std::size_t(g.angle.index)] += grad;
        }
        apply_gate_dagger(psi_, g, angle);
        apply_gate_dagger(lam_, g, angle);
    }
    return out;
}

const StateVector& AdjointWorkspace::forward(const CircuitProgram& prog,
                                             const std::vector<double>& params,
                                             const std::vector<double>& features) {
    check_arity(prog, params, features);
    run_into(psi_, prog, params, features);
    return psi_;
}

AdjointGradients adjoint_gradient(const CircuitProgram& prog, const std::vector<double>& params,
                                  const std::vector<double>& features, const Observable& obs,
                                  const std::vector<double>& upstream) {
    AdjointWorkspace ws;
    return ws.run(prog, params, features, obs, upstream);
}

std::vector<std::vector<double>> parameter_shift_gradient(const CircuitProgram& prog,
                                                          const std::vector<double>& params,
                                                          const std::vector<double>& features,
                                                          const Observable& obs) {
    check_arity(prog, params, features);
    for (const Gate& g : prog.ops())
        if (g.angle.tag == SlotTag::Param && !is_rotation(g.kind))
            throw UnsupportedShiftGate("trainable slot on non-rotation gate");

    const int n = prog.n_qubits();
    const int p_count = prog.n_params();
    std::vector<std::vector<double>> grad(std::size_t(p_count),
                                          std::vector<double>(std::size_t(n), 0.0));

    // Shift one gate occurrence at a time; shared slots sum over occurrences.
    const auto& ops = prog.ops();
    StateVector psi;
    for (std::size_t k = 0; k < ops.size(); ++k) {
        const Gate& g = ops[k];
        if (g.angle.tag != SlotTag::Param) continue;
        const int p = g.angle.index;
        std::vector<double> e_plus, e_minus;
        for (int sgn = 0; sgn < 2; ++sgn) {
            psi.n_qubits = n;
            psi.amp.assign(std::size_t(1) << n, cplx(0, 0));
            psi.amp[0] = cplx(1, 0);
            const double shift = (sgn == 0 ? 0.5 : -0.5) * M_PI;
            for (std::size_t j = 0; j < ops.size(); ++j) {
                double a = resolve_angle(ops[j], params, features);
                if (j == k) a += shift;
                apply_gate(psi, ops[j], a);
            }
            auto e = expectation(psi, obs);
            if (sgn == 0)
                e_plus = std::move(e);
            else
                e_minus = std::move(e);
        }
        for (int q = 0; q < n; ++q)
            grad[std::size_t(p)][std::size_t(q)] +=
                0.5 * (e_plus[std::size_t(q)] - e_minus[std::size_t(q)]);
    }
    return grad;
}

}  // namespace qnerf::qsim
