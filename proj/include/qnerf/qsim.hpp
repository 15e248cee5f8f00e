#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "qnerf/common.hpp"

namespace qnerf::qsim {

#ifdef QNERF_QSIM_REAL32
using real = float;
#else
using real = double;
#endif
using cplx = std::complex<real>;

constexpr int kMaxQubits = 12;

// Dense state vector over n qubits, little-endian: qubit 0 is the least
// significant bit of the basis index.
struct StateVector {
    int n_qubits = 0;
    std::vector<cplx> amp;

    static StateVector zero_state(int n_qubits);
    std::size_t dim() const { return amp.size(); }
    double norm() const;
};

enum class GateKind : uint8_t { RX, RY, RZ, X, H, CZ, CNOT };

bool is_rotation(GateKind k);
bool is_two_qubit(GateKind k);
const char* gate_name(GateKind k);

// Where a rotation gate's angle comes from when the program runs.
enum class SlotTag : uint8_t { Constant, Param, Feature };

struct AngleSlot {
    SlotTag tag = SlotTag::Constant;
    int index = -1;     // dense index into params / features
    double value = 0.0; // constant angle

    static AngleSlot constant(double v) { return {SlotTag::Constant, -1, v}; }
    static AngleSlot param(int i) { return {SlotTag::Param, i, 0.0}; }
    static AngleSlot feature(int i) { return {SlotTag::Feature, i, 0.0}; }
};

struct Gate {
    GateKind kind;
    int q0 = 0;          // target (single-qubit) or control (CNOT) / first (CZ)
    int q1 = -1;         // target of CNOT, second qubit of CZ
    AngleSlot angle;     // rotation gates only
};

// Immutable gate list with dense parameter/feature slot maps.
class CircuitProgram {
public:
    CircuitProgram(int n_qubits, std::vector<Gate> ops);

    int n_qubits() const { return n_qubits_; }
    int n_params() const { return n_params_; }
    int n_features() const { return n_features_; }
    const std::vector<Gate>& ops() const { return ops_; }

    std::string to_text() const;

private:
    int n_qubits_;
    int n_params_ = 0;
    int n_features_ = 0;
    std::vector<Gate> ops_;
};

class CircuitBuilder {
public:
    explicit CircuitBuilder(int n_qubits);

    CircuitBuilder& rx(int q, AngleSlot a) { return rot(GateKind::RX, q, a); }
    CircuitBuilder& ry(int q, AngleSlot a) { return rot(GateKind::RY, q, a); }
    CircuitBuilder& rz(int q, AngleSlot a) { return rot(GateKind::RZ, q, a); }
    CircuitBuilder& x(int q);
    CircuitBuilder& h(int q);
    CircuitBuilder& cz(int a, int b);
    CircuitBuilder& cnot(int control, int target);

    CircuitProgram build() &&;

private:
    CircuitBuilder& rot(GateKind k, int q, AngleSlot a);
    void check_qubit(int q) const;

    int n_qubits_;
    std::vector<Gate> ops_;
};

struct Observable {
    enum class Kind { PerQubitZ } kind = Kind::PerQubitZ;
};

// Applies a single gate in place with a resolved angle (strided bitmask
// kernel, no matrices).
void apply_gate(StateVector& state, const Gate& gate, double angle = 0.0);

// Convenience wrapper matching the one-shot contract: returns gate |state>.
StateVector apply_gate(const StateVector& state, const Gate& gate);

StateVector run_circuit(const CircuitProgram& prog,
                        const std::vector<double>& params,
                        const std::vector<double>& features);

// Per-qubit <Z>, component q in [-1, 1].
std::vector<double> expectation(const StateVector& state, const Observable& obs);

// |<i|psi>|^2 for every basis index i.
std::vector<double> measure_probabilities(const StateVector& state);

struct AdjointGradients {
    std::vector<double> d_params;
    std::vector<double> d_features;
};

// Exact reverse-mode gradient of upstream . <Z> via one forward pass and one
// backward sweep (three state-sized ops per gate, O(2^n) memory).
AdjointGradients adjoint_gradient(const CircuitProgram& prog,
                                  const std::vector<double>& params,
                                  const std::vector<double>& features,
                                  const Observable& obs,
                                  const std::vector<double>& upstream);

// Reusable workspace so batched evaluation does not reallocate state buffers.
class AdjointWorkspace {
public:
    AdjointGradients run(const CircuitProgram& prog,
                         const std::vector<double>& params,
                         const std::vector<double>& features,
                         const Observable& obs,
                         const std::vector<double>& upstream);

    // Forward only; leaves the final state in `state()`.
    const StateVector& forward(const CircuitProgram& prog,
                               const std::vector<double>& params,
                               const std::vector<double>& features);
    const StateVector& state() const { return psi_; }

private:
    StateVector psi_, lam_;
};

// (P x n_qubits) matrix, entry (p, q) = 1/2 [<Z_q>(theta_p + pi/2) -
// <Z_q>(theta_p - pi/2)], summed over occurrences of slot p.
std::vector<std::vector<double>> parameter_shift_gradient(
    const CircuitProgram& prog,
    const std::vector<double>& params,
    const std::vector<double>& features,
    const Observable& obs);

}  // namespace qnerf::qsim
