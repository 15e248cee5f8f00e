#pragma once

#include <vector>

#include "qnerf/common.hpp"
#include "qnerf/qsim.hpp"

namespace testutil {

struct RandomProgram {
    qnerf::qsim::CircuitProgram prog;
    std::vector<double> params;
    std::vector<double> features;
};

// Random gate sequence drawing from the full gate set; rotation angles are
// split between trainable, feature, and constant slots.
inline RandomProgram random_program(qnerf::Rng& rng, int n_qubits, int n_gates,
                                    bool rotations_only = false) {
    using namespace qnerf::qsim;
    CircuitBuilder b(n_qubits);
    int n_params = 0, n_features = 0;
    std::vector<Gate> staged;
    for (int g = 0; g < n_gates; ++g) {
        const int q = int(rng.uniform_index(uint64_t(n_qubits)));
        int kind = rotations_only ? int(rng.uniform_index(3))
                                  : int(rng.uniform_index(n_qubits > 1 ? 7 : 5));
        AngleSlot slot;
        if (kind < 3) {
            switch (rng.uniform_index(3)) {
                case 0: slot = AngleSlot::param(n_params++); break;
                case 1: slot = AngleSlot::feature(n_features++); break;
                default: slot = AngleSlot::constant(rng.uniform(-M_PI, M_PI)); break;
            }
        }
        switch (kind) {
            case 0: b.rx(q, slot); break;
            case 1: b.ry(q, slot); break;
            case 2: b.rz(q, slot); break;
            case 3: b.x(q); break;
            case 4: b.h(q); break;
            case 5: {
                int p = (q + 1 + int(rng.uniform_index(uint64_t(n_qubits - 1)))) % n_qubits;
                b.cz(q, p);
                break;
            }
            default: {
                int p = (q + 1 + int(rng.uniform_index(uint64_t(n_qubits - 1)))) % n_qubits;
                b.cnot(q, p);
                break;
            }
        }
    }
    RandomProgram out{std::move(b).build(), {}, {}};
    out.params.resize(std::size_t(n_params));
    out.features.resize(std::size_t(n_features));
    for (double& v : out.params) v = rng.uniform(-M_PI, M_PI);
    for (double& v : out.features) v = rng.uniform(-M_PI, M_PI);
    return out;
}

}  // namespace testutil
