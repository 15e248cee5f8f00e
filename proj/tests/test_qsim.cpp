#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qnerf/qsim.hpp"
#include "test_util.hpp"

using namespace qnerf;
using namespace qnerf::qsim;

namespace {
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

StateVector bell_state() {
    auto prog = [] {
        CircuitBuilder b(2);
        b.h(0).cnot(0, 1);
        return std::move(b).build();
    }();
    return run_circuit(prog, {}, {});
}
}  // namespace

TEST_CASE("apply_gate: H places a qubit in equal superposition") {
    auto s = StateVector::zero_state(1);
    apply_gate(s, Gate{GateKind::H, 0, -1, {}});
    CHECK(std::abs(s.amp[0] - cplx(kInvSqrt2, 0)) < 1e-12);
    CHECK(std::abs(s.amp[1] - cplx(kInvSqrt2, 0)) < 1e-12);
}

TEST_CASE("apply_gate: RZ on |0> is a pure phase, <Z> stays 1") {
    auto s = StateVector::zero_state(1);
    apply_gate(s, Gate{GateKind::RZ, 0, -1, {}}, 0.7321);
    CHECK(std::abs(std::abs(s.amp[0]) - 1.0) < 1e-12);
    auto z = expectation(s, {});
    CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("apply_gate: CNOT maps |10> to |11> (kets written q0-first)") {
    auto s = StateVector::zero_state(2);
    apply_gate(s, Gate{GateKind::X, 0, -1, {}});  // q0 = 1, q1 = 0 -> index 1
    apply_gate(s, Gate{GateKind::CNOT, 0, 1, {}});
    CHECK(std::abs(s.amp[3] - cplx(1, 0)) < 1e-12);
    CHECK(std::abs(s.amp[1]) < 1e-12);
}

TEST_CASE("apply_gate: out-of-range target throws InvalidQubit") {
    auto s = StateVector::zero_state(2);
    CHECK_THROWS_AS(apply_gate(s, Gate{GateKind::H, 2, -1, {}}), InvalidQubit);
    CHECK_THROWS_AS(apply_gate(s, Gate{GateKind::CNOT, 0, 5, {}}), InvalidQubit);
}

TEST_CASE("run_circuit: empty program leaves |00> with unit norm") {
    auto prog = CircuitProgram(2, {});
    auto s = run_circuit(prog, {}, {});
    CHECK(std::abs(s.amp[0] - cplx(1, 0)) < 1e-15);
    CHECK(s.norm() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("run_circuit: [H(0), CZ(0,1)] leaves (|00>+|10>)/sqrt(2), CZ inert on q1=0") {
    CircuitBuilder b(2);
    b.h(0).cz(0, 1);
    auto s = run_circuit(std::move(b).build(), {}, {});
    CHECK(std::abs(s.amp[0] - cplx(kInvSqrt2, 0)) < 1e-12);
    CHECK(std::abs(s.amp[1] - cplx(kInvSqrt2, 0)) < 1e-12);
    CHECK(std::abs(s.amp[2]) < 1e-15);
    CHECK(std::abs(s.amp[3]) < 1e-15);
}

TEST_CASE("run_circuit: arity mismatch throws ParamArityError") {
    CircuitBuilder b(1);
    b.ry(0, AngleSlot::param(0));
    auto prog = std::move(b).build();
    CHECK_THROWS_AS(run_circuit(prog, {}, {}), ParamArityError);
    CHECK_THROWS_AS(run_circuit(prog, {0.1, 0.2}, {}), ParamArityError);
}

TEST_CASE("run_circuit: random 8-qubit 40-gate program matches the full Kronecker unitary") {
    Rng rng(20818);
    auto rp = testutil::random_program(rng, 8, 40);
    auto s = run_circuit(rp.prog, rp.params, rp.features);
    auto u = oracle::program_unitary(rp.prog, rp.params, rp.features);
    for (std::size_t i = 0; i < s.amp.size(); ++i) {
        // |0...0> start state: the result is the unitary's first column.
        CHECK(std::abs(std::complex<double>(s.amp[i]) - u[i][0]) < 1e-10);
    }
}

TEST_CASE("run_circuit: dense oracle equivalence across sizes and programs") {
    Rng rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 1 + int(rng.uniform_index(6));
        const int gates = 1 + int(rng.uniform_index(30));
        auto rp = testutil::random_program(rng, n, gates);
        auto s = run_circuit(rp.prog, rp.params, rp.features);
        auto ref = oracle::run_dense(rp.prog, rp.params, rp.features);
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(std::abs(std::complex<double>(s.amp[i]) - ref[i]) < 1e-10);
        CHECK(std::abs(s.norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("expectation: Z eigenstates and superpositions") {
    auto s0 = StateVector::zero_state(1);
    CHECK(expectation(s0, {})[0] == doctest::Approx(1.0).epsilon(1e-15));

    apply_gate(s0, Gate{GateKind::H, 0, -1, {}});
    CHECK(expectation(s0, {})[0] == doctest::Approx(0.0).epsilon(1e-15));

    auto bell = bell_state();
    auto z = expectation(bell, {});
    CHECK(z[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(z[1] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("measure_probabilities: basis, superposition, Bell") {
    auto s = StateVector::zero_state(1);
    apply_gate(s, Gate{GateKind::X, 0, -1, {}});
    auto p = measure_probabilities(s);
    CHECK(p[0] == doctest::Approx(0.0));
    CHECK(p[1] == doctest::Approx(1.0));

    auto h = StateVector::zero_state(1);
    apply_gate(h, Gate{GateKind::H, 0, -1, {}});
    p = measure_probabilities(h);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));

    p = measure_probabilities(bell_state());
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.0));
    CHECK(p[2] == doctest::Approx(0.0));
    CHECK(p[3] == doctest::Approx(0.5).epsilon(1e-12));

    double total = p[0] + p[1] + p[2] + p[3];
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("adjoint_gradient: single RY matches the analytic derivative of cos") {
    CircuitBuilder b(1);
    b.ry(0, AngleSlot::param(0));
    auto prog = std::move(b).build();

    auto g0 = adjoint_gradient(prog, {0.0}, {}, {}, {1.0});
    CHECK(g0.d_params[0] == doctest::Approx(0.0).epsilon(1e-14));

    auto g1 = adjoint_gradient(prog, {M_PI / 2}, {}, {}, {1.0});
    CHECK(g1.d_params[0] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("adjoint_gradient: random 4-qubit circuits match finite differences") {
    Rng rng(99);
    for (int trial = 0; trial < 8; ++trial) {
        auto rp = testutil::random_program(rng, 4, 24);
        std::vector<double> upstream(4);
        for (double& u : upstream) u = rng.uniform(-1.0, 1.0);

        auto grads = adjoint_gradient(rp.prog, rp.params, rp.features, {}, upstream);

        auto objective_params = [&](const std::vector<double>& p) {
            auto z = expectation(run_circuit(rp.prog, p, rp.features), {});
            double e = 0;
            for (std::size_t q = 0; q < z.size(); ++q) e += upstream[q] * z[q];
            return e;
        };
        auto fd_p = oracle::finite_difference(objective_params, rp.params);
        for (std::size_t i = 0; i < fd_p.size(); ++i)
            CHECK(std::abs(grads.d_params[i] - fd_p[i]) < 1e-6);

        auto objective_features = [&](const std::vector<double>& f) {
            auto z = expectation(run_circuit(rp.prog, rp.params, f), {});
            double e = 0;
            for (std::size_t q = 0; q < z.size(); ++q) e += upstream[q] * z[q];
            return e;
        };
        auto fd_f = oracle::finite_difference(objective_features, rp.features);
        for (std::size_t i = 0; i < fd_f.size(); ++i)
            CHECK(std::abs(grads.d_features[i] - fd_f[i]) < 1e-6);
    }
}

TEST_CASE("parameter_shift_gradient: RY at pi/2 gives -sin, zero-param programs give empty") {
    CircuitBuilder b(1);
    b.ry(0, AngleSlot::param(0));
    auto prog = std::move(b).build();
    auto g = parameter_shift_gradient(prog, {M_PI / 2}, {}, {});
    CHECK(g.size() == 1);
    CHECK(g[0][0] == doctest::Approx(-1.0).epsilon(1e-12));

    auto empty = parameter_shift_gradient(CircuitProgram(2, {}), {}, {}, {});
    CHECK(empty.empty());
}

TEST_CASE("parameter_shift_gradient: agrees with adjoint on random 5-qubit circuits") {
    Rng rng(1234);
    for (int trial = 0; trial < 6; ++trial) {
        auto rp = testutil::random_program(rng, 5, 20, /*rotations_only=*/true);
        auto shift = parameter_shift_gradient(rp.prog, rp.params, rp.features, {});
        for (int q = 0; q < 5; ++q) {
            std::vector<double> upstream(5, 0.0);
            upstream[std::size_t(q)] = 1.0;
            auto adj = adjoint_gradient(rp.prog, rp.params, rp.features, {}, upstream);
            for (std::size_t p = 0; p < adj.d_params.size(); ++p)
                CHECK(std::abs(shift[p][std::size_t(q)] - adj.d_params[p]) < 1e-8);
        }
    }
}

TEST_CASE("parameter_shift_gradient: trainable slot on a non-rotation gate is rejected") {
    // Builder only puts slots on rotations, so forge the gate list directly.
    std::vector<Gate> ops{Gate{GateKind::H, 0, -1, AngleSlot::param(0)}};
    CircuitProgram prog(1, std::move(ops));
    CHECK_THROWS_AS(parameter_shift_gradient(prog, {0.1}, {}, {}), UnsupportedShiftGate);
}

TEST_CASE("invariant: norm preserved to 1e-12 over long random gate sequences") {
    Rng rng(5150);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 1 + int(rng.uniform_index(8));
        auto rp = testutil::random_program(rng, n, 120);
        auto s = run_circuit(rp.prog, rp.params, rp.features);
        CHECK(std::abs(s.norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("invariant: every gate matrix is unitary to 1e-12") {
    Rng rng(31);
    for (GateKind k : {GateKind::RX, GateKind::RY, GateKind::RZ, GateKind::X, GateKind::H}) {
        const double angle = rng.uniform(-M_PI, M_PI);
        auto u = oracle::gate2x2(k, angle);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                std::complex<double> dot =
                    std::conj(u[0][i]) * u[0][j] + std::conj(u[1][i]) * u[1][j];
                CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-12);
            }
    }
    for (GateKind k : {GateKind::CZ, GateKind::CNOT}) {
        auto u = oracle::gate_unitary(2, Gate{k, 0, 1, {}}, 0.0);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                std::complex<double> dot(0, 0);
                for (std::size_t r = 0; r < 4; ++r) dot += std::conj(u[r][i]) * u[r][j];
                CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-12);
            }
    }
}

TEST_CASE("invariant: S RZ(x) re-uploads bound the Fourier degree of <Z> by S") {
    Rng rng(47);
    for (int S = 1; S <= 5; ++S) {
        std::vector<double> thetas(std::size_t(S) + 1);
        for (double& t : thetas) t = rng.uniform(-M_PI, M_PI);

        const int n_points = 256;
        std::vector<double> samples(n_points);
        for (int i = 0; i < n_points; ++i) {
            const double x = 2.0 * M_PI * double(i) / n_points;
            auto s = StateVector::zero_state(1);
            apply_gate(s, Gate{GateKind::RY, 0, -1, {}}, thetas[0]);
            for (int r = 1; r <= S; ++r) {
                apply_gate(s, Gate{GateKind::RZ, 0, -1, {}}, x);
                apply_gate(s, Gate{GateKind::RY, 0, -1, {}}, thetas[std::size_t(r)]);
            }
            samples[std::size_t(i)] = expectation(s, {})[0];
        }
        auto power = oracle::dft_power(samples);
        double total = 0, outside = 0;
        for (int k = 0; k < n_points; ++k) {
            const int freq = k <= n_points / 2 ? k : k - n_points;
            total += power[std::size_t(k)];
            if (std::abs(freq) > S) outside += power[std::size_t(k)];
        }
        CHECK(outside < 1e-8 * total);
    }
}

TEST_CASE("inspect text lists gates and slot bindings") {
    CircuitBuilder b(2);
    b.rz(0, AngleSlot::feature(0)).ry(1, AngleSlot::param(0)).cz(0, 1);
    auto prog = std::move(b).build();
    auto text = prog.to_text();
    CHECK(text.find("RZ q0") != std::string::npos);
    CHECK(text.find("feature[0]") != std::string::npos);
    CHECK(text.find("param[0]") != std::string::npos);
    CHECK(text.find("CZ q0 q1") != std::string::npos);
}
