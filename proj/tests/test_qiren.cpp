#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qnerf/qiren.hpp"
#include "test_util.hpp"

using namespace qnerf;
using namespace qnerf::qiren;
using diff::ParamStore;
using diff::Tape;
using diff::Tensor;
using diff::Var;

TEST_CASE("parse_spec / format_spec round trip") {
    auto s = parse_spec("2L+4S");
    CHECK(s.layers == 2);
    CHECK(s.reuploads == 4);
    CHECK(format_spec(s) == "2L+4S");
    CHECK(parse_spec(" 1l + 1s ").layers == 1);
    CHECK_THROWS_AS(parse_spec("2L4S"), ConfigError);
    CHECK_THROWS_AS(parse_spec("L+S"), ConfigError);
    CHECK_THROWS_AS(parse_spec("2L+0S"), ConfigError);
}

TEST_CASE("build_layer_program: slot and entangler structure") {
    QirenLayerSpec one;
    one.n_qubits = 1;
    one.reuploads = 1;
    one.in_dim = 1;
    auto p1 = build_layer_program(one);
    CHECK(p1.n_features() == 2);
    CHECK(p1.n_params() == 3);
    int czs = 0;
    for (const auto& g : p1.ops())
        if (g.kind == qsim::GateKind::CZ) ++czs;
    CHECK(czs == 0);

    QirenLayerSpec four;
    four.n_qubits = 4;
    four.reuploads = 1;
    four.in_dim = 4;
    auto p4 = build_layer_program(four);
    czs = 0;
    for (const auto& g : p4.ops())
        if (g.kind == qsim::GateKind::CZ) ++czs;
    CHECK(czs == 4);

    QirenLayerSpec two;
    two.n_qubits = 2;
    two.reuploads = 3;
    two.in_dim = 2;
    auto p2 = build_layer_program(two);
    CHECK(p2.n_params() == 18);  // 2 qubits x 3 angles x 3 re-uploads
    CHECK(p2.n_features() == 4);

    QirenLayerSpec big;
    big.n_qubits = qsim::kMaxQubits + 1;
    CHECK_THROWS_AS(build_layer_program(big), CapacityError);
}

TEST_CASE("angle_premap: zero map, passthrough, and FD gradients") {
    Rng rng(5);
    diff::Parameter w, b;
    w.value = Tensor(1, 2, 0.0);
    b.value = Tensor(1, 2, 0.0);
    w.zero_grad();
    b.zero_grad();

    Tape t;
    Var in = t.constant(Tensor(3, 1, 0.7));
    Var angles = angle_premap(t, in, w, b);
    for (double v : t.value(angles).v) CHECK(v == 0.0);

    w.value.at(0, 0) = 1.0;
    Tape t2;
    Var a2 = angle_premap(t2, t2.constant(Tensor(2, 1, 0.37)), w, b);
    CHECK(t2.value(a2).at(0, 0) == doctest::Approx(0.37));
    CHECK(t2.value(a2).at(0, 1) == 0.0);

    // FD on the pre-map weights through a scalar loss.
    for (double& v : w.value.v) v = rng.uniform(-1, 1);
    for (double& v : b.value.v) v = rng.uniform(-1, 1);
    Tensor input(4, 1);
    for (double& v : input.v) v = rng.uniform(-1, 1);
    auto value = [&] {
        Tape tt;
        Var a = angle_premap(tt, tt.constant(input), w, b);
        return tt.value(diff::sum(tt, diff::mul(tt, a, a))).v[0];
    };
    w.zero_grad();
    {
        Tape tt;
        Var a = angle_premap(tt, tt.constant(input), w, b);
        tt.backward(diff::sum(tt, diff::mul(tt, a, a)));
    }
    const double h = 1e-5;
    for (std::size_t i = 0; i < w.value.v.size(); ++i) {
        const double x0 = w.value.v[i];
        w.value.v[i] = x0 + h;
        const double fp = value();
        w.value.v[i] = x0 - h;
        const double fm = value();
        w.value.v[i] = x0;
        CHECK(std::abs(w.grad.v[i] - (fp - fm) / (2 * h)) < 1e-5);
    }
}

TEST_CASE("qiren_forward: identity circuit reduces to readout of the ones vector") {
    ParamStore store;
    Rng rng(11);
    StackSpec spec;
    spec.layers = 2;
    spec.reuploads = 2;
    spec.n_qubits = 3;
    auto stack = QirenStack::build(store, "q", spec, 5, 4, rng);

    // Zero pre-maps and trainable angles: state stays |0...0>, <Z> = 1.
    for (auto* p : store.all())
        if (p->name != "q.head_w" && p->name != "q.head_b")
            for (double& v : p->value.v) v = 0.0;

    Tape t;
    Tensor input(3, 5);
    Rng rin(2);
    for (double& v : input.v) v = rin.uniform(-1, 1);
    Var out = stack.forward(t, t.constant(input));

    const auto& hw = store.get("q.head_w").value;
    const auto& hb = store.get("q.head_b").value;
    for (int64_t r = 0; r < 3; ++r)
        for (int64_t c = 0; c < 4; ++c) {
            double expect = hb.at(0, c);
            for (int64_t k = 0; k < 3; ++k) expect += hw.at(k, c);  // <Z> = 1 per qubit
            CHECK(t.value(out).at(r, c) == doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("qiren_forward: pre-readout measurements stay within [-1, 1]") {
    ParamStore store;
    Rng rng(13);
    StackSpec spec;
    spec.layers = 1;
    spec.reuploads = 3;
    spec.n_qubits = 4;
    auto stack = QirenStack::build(store, "q", spec, 6, 4, rng);

    const auto& layer = stack.layers()[0];
    Tape t;
    Tensor input(8, 6);
    for (double& v : input.v) v = rng.uniform(-2, 2);
    Var angles = angle_premap(t, t.constant(input), *layer.premap_w, *layer.premap_b);
    Var z = diff::quantum_layer(t, layer.program, t.leaf(*layer.angles), angles);
    for (double v : t.value(z).v) {
        CHECK(v <= 1.0 + 1e-12);
        CHECK(v >= -1.0 - 1e-12);
    }
}

TEST_CASE("qiren_forward: scalar-input stack is a trigonometric polynomial of degree <= S") {
    for (int S : {1, 2, 3}) {
        ParamStore store;
        Rng rng(101 + uint64_t(S));
        StackSpec spec;
        spec.layers = 1;
        spec.reuploads = S;
        spec.n_qubits = 1;
        auto stack = QirenStack::build(store, "q", spec, 1, 1, rng);
        // Canonical encoding: the RZ slot is unused, the RY slot carries x.
        store.get("q.layer0.premap_w").value.v = {0.0, 1.0};
        store.get("q.layer0.premap_b").value.v = {0.0, 0.0};

        const int n_points = 256;
        Tensor xs(n_points, 1);
        for (int i = 0; i < n_points; ++i) xs.v[std::size_t(i)] = 2.0 * M_PI * i / n_points;
        Tape t;
        Var out = stack.forward(t, t.constant(xs));
        std::vector<double> samples(t.value(out).v.begin(), t.value(out).v.end());

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

TEST_CASE("qiren_forward: end-to-end gradients match finite differences") {
    ParamStore store;
    Rng rng(17);
    StackSpec spec;
    spec.layers = 2;
    spec.reuploads = 2;
    spec.n_qubits = 2;
    auto stack = QirenStack::build(store, "q", spec, 3, 2, rng);

    Tensor input(3, 3);
    for (double& v : input.v) v = rng.uniform(-1, 1);
    auto build = [&](Tape& t) {
        Var out = stack.forward(t, t.constant(input));
        return diff::sum(t, diff::mul(t, out, out));
    };
    auto value = [&] {
        Tape t;
        return t.value(build(t)).v[0];
    };
    store.zero_grads();
    {
        Tape t;
        t.backward(build(t));
    }
    const double h = 1e-5;
    for (auto* p : store.all()) {
        for (std::size_t i = 0; i < p->value.v.size(); ++i) {
            const double x0 = p->value.v[i];
            p->value.v[i] = x0 + h;
            const double fp = value();
            p->value.v[i] = x0 - h;
            const double fm = value();
            p->value.v[i] = x0;
            const double fd = (fp - fm) / (2 * h);
            const double tol = 1e-4 * std::max({1.0, std::abs(fd), std::abs(p->grad.v[i])});
            CHECK(std::abs(p->grad.v[i] - fd) < tol);
        }
    }
}

TEST_CASE("count_params: empty stack, structural deltas, formula agreement") {
    QirenStack empty;
    CHECK(empty.count_params() == 0);

    // Adding one qubit to a 1-layer S=1 spec: +3S Euler angles plus the
    // pre-map/readout column growth.
    StackSpec a;
    a.layers = 1;
    a.reuploads = 1;
    a.n_qubits = 4;
    StackSpec b = a;
    b.n_qubits = 5;
    const int in_dim = 6, out_dim = 3;
    const int64_t ca = count_params_formula(a, in_dim, out_dim);
    const int64_t cb = count_params_formula(b, in_dim, out_dim);
    // premap gains 2 columns of (in_dim + 1), euler gains 3S, head gains out_dim.
    CHECK(cb - ca == 2 * (in_dim + 1) + 3 * a.reuploads + out_dim);

    ParamStore store;
    Rng rng(3);
    for (int L : {1, 2, 3}) {
        for (int S : {1, 2, 4}) {
            StackSpec s;
            s.layers = L;
            s.reuploads = S;
            s.n_qubits = 3;
            auto st = QirenStack::build(store, "g" + std::to_string(L) + "_" + std::to_string(S),
                                        s, 7, 3, rng);
            CHECK(st.count_params() == count_params_formula(s, 7, 3));
        }
    }
}

TEST_CASE("count_params: table-compat stacks reproduce the published color budgets") {
    struct Row {
        int L, S;
        int64_t params;
    };
    const Row rows[] = {
        {3, 4, 1339}, {3, 2, 955}, {3, 1, 763}, {2, 4, 1011}, {2, 2, 723},
        {2, 1, 579},  {1, 4, 683}, {1, 2, 491}, {1, 1, 395},
    };
    ParamStore store;
    Rng rng(9);
    for (const Row& r : rows) {
        StackSpec s;
        s.layers = r.L;
        s.reuploads = r.S;
        s.n_qubits = 8;
        s.table_compat = true;
        auto st = QirenStack::build(
            store, "t" + std::to_string(r.L) + "_" + std::to_string(r.S), s, 16, 3, rng);
        CHECK(st.count_params() == r.params);
        CHECK(count_params_formula(s, 16, 3) == r.params);
    }
}

TEST_CASE("table-compat stack runs forward and keeps output width") {
    ParamStore store;
    Rng rng(31);
    StackSpec s;
    s.layers = 1;
    s.reuploads = 1;
    s.n_qubits = 4;
    s.table_compat = true;
    auto st = QirenStack::build(store, "tc", s, 8, 3, rng);
    Tape t;
    Tensor input(5, 8);
    for (double& v : input.v) v = rng.uniform(-1, 1);
    Var out = st.forward(t, t.constant(input));
    CHECK(t.value(out).rows == 5);
    CHECK(t.value(out).cols == 3);

    StackSpec bad = s;
    CHECK_THROWS_AS(QirenStack::build(store, "bad", bad, 7, 3, rng), DimError);
}

TEST_CASE("describe lists layer structure for circuit inspection") {
    ParamStore store;
    Rng rng(1);
    StackSpec s;
    s.layers = 1;
    s.reuploads = 2;
    s.n_qubits = 2;
    auto st = QirenStack::build(store, "d", s, 3, 1, rng);
    auto text = st.describe();
    CHECK(text.find("1L+2S") != std::string::npos);
    CHECK(text.find("premap 3 -> 4") != std::string::npos);
    CHECK(text.find("RZ q0") != std::string::npos);
}
