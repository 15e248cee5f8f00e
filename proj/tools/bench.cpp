// Benchmark comparing the serial reference paths against the OpenMP kernels:
// gate application at growing qubit counts, batched circuit evaluation with
// adjoint gradients, dense matmul, and a full fixture-view render.

#include <chrono>
#include <filesystem>
#include <cstdio>
#include <functional>

#include "qnerf/diff.hpp"
#include "qnerf/fixture.hpp"
#include "qnerf/qiren.hpp"
#include "qnerf/trainer.hpp"

using namespace qnerf;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
    fn();  // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < repeats; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

void row(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-34s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, parallel_ms,
                parallel_ms > 0 ? serial_ms / parallel_ms : 0.0);
}

void bench_gates() {
    for (int n : {8, 10, 12}) {
        Rng rng(7);
        qsim::CircuitBuilder b(n);
        for (int i = 0; i < 64; ++i) {
            const int q = int(rng.uniform_index(uint64_t(n)));
            b.ry(q, qsim::AngleSlot::constant(rng.uniform(-M_PI, M_PI)));
            b.cz(q, (q + 1) % n);
        }
        auto prog = std::move(b).build();
        auto run = [&] {
            auto s = qsim::run_circuit(prog, {}, {});
            (void)s;
        };
        set_num_threads(1);
        const double serial = time_ms(run, 20);
        set_num_threads(0);
        const double parallel = time_ms(run, 20);
        char name[64];
        std::snprintf(name, sizeof(name), "gate kernels, %d qubits x 128 gates", n);
        row(name, serial, parallel);
    }
}

void bench_quantum_batch() {
    diff::ParamStore store;
    Rng rng(3);
    qiren::StackSpec spec;
    spec.layers = 1;
    spec.reuploads = 2;
    spec.n_qubits = 6;
    auto stack = qiren::QirenStack::build(store, "b", spec, 8, 3, rng);
    diff::Tensor input(4096, 8);
    for (double& v : input.v) v = rng.uniform(-1, 1);
    auto run = [&] {
        diff::Tape t;
        auto out = stack.forward(t, t.constant(input));
        t.backward(diff::sum(t, diff::mul(t, out, out)));
        store.zero_grads();
    };
    set_num_threads(1);
    const double serial = time_ms(run, 3);
    set_num_threads(0);
    const double parallel = time_ms(run, 3);
    row("qiren forward+adjoint, 4096 rows", serial, parallel);
}

void bench_matmul() {
    Rng rng(5);
    diff::Tensor a(20000, 32), b(32, 64);
    for (double& v : a.v) v = rng.uniform(-1, 1);
    for (double& v : b.v) v = rng.uniform(-1, 1);
    auto run = [&] {
        diff::Tape t;
        auto y = diff::matmul(t, t.constant(a), t.constant(b));
        (void)y;
    };
    set_num_threads(1);
    const double serial = time_ms(run, 10);
    set_num_threads(0);
    const double parallel = time_ms(run, 10);
    row("matmul 20000x32 . 32x64", serial, parallel);
}

void bench_render() {
    auto dir = std::filesystem::temp_directory_path() / "qnerf_bench_scene";
    std::filesystem::remove_all(dir);
    fixture::SceneOptions opts;
    opts.n_views = 3;
    opts.width = 64;
    opts.height = 36;
    auto manifest = fixture::write_scene(dir.string(), opts);
    data::LoadOptions load;
    load.split.train_fraction = 0.99;
    auto ds = data::load_dataset(manifest, load);

    config::RunConfig cfg;
    cfg.hash_preset = "custom";
    cfg.hash_levels = 6;
    cfg.hash_features_per_level = 2;
    cfg.hash_base_resolution = 16;
    cfg.hash_max_resolution = 128;
    cfg.hash_table_log2 = 14;
    cfg.proposal_stages = {64, 32};
    cfg.final_samples = 16;
    cfg.proposal_levels = {4, 4};
    cfg.proposal_table_log2 = {12, 12};
    cfg.near = 1.0;
    cfg.far = 6.0;
    cfg.threads = 0;
    train::Trainer trainer(cfg, ds);
    auto run = [&] { auto im = trainer.render_view(ds.frames[0].camera); (void)im; };
    set_num_threads(1);
    const double serial = time_ms(run, 2);
    set_num_threads(0);
    const double parallel = time_ms(run, 2);
    row("render 64x36 fixture view", serial, parallel);
    std::filesystem::remove_all(dir);
}

}  // namespace

int main() {
    std::printf("%-34s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");
    bench_gates();
    bench_quantum_batch();
    bench_matmul();
    bench_render();
    return 0;
}
