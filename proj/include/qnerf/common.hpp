#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace qnerf {

// Error hierarchy. Each named failure mode in the public contracts maps to
// one of these so callers (and the CLI) can distinguish usage errors from
// runtime failures.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define QNERF_ERROR_TYPE(Name)                                       \
    struct Name : Error {                                            \
        explicit Name(const std::string& msg) : Error(msg) {}        \
    }

QNERF_ERROR_TYPE(InvalidQubit);
QNERF_ERROR_TYPE(ParamArityError);
QNERF_ERROR_TYPE(UnsupportedShiftGate);
QNERF_ERROR_TYPE(CapacityError);
QNERF_ERROR_TYPE(GraphError);
QNERF_ERROR_TYPE(NonFiniteGradient);
QNERF_ERROR_TYPE(ScheduleError);
QNERF_ERROR_TYPE(InvalidCoordinate);
QNERF_ERROR_TYPE(InvalidDirection);
QNERF_ERROR_TYPE(DimError);
QNERF_ERROR_TYPE(InvalidRay);
QNERF_ERROR_TYPE(InvalidDensity);
QNERF_ERROR_TYPE(ShapeError);
QNERF_ERROR_TYPE(DatasetError);
QNERF_ERROR_TYPE(PoseError);
QNERF_ERROR_TYPE(IndexError);
QNERF_ERROR_TYPE(NonFiniteLoss);
QNERF_ERROR_TYPE(CheckpointError);
QNERF_ERROR_TYPE(ConfigError);

#undef QNERF_ERROR_TYPE

// Process-wide thread budget for the OpenMP kernels. 0 = library default.
void set_num_threads(int n);
int num_threads();

// splitmix64. Used to derive independent, resume-stable RNG streams from
// (seed, purpose, step) triples without carrying mutable generator state.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t purpose, uint64_t step = 0) {
    return splitmix64(splitmix64(seed ^ (purpose * 0x9e3779b97f4a7c15ULL)) ^ step);
}

// Small deterministic PRNG (xoshiro256**), one instance per stream.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& si : s_) {
            x = splitmix64(x);
            si = x;
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

    double normal() {
        // Marsaglia polar method; deterministic given the stream.
        for (;;) {
            double u = uniform(-1.0, 1.0);
            double v = uniform(-1.0, 1.0);
            double q = u * u + v * v;
            if (q > 0.0 && q < 1.0) {
                return u * std::sqrt(-2.0 * std::log(q) / q);
            }
        }
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

}  // namespace qnerf
