#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace paint {

/// Configuration / usage errors (bad config keys, bad CLI flags). CLI exit code 2.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failures (non-finite values, CFL violations, diverged training). CLI exit code 3.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// File format / I/O errors (bad magic, truncated payload, missing files).
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// All randomness in the project flows through Rng. The generator is a
// standard-specified mt19937_64 but the double conversions are written out
// explicitly (std::*_distribution is implementation-defined), so identical
// seeds give bit-identical streams on any platform.
// ---------------------------------------------------------------------------

/// splitmix64 mix step; used to derive independent substream seeds.
inline uint64_t mix_seed(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Derive a substream seed from a base seed and one or more stream indices.
inline uint64_t derive_seed(uint64_t base, uint64_t a) { return mix_seed(base ^ mix_seed(a)); }
inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b) {
    return derive_seed(derive_seed(base, a), b);
}
inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b, uint64_t c) {
    return derive_seed(derive_seed(base, a, b), c);
}

class Rng {
public:
    explicit Rng(uint64_t seed) { reseed(seed); }

    void reseed(uint64_t seed) {
        // mt19937_64 seeding per std; state fully determined by the seed
        state_seed(seed);
        have_spare_ = false;
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) {
        // rejection sampling to avoid modulo bias
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller (explicit, portable).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.28318530717958647692 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    uint64_t next_u64() {
        if (idx_ >= kN) twist();
        uint64_t x = mt_[idx_++];
        x ^= (x >> 29) & 0x5555555555555555ull;
        x ^= (x << 17) & 0x71d67fffeda60000ull;
        x ^= (x << 37) & 0xfff7eee000000000ull;
        x ^= x >> 43;
        return x;
    }

private:
    static constexpr int kN = 312;
    uint64_t mt_[kN];
    int idx_ = kN;
    double spare_ = 0.0;
    bool have_spare_ = false;

    void state_seed(uint64_t seed) {
        mt_[0] = seed;
        for (int i = 1; i < kN; ++i)
            mt_[i] = 6364136223846793005ull * (mt_[i - 1] ^ (mt_[i - 1] >> 62)) + static_cast<uint64_t>(i);
        idx_ = kN;
    }

    void twist() {
        constexpr uint64_t kUpper = 0xffffffff80000000ull, kLower = 0x7fffffffull;
        for (int i = 0; i < kN; ++i) {
            uint64_t x = (mt_[i] & kUpper) | (mt_[(i + 1) % kN] & kLower);
            uint64_t y = x >> 1;
            if (x & 1) y ^= 0xb5026f5aa96619e9ull;
            mt_[i] = mt_[(i + 156) % kN] ^ y;
        }
        idx_ = 0;
    }
};

// ---------------------------------------------------------------------------
// Parallel execution.
// ---------------------------------------------------------------------------

/// Worker count: PAINT_THREADS env caps parallelism, 0 or unset = hardware auto.
int worker_count();

/// Run fn(i) for i in [0, n) across workers. Workers must write to disjoint
/// state; any exception is rethrown on the calling thread. Results must not
/// depend on the thread assignment (callers reduce in index order).
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

/// True if every element is finite.
bool all_finite(const std::vector<double>& v);

}  // namespace paint
