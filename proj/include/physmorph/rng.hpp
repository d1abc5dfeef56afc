#pragma once

#include <cstdint>
#include <cmath>

#include "physmorph/linalg.hpp"

namespace physmorph {

// Deterministic PRNG (splitmix64 core). Not std::mt19937 on purpose:
// identical streams on every platform, cheap to fork into independent
// sub-streams keyed by (seed, label) so artifacts are reproducible from
// the config seed alone.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    static Rng stream(uint64_t seed, uint64_t label) {
        Rng r(seed ^ (0x9e3779b97f4a7c15ULL * (label + 1)));
        r.next_u64();  // decorrelate nearby labels
        return r;
    }

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

    // standard normal via Box-Muller (deterministic given the stream)
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // avoid log(0)
        u1 = u1 > 1e-300 ? u1 : 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Vec3 normal3() {
        double a = normal(), b = normal(), c = normal();
        return {a, b, c};
    }

    Vec3 unit_vector() {
        for (;;) {
            Vec3 v = normal3();
            double n = norm(v);
            if (n > 1e-12) return v / n;
        }
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace physmorph
