#pragma once

// Deterministic random streams.  std::normal_distribution's algorithm is
// implementation-defined, so Gaussians are produced by an explicit Box-Muller
// transform over mt19937_64: identical seeds give identical paths on every
// platform, which keeps recorded ensemble statistics reproducible.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace sch {

// Mixer from the splitmix64 generator; used to derive well-separated
// sub-stream seeds from (master seed, stream index).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)), seed_(seed) {}

    // Independent stream for e.g. one sample path; distinct indices give
    // streams seeded by distinct splitmix64 outputs.
    Rng derive(std::uint64_t stream) const {
        return Rng(seed_ ^ splitmix64(stream + 0x51u));
    }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform(); // (0,1], keeps the log finite
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 gen_;
    std::uint64_t seed_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace sch
