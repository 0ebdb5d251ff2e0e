#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "aikd/errors.hpp"

namespace aikd {

// Deterministic random stream. All draws are derived from raw 64-bit engine
// output with fixed arithmetic, so sequences are reproducible across
// platforms and standard-library versions (std::uniform_real_distribution is
// implementation-defined and deliberately avoided).
//
// Named sub-streams let independent pipeline stages (data generation,
// weight init, landmark perturbation, epoch shuffling) draw from one root
// seed without interfering with each other.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

    static Rng stream(std::uint64_t root_seed, std::string_view name) {
        return Rng(mix(root_seed ^ fnv1a(name)));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    // Uniform integer in [0, n). Unbiased via rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw ContractError("Rng::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

  private:
    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer; spreads low-entropy seeds over the state space.
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    std::mt19937_64 engine_;
};

}  // namespace aikd
