#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace macvae {

// Seeded generator with named sub-streams. All distributions are hand-rolled
// on top of mt19937_64 so that a given (seed, stream name) pair produces the
// same values on every run of the same build.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : base_seed_(seed), eng_(seed) {}

    // Derive an independent stream from the base seed and a name plus up to
    // two numeric tags (epoch, item id, ...). Does not consume this stream.
    Rng substream(std::string_view name, std::uint64_t a = 0, std::uint64_t b = 0) const {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ base_seed_;
        for (char ch : name) {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001b3ULL;
        }
        h ^= mix(a + 0x9e3779b97f4a7c15ULL);
        h *= 0x100000001b3ULL;
        h ^= mix(b + 0x2545f4914f6cdd1dULL);
        return Rng(h);
    }

    std::uint64_t base_seed() const { return base_seed_; }

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1).
    double uniform() { return std::ldexp(static_cast<double>(eng_() >> 11), -53); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform in {0, ..., n-1}. Modulo bias is negligible for the n used here.
    int uniform_int(int n) { return static_cast<int>(eng_() % static_cast<std::uint64_t>(n)); }

    // Standard normal via Box-Muller (cosine branch only, no cached state).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::vector<double> normal_vec(std::size_t n) {
        std::vector<double> out(n);
        for (auto& x : out) x = normal();
        return out;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t mix(std::uint64_t x) {
        x ^= x >> 33;
        x *= 0xff51afd7ed558ccdULL;
        x ^= x >> 33;
        x *= 0xc4ceb9fe1a85ec53ULL;
        x ^= x >> 33;
        return x;
    }

    std::uint64_t base_seed_;
    std::mt19937_64 eng_;
};

}  // namespace macvae
