#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cardioforge {

struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnsupportedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StratificationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SpecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SamplingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AggregationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Wraps a result that may carry a non-fatal condition (degenerate input,
// short-record pass-through, ...). `flag` is empty when nothing happened.
template <typename T>
struct Flagged {
    T value{};
    std::string flag;

    bool flagged() const { return !flag.empty(); }
};

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stable seed derivation so per-subject work is order-independent.
inline uint64_t derive_seed(uint64_t master, const std::string& key, uint64_t index = 0) {
    return splitmix64(splitmix64(master ^ fnv1a64(key)) ^ index);
}

// xoshiro256++ with fully specified draw functions. std::mt19937_64 is
// reproducible, but the standard distributions are not; this keeps every
// random draw bit-stable across platforms and standard libraries.
class Rng {
  public:
    explicit Rng(uint64_t seed = 0) {
        uint64_t x = seed;
        for (auto& word : state_) {
            x = splitmix64(x);
            word = x;
        }
        has_spare_ = false;
    }

    uint64_t next() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Unbiased integer in [0, n) by rejection.
    uint64_t below(uint64_t n) {
        if (n == 0) throw ArgumentError("Rng::below: n must be positive");
        const uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
        uint64_t r = next();
        while (r < threshold) r = next();
        return r % n;
    }

    // Standard normal via Box-Muller (deterministic, pair-cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

    Rng child(const std::string& key, uint64_t index = 0) {
        return Rng(derive_seed(next(), key, index));
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_;
};

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace cardioforge
