#pragma once

#include <cmath>
#include <cstdint>

namespace pfl {

// Role of a random draw within one simulation event. Distinct purposes on
// the same (round, client, step) path give statistically independent
// streams, which is what keeps the three estimator batches independent.
enum class Purpose : std::uint64_t {
    ClientSelect = 1,
    ReportIndex,
    InnerGrad,
    OuterGrad,
    HessianBatch,
    Init,
    SampleNoise,
    HessNoise,
    Probe,
    Trial,
    Partition,
    Generic,
};

namespace detail {
// splitmix64 finalizer (Steele/Lea/Flood). Full-avalanche 64-bit mixer.
inline constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}
inline constexpr std::uint64_t GOLDEN = 0x9e3779b97f4a7c15ULL;
}  // namespace detail

// Counter-based stream: the state is a hashed key plus a draw counter, so a
// stream is a pure function of (root_seed, path). Identical paths replay the
// identical sequence no matter which thread or order evaluates them.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : key_(detail::mix64(key + detail::GOLDEN)) {}

    RngStream(std::uint64_t root_seed, std::uint64_t a, std::uint64_t b,
              std::uint64_t c, std::uint64_t d)
        : key_(fold(fold(fold(fold(detail::mix64(root_seed + detail::GOLDEN), a), b), c), d)) {}

    std::uint64_t next_u64() {
        ++counter_;
        return detail::mix64(detail::mix64(key_ + counter_ * detail::GOLDEN) ^ key_);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller; two uniforms per draw, no cached pair
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // unbiased integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

private:
    static constexpr std::uint64_t fold(std::uint64_t key, std::uint64_t v) {
        return detail::mix64(key ^ detail::mix64(v + detail::GOLDEN));
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Addressing scheme for all randomness in a run. Every consumer derives its
// stream from (root, round, client, step, purpose); nothing shares state.
struct RngPath {
    std::uint64_t root = 0;
    std::uint64_t round = 0;
    std::uint64_t client = 0;
    std::uint64_t step = 0;

    RngStream stream(Purpose p) const {
        return RngStream(root, round, client, step, static_cast<std::uint64_t>(p));
    }
};

}  // namespace pfl
