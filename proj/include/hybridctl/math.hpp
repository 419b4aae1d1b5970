#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace hybridctl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double theta) {
    double w = std::fmod(theta + kPi, 2.0 * kPi);
    if (w <= 0.0) w += 2.0 * kPi;
    return w - kPi;
}

// splitmix64, used for deriving independent per-index seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic RNG stream. Gaussian draws use hand-rolled Box-Muller so the
// byte stream does not depend on the standard library's distribution
// implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed ? seed : 0x853c49e6748fea9bULL) {}

    std::uint64_t next_u64() {
        // xorshift64*
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dULL;
    }

    // Uniform in [0, 1).
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * kPi * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    Vec normal_vec(Eigen::Index n) {
        Vec z(n);
        for (Eigen::Index i = 0; i < n; ++i) z(i) = normal();
        return z;
    }

private:
    std::uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

inline Vec clip(const Vec& x, const Vec& lo, const Vec& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace hybridctl
