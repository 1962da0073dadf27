#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace dhap {

/// splitmix64 mixing step; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Deterministic seed for sub-stream `index` of purpose `tag` under a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0) {
    return mix_seed(mix_seed(master ^ mix_seed(tag)) ^ index);
}

/// Caller-owned stream of standard normal draws. Streams seeded independently
/// are safe to advance from different threads.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : gen_(seed) {}

    double next() { return normal_(gen_); }

    /// Wiener increments over a step of length h: N(0, h I).
    template <int N>
    Eigen::Matrix<double, N, 1> increments(double h) {
        Eigen::Matrix<double, N, 1> dw;
        const double s = std::sqrt(h);
        for (int i = 0; i < N; ++i) dw[i] = s * next();
        return dw;
    }

    double uniform() { return uni_(gen_); }

private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uni_{0.0, 1.0};
};

} // namespace dhap
