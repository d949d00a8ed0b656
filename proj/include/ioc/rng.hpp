#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace ioc {

// Counter-based random stream: every draw is a pure function of
// (seed, trial, time step, channel, draw index), so datasets are identical
// regardless of generation order or worker count. The mixing function and
// the Box-Muller transform below are part of the dataset file contract.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t trial, std::uint64_t t,
                         std::uint64_t channel, std::uint64_t idx) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (trial + 0x9e3779b97f4a7c15ULL));
    h = splitmix64(h ^ (t + 0xd1b54a32d192ed03ULL));
    h = splitmix64(h ^ (channel + 0x2545f4914f6cdd1dULL));
    h = splitmix64(h ^ (idx + 0x853c49e6748fea9bULL));
    return h;
}

// Uniform in (0, 1), never exactly 0 or 1.
inline double to_unit(std::uint64_t h) {
    return (static_cast<double>(h >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

}  // namespace rng

enum class RngChannel : std::uint64_t {
    initial_state = 0,
    horizon = 1,
    process_noise = 2,
    observation_noise = 3,
    mixture_select = 4,
};

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t trial) : seed_(seed), trial_(trial) {}

    double uniform(RngChannel channel, std::uint64_t t, std::uint64_t idx) const {
        return rng::to_unit(rng::mix(seed_, trial_, t, static_cast<std::uint64_t>(channel), idx));
    }

    // Standard normals via Box-Muller on consecutive draw indices.
    Eigen::VectorXd normals(RngChannel channel, std::uint64_t t, int count) const;

private:
    std::uint64_t seed_;
    std::uint64_t trial_;
};

// Symmetric PSD factor L with L L' = Sigma (eigendecomposition with clamped
// eigenvalues and diagonal jitter 1e-12 tr(Sigma)/n when Sigma is singular).
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& sigma);

}  // namespace ioc
