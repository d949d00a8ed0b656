#include "ioc/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace ioc {

Eigen::VectorXd CounterRng::normals(RngChannel channel, std::uint64_t t, int count) const {
    Eigen::VectorXd z(count);
    for (int i = 0; i < count; i += 2) {
        const double u1 = uniform(channel, t, static_cast<std::uint64_t>(i));
        const double u2 = uniform(channel, t, static_cast<std::uint64_t>(i) + 1);
        const double r = std::sqrt(-2.0 * std::log(u1));
        z(i) = r * std::cos(2.0 * M_PI * u2);
        if (i + 1 < count) z(i + 1) = r * std::sin(2.0 * M_PI * u2);
    }
    return z;
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& sigma) {
    const int n = static_cast<int>(sigma.rows());
    Eigen::MatrixXd S = 0.5 * (sigma + sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const double jitter =
        (es.eigenvalues().minCoeff() <= 0.0) ? 1e-12 * S.trace() / std::max(1, n) : 0.0;
    Eigen::VectorXd lam = es.eigenvalues();
    for (int i = 0; i < n; ++i) lam(i) = std::sqrt(std::max(lam(i) + jitter, 0.0));
    return es.eigenvectors() * lam.asDiagonal();
}

}  // namespace ioc
