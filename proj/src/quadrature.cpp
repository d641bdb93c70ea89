#include "slipfsi/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <mutex>

namespace slipfsi {

Rule1D gauss_legendre01(int n) {
    // Golub-Welsch on the Jacobi matrix of the Legendre recurrence.
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        T(k, k - 1) = T(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    Rule1D r;
    for (int i = 0; i < n; ++i) {
        const double v0 = es.eigenvectors()(0, i);
        r.x.push_back(0.5 * (es.eigenvalues()(i) + 1.0));
        r.w.push_back(v0 * v0);  // 2 v0^2 on [-1,1], halved on [0,1]
    }
    return r;
}

const TetRule& tet_rule(int n) {
    static std::mutex mu;
    static std::map<int, TetRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    const Rule1D g = gauss_legendre01(n);
    TetRule r;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double u = g.x[i], v = g.x[j], s = g.x[k];
                r.xi.emplace_back(u, v * (1 - u), s * (1 - u) * (1 - v));
                r.w.push_back(g.w[i] * g.w[j] * g.w[k] * (1 - u) * (1 - u) * (1 - v));
            }
    return cache.emplace(n, std::move(r)).first->second;
}

const TriRule& tri_rule(int n) {
    static std::mutex mu;
    static std::map<int, TriRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    const Rule1D g = gauss_legendre01(n);
    TriRule r;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double u = g.x[i], v = g.x[j];
            r.xi.emplace_back(u, v * (1 - u));
            r.w.push_back(g.w[i] * g.w[j] * (1 - u));
        }
    return cache.emplace(n, std::move(r)).first->second;
}

std::array<double, 5> mini_values(const std::array<double, 4>& l) {
    return {l[0], l[1], l[2], l[3], 256.0 * l[0] * l[1] * l[2] * l[3]};
}

std::array<Eigen::Vector3d, 5> mini_gradients(const std::array<double, 4>& l,
                                              const std::array<Eigen::Vector3d, 4>& g) {
    const Eigen::Vector3d gb = 256.0 * (l[1] * l[2] * l[3] * g[0] + l[0] * l[2] * l[3] * g[1] +
                                        l[0] * l[1] * l[3] * g[2] + l[0] * l[1] * l[2] * g[3]);
    return {g[0], g[1], g[2], g[3], gb};
}

}  // namespace slipfsi
