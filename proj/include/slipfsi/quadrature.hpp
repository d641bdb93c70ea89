#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace slipfsi {

struct Rule1D {
    std::vector<double> x;  // nodes on [0,1]
    std::vector<double> w;
};

Rule1D gauss_legendre01(int n);

/// Quadrature on the reference tetrahedron {x,y,z >= 0, x+y+z <= 1} by
/// Duffy collapse of an n^3 tensor Gauss rule. Weights sum to 1/6.
struct TetRule {
    std::vector<Eigen::Vector3d> xi;
    std::vector<double> w;
};
const TetRule& tet_rule(int n);

/// Reference triangle {x,y >= 0, x+y <= 1}, weights sum to 1/2.
struct TriRule {
    std::vector<Eigen::Vector2d> xi;
    std::vector<double> w;
};
const TriRule& tri_rule(int n);

/// Scalar MINI basis on a tetrahedron: four barycentric hats and the
/// cubic bubble 256*l0*l1*l2*l3.
constexpr int kLocalBasis = 5;
std::array<double, 5> mini_values(const std::array<double, 4>& lambda);
/// Gradients with respect to barycentric coordinates chained through the
/// (constant) barycentric gradients `glam`.
std::array<Eigen::Vector3d, 5> mini_gradients(const std::array<double, 4>& lambda,
                                              const std::array<Eigen::Vector3d, 4>& glam);

inline std::array<double, 4> barycentric_from_ref(const Eigen::Vector3d& xi) {
    return {1.0 - xi.x() - xi.y() - xi.z(), xi.x(), xi.y(), xi.z()};
}

}  // namespace slipfsi
