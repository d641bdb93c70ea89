#pragma once

#include "slipfsi/quadrature.hpp"
#include "slipfsi/stokes.hpp"

#include <array>

namespace slipfsi {

using Local35 = Eigen::Matrix<double, 3, 5>;

/// Element coefficients of a raw MINI field: column a holds basis function a.
Local35 gather(const FluidSpace& s, const VecX& raw, int t);
void scatter_add(const FluidSpace& s, int t, const Local35& local, VecX& raw);

struct QPoint {
    std::array<double, 4> lambda;
    std::array<double, 5> phi;
    std::array<Vec3, 5> dphi;
    double w = 0.0;  // physical weight
};

/// Quadrature points of tet t for the Duffy rule of order n.
std::vector<QPoint> tet_points(const FluidSpace& s, int t, int n);

inline Vec3 value_at(const Local35& U, const QPoint& q) {
    Vec3 v = Vec3::Zero();
    for (int a = 0; a < 5; ++a) v += U.col(a) * q.phi[a];
    return v;
}

/// (du_i/dy_j).
inline Mat3 grad_at(const Local35& U, const QPoint& q) {
    Mat3 g = Mat3::Zero();
    for (int a = 0; a < 5; ++a) g += U.col(a) * q.dphi[a].transpose();
    return g;
}

/// Adds w * (f . phi_a + P : grad phi_a) for every local basis function.
inline void add_test(Local35& out, const QPoint& q, const Vec3& f, const Mat3& P) {
    for (int a = 0; a < 5; ++a) out.col(a) += q.w * (q.phi[a] * f + P * q.dphi[a]);
}

/// P1 interpolation of vertex data inside tet t.
template <class T>
T interpolate_vertex(const FluidSpace& s, const std::vector<T>& data, int t, const std::array<double, 4>& lambda) {
    const auto& tet = s.mesh().tets[t];
    T v = lambda[0] * data[tet[0]];
    for (int k = 1; k < 4; ++k) v += lambda[k] * data[tet[k]];
    return v;
}

/// P1 pressure gradient on tet t.
Vec3 p1_gradient(const FluidSpace& s, const VecX& p, int t);

}  // namespace slipfsi
