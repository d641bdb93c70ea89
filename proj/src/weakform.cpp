#include "slipfsi/weakform.hpp"

namespace slipfsi {

Local35 gather(const FluidSpace& s, const VecX& raw, int t) {
    Local35 U;
    for (int a = 0; a < 5; ++a)
        for (int c = 0; c < 3; ++c) U(c, a) = raw[s.raw_local(t, a, c)];
    return U;
}

void scatter_add(const FluidSpace& s, int t, const Local35& local, VecX& raw) {
    for (int a = 0; a < 5; ++a)
        for (int c = 0; c < 3; ++c) raw[s.raw_local(t, a, c)] += local(c, a);
}

std::vector<QPoint> tet_points(const FluidSpace& s, int t, int n) {
    const TetRule& rule = tet_rule(n);
    const TetGeom& g = s.geom(t);
    std::vector<QPoint> out(rule.w.size());
    for (size_t k = 0; k < rule.w.size(); ++k) {
        QPoint& q = out[k];
        q.lambda = barycentric_from_ref(rule.xi[k]);
        q.phi = mini_values(q.lambda);
        q.dphi = mini_gradients(q.lambda, g.glam);
        q.w = rule.w[k] * 6.0 * g.vol;
    }
    return out;
}

Vec3 p1_gradient(const FluidSpace& s, const VecX& p, int t) {
    const auto& tet = s.mesh().tets[t];
    const TetGeom& g = s.geom(t);
    Vec3 v = Vec3::Zero();
    for (int k = 0; k < 4; ++k) v += p[tet[k]] * g.glam[k];
    return v;
}

}  // namespace slipfsi
