#include "slipfsi/geometry.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace slipfsi {

const char* tag_name(FacetTag t) { return t == FacetTag::Outer ? "OUTER" : "SOLID"; }

std::vector<VertexKind> Mesh::vertex_kinds() const {
    std::vector<VertexKind> k(x.size(), VertexKind::Interior);
    for (const auto& f : facets)
        for (int v : f.v) k[v] = f.tag == FacetTag::Outer ? VertexKind::Outer : VertexKind::Solid;
    return k;
}

double tet_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

double mesh_volume(const Mesh& m) {
    double v = 0.0;
    for (const auto& t : m.tets) v += tet_signed_volume(m.x[t[0]], m.x[t[1]], m.x[t[2]], m.x[t[3]]);
    return v;
}

Vec3 facet_normal_sum(const Mesh& m, FacetTag tag) {
    Vec3 s = Vec3::Zero();
    for (const auto& f : m.facets)
        if (f.tag == tag) s += 0.5 * (m.x[f.v[1]] - m.x[f.v[0]]).cross(m.x[f.v[2]] - m.x[f.v[0]]);
    return s;
}

double facet_area_sum(const Mesh& m, FacetTag tag) {
    double s = 0.0;
    for (const auto& f : m.facets)
        if (f.tag == tag) s += 0.5 * (m.x[f.v[1]] - m.x[f.v[0]]).cross(m.x[f.v[2]] - m.x[f.v[0]]).norm();
    return s;
}

void icosphere(int level, std::vector<Vec3>& verts, std::vector<std::array<int, 3>>& tris) {
    const double p = (1.0 + std::sqrt(5.0)) / 2.0;
    verts = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
             {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
    for (auto& v : verts) v.normalize();
    tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
            {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
            {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            verts.push_back((verts[a] + verts[b]).normalized());
            int id = static_cast<int>(verts.size()) - 1;
            mid.emplace(key, id);
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(tris.size() * 4);
        for (const auto& t : tris) {
            int a = midpoint(t[0], t[1]), b = midpoint(t[1], t[2]), c = midpoint(t[2], t[0]);
            next.push_back({t[0], a, c});
            next.push_back({t[1], b, a});
            next.push_back({t[2], c, b});
            next.push_back({a, b, c});
        }
        tris.swap(next);
    }
}

int default_layers(int refinement) { return std::max(3, 2 + 2 * refinement); }

DomainConfig make_reference_geometry(double r, double R, int refinement, int layers, double alpha) {
    if (!(r > 0.0) || !(R > r)) throw GeometryError("invalid geometry: need 0 < solid_radius < fluid_radius");
    if (refinement < 0) throw GeometryError("invalid geometry: refinement must be >= 0");
    if (layers < 0) layers = default_layers(refinement);
    if (layers < 1) throw GeometryError("invalid geometry: at least one radial layer required");

    std::vector<Vec3> sv;
    std::vector<std::array<int, 3>> st;
    icosphere(refinement, sv, st);
    const int ns = static_cast<int>(sv.size());

    DomainConfig d;
    d.solid = {Vec3::Zero(), r};
    d.outer = {Vec3::Zero(), R};
    d.beta = R - r;
    Mesh& m = d.mesh;
    m.x.reserve(static_cast<size_t>(ns) * (layers + 1));
    for (int k = 0; k <= layers; ++k) {
        const double rk = r + (R - r) * static_cast<double>(k) / layers;
        for (const auto& v : sv) m.x.push_back(rk * v);
    }
    for (int k = 0; k < layers; ++k) {
        for (auto t : st) {
            std::sort(t.begin(), t.end());
            const int a0 = k * ns + t[0], b0 = k * ns + t[1], c0 = k * ns + t[2];
            const int a1 = a0 + ns, b1 = b0 + ns, c1 = c0 + ns;
            for (std::array<int, 4> tet : {std::array<int, 4>{a0, b0, c0, a1}, std::array<int, 4>{b0, c0, a1, b1},
                                           std::array<int, 4>{c0, a1, b1, c1}}) {
                if (tet_signed_volume(m.x[tet[0]], m.x[tet[1]], m.x[tet[2]], m.x[tet[3]]) < 0.0)
                    std::swap(tet[2], tet[3]);
                m.tets.push_back(tet);
            }
        }
    }
    for (const auto& t : st) {
        m.facets.push_back({{t[0], t[2], t[1]}, FacetTag::Solid});
        m.facets.push_back({{layers * ns + t[0], layers * ns + t[1], layers * ns + t[2]}, FacetTag::Outer});
    }
    d.alpha.assign(m.x.size(), alpha);
    d.description = "shell(" + std::to_string(r) + "," + std::to_string(R) + "," + std::to_string(refinement) + ")";
    validate_domain(d);
    return d;
}

namespace {

Sphere fit_sphere(const Mesh& m, FacetTag tag, double tol) {
    std::set<int> ids;
    for (const auto& f : m.facets)
        if (f.tag == tag) ids.insert(f.v.begin(), f.v.end());
    if (ids.size() < 4) throw GeometryError(std::string("mesh has too few ") + tag_name(tag) + " vertices");
    // |x|^2 = 2 c.x + (r^2 - |c|^2), linear least squares in (c, k).
    Eigen::MatrixXd A(ids.size(), 4);
    Eigen::VectorXd b(ids.size());
    int i = 0;
    for (int id : ids) {
        A.row(i) << 2 * m.x[id].x(), 2 * m.x[id].y(), 2 * m.x[id].z(), 1.0;
        b(i) = m.x[id].squaredNorm();
        ++i;
    }
    Eigen::Vector4d s = A.colPivHouseholderQr().solve(b);
    Sphere sp;
    sp.center = s.head<3>();
    sp.radius = std::sqrt(s(3) + sp.center.squaredNorm());
    double dev = 0.0;
    for (int id : ids) dev = std::max(dev, std::abs((m.x[id] - sp.center).norm() - sp.radius));
    if (dev > tol * sp.radius)
        throw GeometryError(std::string(tag_name(tag)) + " boundary is not spherical (deviation " +
                            std::to_string(dev) + ")");
    return sp;
}

}  // namespace

DomainConfig domain_from_mesh(Mesh mesh, double alpha, double sphere_tol) {
    DomainConfig d;
    d.solid = fit_sphere(mesh, FacetTag::Solid, sphere_tol);
    d.outer = fit_sphere(mesh, FacetTag::Outer, sphere_tol);
    d.beta = d.outer.radius - (d.solid.center - d.outer.center).norm() - d.solid.radius;
    // Body frame origin at the solid center.
    for (auto& x : mesh.x) x -= d.solid.center;
    d.outer.center -= d.solid.center;
    d.solid.center.setZero();
    d.mesh = std::move(mesh);
    d.alpha.assign(d.mesh.x.size(), alpha);
    d.description = "imported";
    validate_domain(d);
    return d;
}

void validate_domain(const DomainConfig& d) {
    if (!(d.beta > 0.0)) throw GeometryError("invalid geometry: clearance beta must be positive");
    if (d.alpha.size() != d.mesh.x.size()) throw GeometryError("alpha field size mismatch");
    const auto kinds = d.mesh.vertex_kinds();
    bool any_positive = false;
    for (size_t i = 0; i < kinds.size(); ++i) {
        if (kinds[i] != VertexKind::Solid) continue;
        if (d.alpha[i] < 0.0) throw GeometryError("alpha must be nonnegative");
        any_positive = any_positive || d.alpha[i] > 0.0;
    }
    if (!any_positive) throw GeometryError("alpha vanishes identically on the solid boundary");
    for (const auto& t : d.mesh.tets)
        if (tet_signed_volume(d.mesh.x[t[0]], d.mesh.x[t[1]], d.mesh.x[t[2]], d.mesh.x[t[3]]) <= 0.0)
            throw GeometryError("inverted or degenerate tetrahedron");
    std::map<std::array<int, 3>, int> seen;
    for (const auto& f : d.mesh.facets) {
        auto k = f.v;
        std::sort(k.begin(), k.end());
        if (++seen[k] > 1) throw GeometryError("boundary facet carries more than one tag");
    }
}

Mat6 RigidBody::momentum_matrix() const {
    Mat6 I = Mat6::Zero();
    I.topLeftCorner<3, 3>() = mass * Mat3::Identity();
    I.bottomRightCorner<3, 3>() = inertia;
    return I;
}

namespace {

void check_closed(const std::vector<std::array<int, 3>>& tris) {
    std::map<std::pair<int, int>, int> edges;
    for (const auto& t : tris)
        for (int e = 0; e < 3; ++e) {
            int a = t[e], b = t[(e + 1) % 3];
            edges[{a, b}] += 1;
        }
    for (const auto& [e, c] : edges) {
        auto it = edges.find({e.second, e.first});
        if (c != 1 || it == edges.end() || it->second != 1)
            throw GeometryError("solid surface is not closed and consistently oriented");
    }
}

}  // namespace

double enclosed_volume(const std::vector<Vec3>& verts, const std::vector<std::array<int, 3>>& tris) {
    double v = 0.0;
    for (const auto& t : tris) v += tet_signed_volume(Vec3::Zero(), verts[t[0]], verts[t[1]], verts[t[2]]);
    return v;
}

Mat3 inertia_tensor(double density, const std::vector<Vec3>& verts, const std::vector<std::array<int, 3>>& tris,
                    const Vec3& origin) {
    if (!(density > 0.0)) throw GeometryError("density must be positive");
    check_closed(tris);
    // Second moments via signed tetrahedra against the origin:
    // int_T y y^T = V/20 (sum_k v_k v_k^T + s s^T), s = sum of the four vertices.
    Mat3 S = Mat3::Zero();
    for (const auto& t : tris) {
        const Vec3 a = verts[t[0]] - origin, b = verts[t[1]] - origin, c = verts[t[2]] - origin;
        const double V = tet_signed_volume(Vec3::Zero(), a, b, c);
        const Vec3 s = a + b + c;
        S += V / 20.0 * (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose());
    }
    Mat3 J = density * (S.trace() * Mat3::Identity() - S);
    return 0.5 * (J + J.transpose());
}

RigidBody make_body(const DomainConfig& d, double density) {
    std::vector<Vec3> verts = d.mesh.x;
    std::vector<std::array<int, 3>> tris;
    for (const auto& f : d.mesh.facets)
        if (f.tag == FacetTag::Solid) tris.push_back({f.v[0], f.v[2], f.v[1]});
    RigidBody b;
    b.density = density;
    for (auto& v : verts) v -= d.solid.center;
    b.mass = density * enclosed_volume(verts, tris);
    b.inertia = inertia_tensor(density, verts, tris);
    return b;
}

bool reorthonormalize(Mat3& Q, double tol) {
    if ((Q.transpose() * Q - Mat3::Identity()).norm() <= tol) return false;
    Eigen::JacobiSVD<Mat3> svd(Q, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Q = svd.matrixU() * svd.matrixV().transpose();
    return true;
}

DistanceReport body_distance(const RigidState& s, const DomainConfig& d) {
    const Vec3 c = s.h + s.Q * d.solid.center;
    const double dist = d.outer.radius - (c - d.outer.center).norm() - d.solid.radius;
    DistanceReport r;
    r.distance = std::max(0.0, dist);
    r.contact = dist <= 0.0;
    return r;
}

Mat3 skew(const Vec3& v) {
    Mat3 S;
    S << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return S;
}

}  // namespace slipfsi
