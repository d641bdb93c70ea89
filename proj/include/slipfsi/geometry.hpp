#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace slipfsi {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FacetTag { Outer, Solid };
enum class VertexKind { Interior, Outer, Solid };

const char* tag_name(FacetTag t);

struct Facet {
    std::array<int, 3> v;
    FacetTag tag;
};

struct Sphere {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
};

/// Tetrahedral mesh of the reference fluid domain. Boundary facets are
/// oriented so that (x1-x0)x(x2-x0) points out of the fluid.
struct Mesh {
    std::vector<Vec3> x;
    std::vector<std::array<int, 4>> tets;
    std::vector<Facet> facets;

    int num_vertices() const { return static_cast<int>(x.size()); }
    int num_tets() const { return static_cast<int>(tets.size()); }
    std::vector<VertexKind> vertex_kinds() const;
};

double tet_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);
double mesh_volume(const Mesh& m);
/// Sum of area-weighted outward facet normals over the facets carrying `tag`.
Vec3 facet_normal_sum(const Mesh& m, FacetTag tag);
double facet_area_sum(const Mesh& m, FacetTag tag);

struct DomainConfig {
    Mesh mesh;
    Sphere outer;
    Sphere solid;
    double beta = 0.0;
    /// Friction coefficient at every vertex; only SOLID vertices are read.
    std::vector<double> alpha;
    std::string description;
};

/// Unit icosphere: subdivision level `level`, outward-oriented triangles.
void icosphere(int level, std::vector<Vec3>& verts, std::vector<std::array<int, 3>>& tris);

int default_layers(int refinement);

DomainConfig make_reference_geometry(double solid_radius, double fluid_radius, int refinement,
                                     int layers = -1, double alpha = 1.0);

/// Fits spheres to the tagged boundaries of an imported mesh and fills the
/// remaining DomainConfig fields. Throws if a boundary is not spherical.
DomainConfig domain_from_mesh(Mesh mesh, double alpha = 1.0, double sphere_tol = 1e-6);

void validate_domain(const DomainConfig& d);

struct RigidBody {
    double mass = 0.0;
    double density = 0.0;
    Mat3 inertia = Mat3::Zero();

    Mat6 momentum_matrix() const;
};

/// Inertia tensor about `origin` of a uniform-density solid bounded by a closed
/// triangulated surface (triangles oriented outward from the solid).
Mat3 inertia_tensor(double density, const std::vector<Vec3>& verts,
                    const std::vector<std::array<int, 3>>& tris, const Vec3& origin = Vec3::Zero());
double enclosed_volume(const std::vector<Vec3>& verts, const std::vector<std::array<int, 3>>& tris);

/// Rigid body occupying the SOLID boundary of the domain, uniform density.
RigidBody make_body(const DomainConfig& d, double density);

struct RigidState {
    Vec3 h = Vec3::Zero();
    Mat3 Q = Mat3::Identity();
    Vec3 l_body = Vec3::Zero();
    Vec3 omega_body = Vec3::Zero();
    double t = 0.0;
};

/// Replaces Q by its polar factor when ||Q^T Q - I||_F exceeds `tol`.
/// Returns true if a correction was applied.
bool reorthonormalize(Mat3& Q, double tol = 1e-10);

struct DistanceReport {
    double distance = 0.0;
    bool contact = false;
};

/// Distance from the moved solid x = h + Q y to the outer boundary.
DistanceReport body_distance(const RigidState& s, const DomainConfig& d);

Mat3 skew(const Vec3& v);

}  // namespace slipfsi
