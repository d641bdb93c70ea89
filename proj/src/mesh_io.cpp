#include "slipfsi/mesh_io.hpp"

#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

namespace slipfsi {

void write_mesh(std::ostream& os, const Mesh& m) {
    os << "slipfsi-mesh v1\n";
    os << "vertices " << m.x.size() << "\n" << std::setprecision(17);
    for (const auto& x : m.x) os << x.x() << " " << x.y() << " " << x.z() << "\n";
    os << "tets " << m.tets.size() << "\n";
    for (const auto& t : m.tets) os << t[0] << " " << t[1] << " " << t[2] << " " << t[3] << "\n";
    os << "facets " << m.facets.size() << "\n";
    for (const auto& f : m.facets) os << f.v[0] << " " << f.v[1] << " " << f.v[2] << " " << tag_name(f.tag) << "\n";
}

namespace {

size_t expect_section(std::istream& is, const char* name) {
    std::string word;
    size_t n = 0;
    if (!(is >> word >> n) || word != name) throw GeometryError(std::string("mesh: expected section '") + name + "'");
    return n;
}

}  // namespace

Mesh read_mesh(std::istream& is) {
    std::string header;
    std::getline(is, header);
    if (header.rfind("slipfsi-mesh v1", 0) != 0) throw GeometryError("mesh: missing 'slipfsi-mesh v1' header");
    Mesh m;
    const size_t nv = expect_section(is, "vertices");
    m.x.resize(nv);
    for (auto& x : m.x)
        if (!(is >> x.x() >> x.y() >> x.z())) throw GeometryError("mesh: truncated vertex list");
    const size_t nt = expect_section(is, "tets");
    m.tets.resize(nt);
    for (auto& t : m.tets) {
        if (!(is >> t[0] >> t[1] >> t[2] >> t[3])) throw GeometryError("mesh: truncated tet list");
        for (int v : t)
            if (v < 0 || static_cast<size_t>(v) >= nv) throw GeometryError("mesh: tet index out of range");
    }
    const size_t nf = expect_section(is, "facets");
    m.facets.resize(nf);
    for (auto& f : m.facets) {
        std::string tag;
        if (!(is >> f.v[0] >> f.v[1] >> f.v[2] >> tag)) throw GeometryError("mesh: truncated facet list");
        if (tag == "OUTER")
            f.tag = FacetTag::Outer;
        else if (tag == "SOLID")
            f.tag = FacetTag::Solid;
        else
            throw GeometryError("mesh: unknown facet tag '" + tag + "'");
        for (int v : f.v)
            if (v < 0 || static_cast<size_t>(v) >= nv) throw GeometryError("mesh: facet index out of range");
    }
    return m;
}

void write_mesh_file(const std::string& path, const Mesh& m) {
    std::ofstream os(path);
    if (!os) throw GeometryError("cannot open '" + path + "' for writing");
    write_mesh(os, m);
}

Mesh read_mesh_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw GeometryError("cannot open mesh file '" + path + "'");
    return read_mesh(is);
}

DomainConfig load_geometry(const std::string& spec, double alpha) {
    static const std::regex shell(R"(builtin:shell\(\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*,\s*(\d+)\s*(?:,\s*(\d+)\s*)?\))");
    std::smatch m;
    if (std::regex_match(spec, m, shell)) {
        const int layers = m[4].matched ? std::stoi(m[4].str()) : -1;
        return make_reference_geometry(std::stod(m[1].str()), std::stod(m[2].str()), std::stoi(m[3].str()), layers,
                                       alpha);
    }
    if (spec.rfind("builtin:", 0) == 0) throw GeometryError("unknown builtin geometry '" + spec + "'");
    return domain_from_mesh(read_mesh_file(spec), alpha);
}

}  // namespace slipfsi
