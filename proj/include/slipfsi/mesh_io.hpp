#pragma once

#include "slipfsi/geometry.hpp"

#include <iosfwd>
#include <string>

namespace slipfsi {

/// ASCII mesh format:
///   slipfsi-mesh v1
///   vertices N     followed by N lines "x y z"
///   tets M         followed by M lines "a b c d" (0-based)
///   facets K       followed by K lines "a b c OUTER|SOLID"
void write_mesh(std::ostream& os, const Mesh& m);
Mesh read_mesh(std::istream& is);

void write_mesh_file(const std::string& path, const Mesh& m);
Mesh read_mesh_file(const std::string& path);

/// Parses "builtin:shell(r,R,n)" or a mesh file path.
DomainConfig load_geometry(const std::string& spec, double alpha = 1.0);

}  // namespace slipfsi
