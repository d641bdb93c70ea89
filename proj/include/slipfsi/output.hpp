#pragma once

#include "slipfsi/config.hpp"

#include <json.hpp>

#include <string>

namespace slipfsi {

constexpr const char* kRunCsvSchema = "slipfsi-run-csv v1";
constexpr const char* kContractionSchema = "slipfsi-contraction v1";
constexpr const char* kSpectrumSchema = "slipfsi-spectrum v1";
constexpr const char* kVerifySchema = "slipfsi-verify v1";
constexpr const char* kFlowmapSchema = "slipfsi-flowmap-csv v1";

/// Time series, one row per level:
///   t, l(3), omega(3), h(3), energy, viscous, slip, u_l2, distance
/// with body-frame velocities and the mass-norm of the velocity.
void write_run_csv(const std::string& path, const Problem& pb, const SimulationResult& r);

nlohmann::ordered_json contraction_json(const SimulationResult& r, const PicardSettings& st);
void write_json(const std::string& path, const nlohmann::ordered_json& j);

/// Legacy ASCII VTK of the pushed-forward velocity and pressure at level n
/// on the deformed mesh.
void write_vtk_snapshot(const std::string& path, const FluidSpace& s, const FlowMap& map, int n, const VecX& z,
                        const VecX& p);

/// Per level: t, vertex, X(3), det J_X, |J_X - Q|_F (SOLID vertices only,
/// blank elsewhere).
void write_flowmap_csv(const std::string& path, const FluidSpace& s, const FlowMap& map);

/// Matrix Market coordinate format (general, real).
void write_matrix_market(const std::string& path, const SpMat& A);

nlohmann::ordered_json spectrum_json(const SpectralReport& rep, const SectorBound* sector);

/// Flow map of the mesh vertices along a trajectory's rigid history.
FlowMap trajectory_map(const Problem& pb, const Trajectory& x, const FlowOptions& opt);

}  // namespace slipfsi
