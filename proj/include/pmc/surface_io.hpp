#pragma once

// JSON serialization of fields, affine functions, reports and run manifests, and OBJ export.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmc/affine_class.hpp"
#include "pmc/immersion_geometry.hpp"
#include "pmc/pmc_solver.hpp"
#include "pmc/weierstrass_examples.hpp"

namespace pmc {

using Json = nlohmann::ordered_json;

/// { "components": c, "L": L, "coeffs": [[component, l, m, value], ...] }, nonzero entries only;
/// missing triples read as zero.
Json to_json(const HarmonicField& field);
HarmonicField harmonic_field_from_json(const Json& j);

/// { "b": [b1, b2, b3] }
Json to_json(const AffineFunction& ell);
AffineFunction affine_function_from_json(const Json& j);

Json to_json(const BranchDetection& branches);
Json to_json(const VerificationReport& report);
Json to_json(const SolverConfig& config);
Json to_json(const ResidualBreakdown& residual);
/// Continuation history, final ℓ, residuals and verification report.
Json to_json(const SolveResult& result);

std::string read_text(const std::filesystem::path& path);
/// Throws IoError when the file cannot be written.
void write_text(const std::filesystem::path& path, const std::string& text);
Json read_json(const std::filesystem::path& path);
/// Two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

/// FNV-1a 64-bit hash of the file bytes as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  Json config = Json::object();
  std::vector<std::pair<std::string, std::string>> input_hashes;  // path, hash
  std::vector<std::string> outputs;
  Json diagnostics = Json::object();
  std::string timestamp;  // ISO 8601 UTC; SOURCE_DATE_EPOCH when set
};
std::string manifest_timestamp();
Json to_json(const RunManifest& manifest);

/// Sphere: a vertex per node plus the two poles, quads between rings closed in longitude and
/// triangle fans at the poles, oriented by the outward normal of the round sphere.
void export_obj(const HarmonicField& F, const SphericalGrid& grid, const std::filesystem::path& path);
/// Disk: a vertex per node, quads between consecutive rings closed in angle.
void export_obj(const PlanarImmersion& P, const DiskGrid& grid, const std::filesystem::path& path);

struct ObjMesh {
  Eigen::Matrix3Xd vertices;
  std::vector<std::vector<int>> faces;  // 0-based
};
ObjMesh read_obj(const std::filesystem::path& path);

}  // namespace pmc
