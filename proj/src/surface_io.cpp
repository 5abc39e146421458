#include "pmc/surface_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

namespace pmc {

namespace {

Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Json vec_json(const Vec3& v) { return Json::array({v(0), v(1), v(2)}); }

Json chart_point_json(const ChartPoint& p) {
  Json j;
  j["chart"] = p.chart == Chart::north ? "north" : "south";
  j["z"] = complex_json(p.z);
  return j;
}

template <typename T>
T get_field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(std::string("missing JSON field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad JSON field '") + key + "': " + e.what());
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_vertex(std::ostream& out, const Vec3& v) {
  out << "v " << format_double(v(0)) << ' ' << format_double(v(1)) << ' ' << format_double(v(2)) << '\n';
}

}  // namespace

Json to_json(const HarmonicField& field) {
  Json j;
  j["components"] = field.components();
  j["L"] = field.degree();
  Json coeffs = Json::array();
  for (int c = 0; c < field.components(); ++c)
    for (int l = 0; l <= field.degree(); ++l)
      for (int m = -l; m <= l; ++m) {
        const double v = field(c, l, m);
        if (v != 0.0) coeffs.push_back(Json::array({c, l, m, v}));
      }
  j["coeffs"] = std::move(coeffs);
  return j;
}

HarmonicField harmonic_field_from_json(const Json& j) {
  const int components = get_field<int>(j, "components");
  const int degree = get_field<int>(j, "L");
  if (components < 1 || degree < 0) throw DataError("harmonic field needs components ≥ 1 and L ≥ 0");
  HarmonicField field(components, degree);
  const Json& coeffs = j.at("coeffs");
  if (!coeffs.is_array()) throw DataError("'coeffs' must be an array of [component, l, m, value]");
  for (const Json& entry : coeffs) {
    if (!entry.is_array() || entry.size() != 4 || !entry[3].is_number())
      throw DataError("coefficient entries must be [component, l, m, value]");
    const int c = entry[0].get<int>(), l = entry[1].get<int>(), m = entry[2].get<int>();
    if (c < 0 || c >= components || l < 0 || l > degree || m < -l || m > l)
      throw DataError("coefficient index out of range: [" + std::to_string(c) + ", " + std::to_string(l) + ", " +
                      std::to_string(m) + "]");
    const double v = entry[3].get<double>();
    if (!std::isfinite(v)) throw DataError("non-finite coefficient");
    field(c, l, m) = v;
  }
  return field;
}

Json to_json(const AffineFunction& ell) { return Json{{"b", vec_json(ell.b)}}; }

AffineFunction affine_function_from_json(const Json& j) {
  const auto b = get_field<std::vector<double>>(j, "b");
  if (b.size() != 3) throw DataError("'b' must have three entries");
  return AffineFunction{Vec3(b[0], b[1], b[2])};
}

Json to_json(const BranchDetection& branches) {
  Json j;
  Json points = Json::array();
  for (const BranchPoint& bp : branches.branch_points) {
    Json p = chart_point_json(bp.location);
    p["order"] = bp.order;
    p["leading"] = Json::array({complex_json(bp.leading(0)), complex_json(bp.leading(1)), complex_json(bp.leading(2))});
    p["fit_residual"] = bp.fit_residual;
    p["null_defect"] = bp.null_defect;
    points.push_back(std::move(p));
  }
  Json unresolved = Json::array();
  for (const UnresolvedSingularPoint& u : branches.unresolved) {
    Json p = chart_point_json(u.location);
    p["fit_residual"] = u.fit_residual;
    p["reason"] = u.reason;
    unresolved.push_back(std::move(p));
  }
  j["branch_points"] = std::move(points);
  j["unresolved"] = std::move(unresolved);
  return j;
}

Json to_json(const VerificationReport& r) {
  Json j;
  j["area"] = r.area;
  j["intA2"] = r.int_a2;
  j["intH2"] = r.int_h2;
  j["total_gauss_curvature"] = r.total_gauss_curvature;
  j["gauss_identity"] = r.gauss_identity;
  j["codazzi_norm"] = r.codazzi_norm;
  j["obstruction"] = vec_json(r.obstruction);
  j["conformality_sup"] = r.conformality_sup;
  j["min_gradient_norm2"] = r.min_gradient_norm2;
  j["mc_constant"] = r.mc_constant;
  const Json branches = to_json(r.branches);
  j["branch_points"] = branches["branch_points"];
  j["unresolved"] = branches["unresolved"];
  return j;
}

Json to_json(const SolverConfig& c) {
  Json j;
  j["L"] = c.degree;
  j["tol"] = c.tol;
  j["max_newton"] = c.max_newton;
  j["steps"] = c.steps;
  j["min_step"] = c.min_step;
  j["damping"] = c.damping;
  j["max_halvings"] = c.max_halvings;
  j["fd_step"] = c.fd_step;
  j["initial_noise"] = c.initial_noise;
  j["seed"] = c.seed;
  return j;
}

Json to_json(const ResidualBreakdown& r) {
  Json j;
  j["norm"] = r.norm;
  j["conformality_l2"] = r.conformality_l2;
  j["conformality_sup"] = r.conformality_sup;
  j["mc_l2"] = r.mc_l2;
  j["mc_sup"] = r.mc_sup;
  j["based_norm"] = r.based_norm;
  j["balance_norm"] = r.balance_norm;
  return j;
}

Json to_json(const SolveResult& result) {
  Json j;
  j["converged"] = result.converged;
  if (!result.diagnostic.empty()) j["diagnostic"] = result.diagnostic;
  j["s"] = result.state.s;
  j["ell"] = to_json(result.ell);
  j["balanced_ell"] = to_json(result.balanced_ell);
  Json steps = Json::array();
  for (const StepRecord& s : result.state.steps)
    steps.push_back(Json{{"s", s.s}, {"ds", s.ds}, {"iterations", s.iterations}, {"residual", s.residual},
                         {"accepted", s.accepted}});
  j["steps"] = std::move(steps);
  j["residual_history"] = result.state.residual_history;
  j["final_residual"] = to_json(result.final_residual);
  j["report"] = to_json(result.report);
  return j;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

Json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::string file_hash(const std::filesystem::path& path) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : read_text(path)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::string manifest_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end != epoch) t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json to_json(const RunManifest& m) {
  Json j;
  j["command"] = m.command;
  j["config"] = m.config;
  Json hashes = Json::object();
  for (const auto& [path, hash] : m.input_hashes) hashes[path] = hash;
  j["input_hashes"] = std::move(hashes);
  j["outputs"] = m.outputs;
  j["diagnostics"] = m.diagnostics;
  j["timestamp"] = m.timestamp;
  return j;
}

void export_obj(const HarmonicField& F, const SphericalGrid& grid, const std::filesystem::path& path) {
  if (F.components() != 3) throw ConfigurationError("OBJ export needs a 3-component immersion");
  const Eigen::MatrixXd values = synthesize(F, grid);
  const int rings = grid.ring_count(), lons = grid.longitude_count();
  std::ostringstream out;
  out << "# " << rings << " rings x " << lons << " longitudes\n";
  write_vertex(out, evaluate(F, 0.0, 0.0).value);
  for (int n = 0; n < grid.node_count(); ++n) write_vertex(out, values.row(n).transpose());
  write_vertex(out, evaluate(F, kPi, 0.0).value);
  const int north = 1, south = grid.node_count() + 2;
  auto vid = [&](int ring, int lon) { return grid.node(ring, lon % lons) + 2; };
  for (int j = 0; j < lons; ++j) out << "f " << north << ' ' << vid(0, j) << ' ' << vid(0, j + 1) << '\n';
  for (int i = 0; i + 1 < rings; ++i)
    for (int j = 0; j < lons; ++j)
      out << "f " << vid(i, j) << ' ' << vid(i + 1, j) << ' ' << vid(i + 1, j + 1) << ' ' << vid(i, j + 1) << '\n';
  for (int j = 0; j < lons; ++j) out << "f " << vid(rings - 1, j) << ' ' << south << ' ' << vid(rings - 1, j + 1) << '\n';
  write_text(path, out.str());
}

void export_obj(const PlanarImmersion& P, const DiskGrid& grid, const std::filesystem::path& path) {
  const int rings = grid.radial_count(), angles = grid.angular_count();
  std::ostringstream out;
  out << "# " << P.name() << " k=" << P.k() << " t=" << format_double(P.t()) << '\n';
  for (int n = 0; n < grid.node_count(); ++n) write_vertex(out, P.position(grid.point(n)));
  auto vid = [&](int ring, int angle) { return grid.node(ring, angle % angles) + 1; };
  for (int i = 0; i + 1 < rings; ++i)
    for (int j = 0; j < angles; ++j)
      out << "f " << vid(i, j) << ' ' << vid(i + 1, j) << ' ' << vid(i + 1, j + 1) << ' ' << vid(i, j + 1) << '\n';
  write_text(path, out.str());
}

ObjMesh read_obj(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<Vec3> vertices;
  ObjMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v(0) >> v(1) >> v(2))) throw DataError("malformed vertex in " + path.string());
      vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> face;
      std::string token;
      while (ls >> token) face.push_back(std::stoi(token.substr(0, token.find('/'))) - 1);
      if (face.size() < 3) throw DataError("face with fewer than three vertices in " + path.string());
      mesh.faces.push_back(std::move(face));
    }
  }
  mesh.vertices.resize(3, static_cast<int>(vertices.size()));
  for (std::size_t i = 0; i < vertices.size(); ++i) mesh.vertices.col(static_cast<int>(i)) = vertices[i];
  for (const auto& f : mesh.faces)
    for (int v : f)
      if (v < 0 || v >= mesh.vertices.cols()) throw DataError("face index out of range in " + path.string());
  return mesh;
}

}  // namespace pmc
