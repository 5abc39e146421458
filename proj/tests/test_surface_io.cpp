#include <doctest.h>

#include <cstdlib>
#include <map>
#include <random>

#include "pmc/surface_io.hpp"

using namespace pmc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pmc_test_surface_io";
  fs::create_directories(dir);
  return dir / name;
}

HarmonicField random_field(int components, int degree, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  HarmonicField f(components, degree);
  for (int c = 0; c < components; ++c)
    for (int h = 0; h < harmonic_count(degree); ++h) f.coeffs()(h, c) = normal(rng) / (1.0 + h);
  return f;
}

// Every directed edge used once and its reverse used once: closed and consistently oriented.
bool closed_and_oriented(const ObjMesh& mesh) {
  std::map<std::pair<int, int>, int> edges;
  for (const auto& f : mesh.faces)
    for (std::size_t i = 0; i < f.size(); ++i) ++edges[{f[i], f[(i + 1) % f.size()]}];
  for (const auto& [e, count] : edges)
    if (count != 1 || edges.count({e.second, e.first}) == 0) return false;
  return true;
}

}  // namespace

TEST_CASE("harmonic field JSON round trip") {
  const HarmonicField f = random_field(3, 7, 1);
  const Json j = to_json(f);
  CHECK(j["components"] == 3);
  CHECK(j["L"] == 7);
  const HarmonicField g = harmonic_field_from_json(Json::parse(j.dump()));
  CHECK(g.degree() == 7);
  CHECK((f.coeffs() - g.coeffs()).cwiseAbs().maxCoeff() == 0.0);

  // missing triples are zero
  const HarmonicField sparse = harmonic_field_from_json(Json::parse(R"({"components":1,"L":3,"coeffs":[[0,2,-1,0.5]]})"));
  CHECK(sparse(0, 2, -1) == 0.5);
  CHECK(sparse.coeffs().cwiseAbs().sum() == 0.5);
  CHECK(to_json(HarmonicField(1, 2))["coeffs"].empty());
}

TEST_CASE("malformed harmonic field JSON") {
  CHECK_THROWS_AS(harmonic_field_from_json(Json::parse(R"({"L":3,"coeffs":[]})")), DataError);
  CHECK_THROWS_AS(harmonic_field_from_json(Json::parse(R"({"components":1,"L":"x","coeffs":[]})")), DataError);
  CHECK_THROWS_AS(harmonic_field_from_json(Json::parse(R"({"components":1,"L":2,"coeffs":[[0,3,0,1.0]]})")), DataError);
  CHECK_THROWS_AS(harmonic_field_from_json(Json::parse(R"({"components":1,"L":2,"coeffs":[[0,1,2,1.0]]})")), DataError);
  CHECK_THROWS_AS(harmonic_field_from_json(Json::parse(R"({"components":1,"L":2,"coeffs":[[1,1,0,1.0]]})")), DataError);
  CHECK_THROWS_AS(harmonic_field_from_json(Json::parse(R"({"components":1,"L":2,"coeffs":[[0,1,0]]})")), DataError);
  CHECK_THROWS_AS(harmonic_field_from_json(Json::parse(R"({"components":0,"L":2,"coeffs":[]})")), DataError);
}

TEST_CASE("affine function JSON") {
  const AffineFunction ell{Vec3(0.1, -2.0 / 3.0, 1e-300)};
  const Json j = to_json(ell);
  CHECK(j.dump() == Json::parse(j.dump()).dump());
  CHECK(affine_function_from_json(Json::parse(j.dump())).b == ell.b);
  CHECK_THROWS_AS(affine_function_from_json(Json::parse(R"({"b":[1,2]})")), DataError);
  CHECK_THROWS_AS(affine_function_from_json(Json::parse(R"({"c":[1,2,3]})")), DataError);
}

TEST_CASE("file helpers") {
  const fs::path p = scratch("hash.txt");
  write_text(p, "");
  CHECK(file_hash(p) == "cbf29ce484222325");
  write_text(p, "a");
  CHECK(file_hash(p) == "af63dc4c8601ec8c");
  CHECK(read_text(p) == "a");

  const Json j = Json{{"z", 1}, {"a", 2.5}};
  write_json(scratch("order.json"), j);
  CHECK(read_text(scratch("order.json")) == "{\n  \"z\": 1,\n  \"a\": 2.5\n}\n");
  CHECK(read_json(scratch("order.json")) == j);

  write_text(p, "{ not json");
  CHECK_THROWS_AS(read_json(p), DataError);
  CHECK_THROWS_AS(read_text(scratch("absent.json")), IoError);
  CHECK_THROWS_AS(write_text(scratch("no/such/dir/x.json"), "x"), IoError);
}

TEST_CASE("manifest") {
  setenv("SOURCE_DATE_EPOCH", "86400", 1);
  CHECK(manifest_timestamp() == "1970-01-02T00:00:00Z");
  unsetenv("SOURCE_DATE_EPOCH");
  CHECK(manifest_timestamp().size() == 20);

  RunManifest m;
  m.command = "solve";
  m.config = Json{{"L", 8}};
  m.input_hashes = {{"h.json", "0123456789abcdef"}};
  m.outputs = {"out/immersion.json"};
  m.timestamp = "1970-01-01T00:00:00Z";
  const Json j = to_json(m);
  CHECK(j["command"] == "solve");
  CHECK(j["input_hashes"]["h.json"] == "0123456789abcdef");
  CHECK(j["outputs"].size() == 1);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"command", "config", "input_hashes", "outputs", "diagnostics", "timestamp"});
}

TEST_CASE("sphere OBJ export") {
  const int L = 8;
  const SphericalGrid grid(L);
  const HarmonicField F = round_embedding(1.0, L);
  const fs::path path = scratch("sphere.obj");
  export_obj(F, grid, path);
  const ObjMesh mesh = read_obj(path);
  CHECK(mesh.vertices.cols() == (L + 1) * (2 * L + 2) + 2);
  CHECK(mesh.faces.size() == static_cast<std::size_t>((L + 2) * (2 * L + 2)));
  CHECK(closed_and_oriented(mesh));
  // V − E + F = 2
  std::size_t half_edges = 0;
  for (const auto& f : mesh.faces) half_edges += f.size();
  CHECK(static_cast<long>(mesh.vertices.cols()) - static_cast<long>(half_edges / 2) +
            static_cast<long>(mesh.faces.size()) ==
        2);
  // outward orientation
  for (const auto& f : mesh.faces) {
    Vec3 normal = Vec3::Zero(), centre = Vec3::Zero();
    for (std::size_t i = 0; i < f.size(); ++i) {
      normal += Vec3(mesh.vertices.col(f[i])).cross(Vec3(mesh.vertices.col(f[(i + 1) % f.size()])));
      centre += mesh.vertices.col(f[i]);
    }
    CHECK(normal.dot(centre) > 0.0);
  }
}

TEST_CASE("OBJ re-import is exact") {
  const int L = 6;
  const SphericalGrid grid(L);
  HarmonicField F = round_embedding(1.0, L);
  F.coeffs() += 0.05 * random_field(3, L, 4).coeffs();
  const fs::path path = scratch("bumpy.obj");
  export_obj(F, grid, path);
  const ObjMesh mesh = read_obj(path);
  const Eigen::MatrixXd x = synthesize(F, grid);
  CHECK((mesh.vertices.middleCols(1, grid.node_count()).transpose() - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((mesh.vertices.col(0) - evaluate(F, 0.0, 0.0).value).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(export_obj(random_field(1, 2, 1), grid, path), ConfigurationError);
  CHECK_THROWS_AS(export_obj(F, grid, scratch("no/such/dir/x.obj")), IoError);
}

TEST_CASE("disk OBJ export") {
  const DiskGrid grid(2.0, 12, 20);
  const PlanarImmersion E = enneper_blowdown(1.0);
  const fs::path path = scratch("enneper.obj");
  export_obj(E, grid, path);
  const ObjMesh mesh = read_obj(path);
  CHECK(mesh.vertices.cols() == 12 * 20);
  CHECK(mesh.faces.size() == 11u * 20u);
  for (int n = 0; n < grid.node_count(); ++n) CHECK((Vec3(mesh.vertices.col(n)) - E.position(grid.point(n))).norm() == 0.0);
  CHECK_FALSE(closed_and_oriented(mesh));
}

TEST_CASE("malformed OBJ") {
  const fs::path path = scratch("bad.obj");
  write_text(path, "v 0 0 0\nv 1 0 0\nf 1 2\n");
  CHECK_THROWS_AS(read_obj(path), DataError);
  write_text(path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n");
  CHECK_THROWS_AS(read_obj(path), DataError);
  write_text(path, "v 0 0\n");
  CHECK_THROWS_AS(read_obj(path), DataError);
}

TEST_CASE("report JSON is deterministic") {
  SolverConfig config;
  config.degree = 6;
  config.threads = 1;
  HarmonicField H(1, 1);
  H(0, 0, 0) = 2.0 * std::sqrt(kFourPi);
  H(0, 1, 0) = 0.3;
  const Json a = to_json(solve_pmc(H, config)), b = to_json(solve_pmc(H, config));
  CHECK(a.dump(2) == b.dump(2));
  for (const char* key : {"converged", "ell", "balanced_ell", "steps", "residual_history", "final_residual", "report"})
    CHECK(a.contains(key));
  for (const char* key : {"area", "intA2", "gauss_identity", "codazzi_norm", "obstruction", "branch_points"})
    CHECK(a["report"].contains(key));
  CHECK(a["report"]["obstruction"].size() == 3);
}
