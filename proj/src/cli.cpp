#include "pmc/cli.hpp"

#include <CLI11.hpp>

#include "pmc/surface_io.hpp"

namespace pmc {
namespace fs = std::filesystem;

namespace {

struct SolveArgs {
  std::string h_target, out_dir = "pmc_out";
  SolverConfig config;
};

struct VerifyArgs {
  std::string immersion, out_dir;
  int degree = 48;
};

struct BalanceArgs {
  std::string h, weight, out_dir;
  int degree = 24;
};

struct ExampleArgs {
  std::string family, obj;
  double param = 1.0;
  double radius = 50.0;
  int radial = 48, angular = 96;
};

struct ExportArgs {
  std::string in, out;
  int degree = 0;
};

fs::path manifest_beside(const fs::path& file) {
  fs::path p = file;
  p.replace_extension(".manifest.json");
  return p;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

RunManifest start_manifest(const std::string& command, Json config, const std::vector<std::string>& inputs) {
  RunManifest m;
  m.command = command;
  m.config = std::move(config);
  for (const std::string& in : inputs) m.input_hashes.emplace_back(in, file_hash(in));
  m.timestamp = manifest_timestamp();
  return m;
}

HarmonicField load_field(const std::string& path, int components) {
  HarmonicField f = harmonic_field_from_json(read_json(path));
  if (f.components() != components)
    throw DataError(path + ": expected " + std::to_string(components) + " component(s), found " +
                    std::to_string(f.components()));
  return f;
}

int run_solve(const SolveArgs& a, std::ostream& out) {
  const HarmonicField H = load_field(a.h_target, 1);
  const SolveResult result = solve_pmc(H, a.config);
  const fs::path dir = a.out_dir;
  ensure_directory(dir);
  RunManifest m = start_manifest("solve", to_json(a.config), {a.h_target});
  const std::vector<std::pair<std::string, Json>> files = {
      {"immersion.json", to_json(result.F)}, {"ell.json", to_json(result.ell)}, {"report.json", to_json(result)}};
  for (const auto& [name, j] : files) {
    write_json(dir / name, j);
    m.outputs.push_back((dir / name).string());
  }
  export_obj(result.F, SphericalGrid(a.config.degree), dir / "surface.obj");
  m.outputs.push_back((dir / "surface.obj").string());
  Json step_residuals = Json::array();
  for (const StepRecord& step : result.state.steps)
    step_residuals.push_back(Json{{"s", step.s}, {"residual", step.residual}, {"accepted", step.accepted}});
  m.diagnostics = Json{{"converged", result.converged},
                       {"h_target", to_json(H)},
                       {"ell", to_json(result.ell)},
                       {"step_residuals", step_residuals},
                       {"residual_history", result.state.residual_history},
                       {"final_residual", to_json(result.final_residual)},
                       {"report", to_json(result.report)},
                       {"wall_seconds", result.wall_seconds}};
  if (!result.converged) m.diagnostics["stall"] = result.diagnostic;
  write_json(dir / "manifest.json", to_json(m));

  out << Json{{"converged", result.converged}, {"ell", to_json(result.ell)},
              {"final_residual", to_json(result.final_residual)}, {"out_dir", dir.string()}}
             .dump(2)
      << '\n';
  return result.converged ? 0 : 2;
}

int run_verify(const VerifyArgs& a, std::ostream& out) {
  const HarmonicField F = load_field(a.immersion, 3);
  const SphericalGrid grid(std::max(a.degree, F.degree()));
  const VerificationReport report = verify_immersion(ImmersionField(F.with_degree(grid.degree()), grid), grid);
  const Json j = to_json(report);
  if (!a.out_dir.empty()) {
    ensure_directory(a.out_dir);
    const fs::path path = fs::path(a.out_dir) / "report.json";
    write_json(path, j);
    RunManifest m = start_manifest("verify", Json{{"L", grid.degree()}}, {a.immersion});
    m.outputs.push_back(path.string());
    m.diagnostics = Json{{"gauss_identity", report.gauss_identity}, {"codazzi_norm", report.codazzi_norm}};
    write_json(fs::path(a.out_dir) / "manifest.json", to_json(m));
  }
  out << j.dump(2) << '\n';
  return 0;
}

int run_balance(const BalanceArgs& a, std::ostream& out) {
  const HarmonicField H = load_field(a.h, 1);
  const bool round = a.weight == "round";
  std::vector<std::string> inputs{a.h};
  int degree = std::max(a.degree, H.degree());
  HarmonicField W;
  if (!round) {
    W = load_field(a.weight, 1);
    degree = std::max(degree, W.degree());
    inputs.push_back(a.weight);
  }
  const SphericalGrid grid(degree);
  const Eigen::VectorXd h = synthesize(H.with_degree(degree), grid).col(0);
  const Eigen::VectorXd w =
      round ? Eigen::VectorXd::Ones(grid.node_count()) : Eigen::VectorXd(synthesize(W.with_degree(degree), grid).col(0));
  const CanonicalRepresentative rep = canonical_representative(h, w, grid);
  Json j;
  j["b"] = to_json(rep.ell)["b"];
  j["constant"] = rep.ell.constant();
  j["condition"] = rep.condition;
  j["H_rep_min"] = rep.values.minCoeff();
  j["H_rep_max"] = rep.values.maxCoeff();
  j["H_rep"] = to_json(analyze(rep.values, grid));
  if (!a.out_dir.empty()) {
    ensure_directory(a.out_dir);
    const fs::path path = fs::path(a.out_dir) / "balance.json";
    write_json(path, j);
    RunManifest m = start_manifest("balance", Json{{"L", degree}, {"weight", a.weight}}, inputs);
    m.outputs.push_back(path.string());
    m.diagnostics = Json{{"condition", rep.condition}};
    write_json(fs::path(a.out_dir) / "manifest.json", to_json(m));
  }
  out << j.dump(2) << '\n';
  return 0;
}

int run_example(const ExampleArgs& a, std::ostream& out) {
  Family family = Family::odd;
  int k = 1;
  double t = 1.0;
  if (a.family == "enneper") {
    t = a.param;
  } else {
    family = a.family == "odd" ? Family::odd : Family::even;
    if (a.param != std::floor(a.param) || a.param < 1.0)
      throw ConfigurationError("--param must be an integer k ≥ 1 for the " + a.family + " family");
    k = static_cast<int>(a.param);
  }
  const PlanarImmersion P(family, k, t);
  const DiskGrid grid(a.radius, a.radial, a.angular);
  const PlanarSurface S = sample(P, grid);
  double conformality = 0.0;
  for (int n = 0; n < grid.node_count(); ++n) {
    const Eigen::Vector3cd fz = S.gradient.row(n).transpose();
    conformality = std::max(conformality, std::abs(fz.array().square().sum()));
  }
  Json curvature = Json::array();
  for (const TotalCurvature& tc : total_curvature(P, {0.4 * a.radius, 0.7 * a.radius, a.radius}))
    curvature.push_back(Json{{"radius", tc.radius}, {"abs_gauss", tc.abs_gauss}, {"intA2", tc.second_form_norm2}});
  Json j;
  j["family"] = a.family;
  j["k"] = k;
  j["t"] = t;
  j["radius"] = a.radius;
  j["max_abs_H"] = S.mean_curvature.cwiseAbs().maxCoeff();
  j["conformality_sup"] = conformality;
  j["total_curvature"] = std::move(curvature);
  const Json branches = to_json(detect_branch_points(P, grid));
  j["branch_points"] = branches["branch_points"];
  j["unresolved"] = branches["unresolved"];
  if (!a.obj.empty()) {
    export_obj(P, grid, a.obj);
    RunManifest m = start_manifest(
        "example", Json{{"family", a.family}, {"param", a.param}, {"radius", a.radius}, {"radial", a.radial},
                        {"angular", a.angular}},
        {});
    m.outputs.push_back(a.obj);
    m.diagnostics = Json{{"max_abs_H", j["max_abs_H"]}};
    write_json(manifest_beside(a.obj), to_json(m));
  }
  out << j.dump(2) << '\n';
  return 0;
}

int run_export(const ExportArgs& a, std::ostream& out) {
  const HarmonicField F = load_field(a.in, 3);
  const int degree = std::max({a.degree, F.degree(), 1});
  const SphericalGrid grid(degree);
  export_obj(F.with_degree(degree), grid, a.out);
  RunManifest m = start_manifest("export-obj", Json{{"L", degree}}, {a.in});
  m.outputs.push_back(a.out);
  m.diagnostics = Json{{"vertices", grid.node_count() + 2}};
  write_json(manifest_beside(a.out), to_json(m));
  out << a.out << '\n';
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prescribed mean curvature immersions of the sphere"};
  app.name("pmc");
  app.require_subcommand(1);

  SolveArgs solve;
  auto* solve_cmd = app.add_subcommand("solve", "Continuation solve for H_target + ℓ");
  solve_cmd->add_option("--h-target", solve.h_target, "Target mean curvature (HarmonicField JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  solve_cmd->add_option("--L", solve.config.degree, "Harmonic degree")->capture_default_str();
  solve_cmd->add_option("--tol", solve.config.tol, "Residual tolerance")->capture_default_str();
  solve_cmd->add_option("--steps", solve.config.steps, "Continuation steps")->capture_default_str();
  solve_cmd->add_option("--max-newton", solve.config.max_newton, "Newton iterations per step")->capture_default_str();
  solve_cmd->add_option("--noise", solve.config.initial_noise, "Perturbation of the round start")->capture_default_str();
  solve_cmd->add_option("--seed", solve.config.seed, "Seed for the perturbation")->capture_default_str();
  solve_cmd->add_option("--threads", solve.config.threads, "Jacobian workers (0: PMC_THREADS)")->capture_default_str();
  solve_cmd->add_option("--out-dir", solve.out_dir, "Output directory")->capture_default_str();

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "Verification report of an immersion");
  verify_cmd->add_option("--immersion", verify.immersion, "Immersion (3-component HarmonicField JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  verify_cmd->add_option("--L", verify.degree, "Grid degree")->capture_default_str();
  verify_cmd->add_option("--out-dir", verify.out_dir, "Also write report.json and a manifest here");

  BalanceArgs balance;
  auto* balance_cmd = app.add_subcommand("balance", "Canonical representative H + ℓ");
  balance_cmd->set_help_flag("--help", "Print this help message and exit");  // frees -h/--h
  balance_cmd->add_option("--h", balance.h, "Mean curvature (HarmonicField JSON)")->required()->check(CLI::ExistingFile);
  balance_cmd->add_option("--weight", balance.weight, "Area weight JSON or 'round'")->required();
  balance_cmd->add_option("--L", balance.degree, "Grid degree")->capture_default_str();
  balance_cmd->add_option("--out-dir", balance.out_dir, "Also write balance.json and a manifest here");

  ExampleArgs example;
  auto* example_cmd = app.add_subcommand("example", "Explicit minimal surfaces on a disk");
  example_cmd->add_option("--family", example.family, "enneper, odd or even")
      ->required()
      ->check(CLI::IsMember({"enneper", "odd", "even"}));
  example_cmd->add_option("--param", example.param, "t for enneper, k for odd/even")->required();
  example_cmd->add_option("--radius", example.radius, "Disk radius")->capture_default_str();
  example_cmd->add_option("--radial", example.radial, "Radial nodes")->capture_default_str();
  example_cmd->add_option("--angular", example.angular, "Angular nodes")->capture_default_str();
  example_cmd->add_option("--obj", example.obj, "Write the disk image as OBJ");

  ExportArgs exp;
  auto* export_cmd = app.add_subcommand("export-obj", "OBJ mesh of an immersion");
  export_cmd->add_option("--in", exp.in, "Immersion (3-component HarmonicField JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  export_cmd->add_option("--out", exp.out, "OBJ path")->required();
  export_cmd->add_option("--L", exp.degree, "Grid degree (default: field degree)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 1;
  }

  try {
    if (*solve_cmd) return run_solve(solve, out);
    if (*verify_cmd) return run_verify(verify, out);
    if (*balance_cmd) return run_balance(balance, out);
    if (*example_cmd) return run_example(example, out);
    if (*export_cmd) return run_export(exp, out);
  } catch (const std::exception& e) {
    err << "pmc: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace pmc
