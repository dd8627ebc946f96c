#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "microtopt/io/config.hpp"
#include "microtopt/io/density_file.hpp"
#include "microtopt/io/export.hpp"
#include "microtopt/optimizer.hpp"

namespace microtopt::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::string density_path;
  std::string out_dir;
  std::vector<int> resolution;
  std::optional<unsigned long long> seed;
  std::optional<int> threads;
  std::optional<int> samples;
  std::string initial_guess;
};

void configure_logging() {
  const char* env = std::getenv("MICROTOPT_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");
}

io::RunConfig resolve_config(const Options& o) {
  io::RunConfig c = o.config_path.empty() ? io::parse_config("") : io::load_config(o.config_path);
  if (!o.out_dir.empty()) c.output_dir = o.out_dir;
  if (!o.resolution.empty()) {
    c.nx = o.resolution[0];
    c.ny = o.resolution[1];
  }
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.samples) c.gradcheck_samples = *o.samples;
  if (!o.initial_guess.empty()) c.initial_guess = parse_seed_kind(o.initial_guess);
  c.validate();
#ifdef _OPENMP
  if (c.threads > 0) omp_set_num_threads(c.threads);
#endif
  return c;
}

std::string out_path(const io::RunConfig& c, const std::string& name) {
  return (fs::path(c.output_dir) / name).string();
}

io::DensityField load_design(const Options& o, const io::RunConfig& c) {
  io::DensityField f = io::load_density(o.density_path);
  if (!o.resolution.empty() && (f.nx != c.nx || f.ny != c.ny))
    throw Error(ErrorKind::InvalidArgument, "--resolution does not match the density file");
  return f;
}

RveModel model_for(const io::DensityField& f, const io::RunConfig& c) {
  return RveModel(f.mesh(), c.material, c.simp);
}

int homogenize(const Options& o) {
  const io::RunConfig c = resolve_config(o);
  const io::DensityField field = load_design(o, c);
  const RveModel model = model_for(field, c);
  fs::create_directories(c.output_dir);
  const std::string ss_csv = out_path(c, "stress_strain.csv");
  const std::string tan_csv = out_path(c, "tangent.csv");
  try {
    const SolvePath path =
        solve_path(field.rho, c.problem.E_applied, c.problem.path_steps, model, c.problem.solver, true);
    io::write_stress_strain_csv(ss_csv, path.samples);
    io::write_tangent_csv(tan_csv, path.samples);
    const Mat3& C = *path.samples.back().C_eff;
    std::cout << "final S_int = [" << path.final_state.S_int.transpose() << "]\n"
              << "final C_eff =\n" << C << "\n";
    spdlog::info("wrote {} and {}", ss_csv, tan_csv);
    return kSuccess;
  } catch (const PathFailureError& e) {
    io::write_stress_strain_csv(ss_csv, e.partial().samples, std::string(e.what()));
    io::write_tangent_csv(tan_csv, e.partial().samples);
    spdlog::error("{}", e.what());
    return kSolverFailure;
  }
}

int optimize(const Options& o) {
  io::RunConfig c = resolve_config(o);
  if (!o.density_path.empty())
    throw Error(ErrorKind::InvalidArgument,
                "optimize takes its initial guess from --initial-guess, not --density");
  const RveMesh mesh = build_mesh(c.nx, c.ny, c.l1, c.l2, c.thickness);
  const RveModel model(mesh, c.material, c.simp);
  fs::create_directories(c.output_dir);

  auto density_of = [&](const Vector& rho) {
    return io::DensityField{c.nx, c.ny, c.l1, c.l2, c.thickness, rho};
  };

  if (c.target_mode == io::TargetMode::Seed) {
    const DesignProblem problem(model, c.problem);
    const SeedTarget target = make_seed_target(problem, c.target_volume_fraction, c.target_beta);
    c.problem.C_target = target.C_target;
    io::save_density(out_path(c, "target_density.txt"), density_of(target.seed.rho));
    io::write_stress_strain_csv(out_path(c, "target_stress_strain.csv"), target.path.samples);
    spdlog::info("seed target: hole radius {:.6f}, volume fraction {:.6f}", target.seed.radius,
                 target.seed.rho.mean());
  }
  std::cout << "C_target =\n" << c.problem.C_target << "\n";

  const Vector phi0 = nodal_seed(mesh, c.initial_guess, c.problem.v_max);
  std::ofstream history(out_path(c, "history.csv"), std::ios::binary);
  if (!history) throw Error(ErrorKind::Io, "cannot write history.csv");
  history << io::history_header() << '\n';
  if (c.snapshot_every > 0) fs::create_directories(out_path(c, "snapshots"));

  const OptimizationResult res = run_optimization(
      model, c.problem, phi0, [&](const HistoryRecord& rec, const DesignState& d) {
        history << io::history_row(rec) << '\n' << std::flush;
        if (c.snapshot_every > 0 && rec.iteration % c.snapshot_every == 0) {
          char name[64];
          std::snprintf(name, sizeof name, "snapshots/iter_%05d.txt", rec.iteration);
          io::save_density(out_path(c, name), density_of(d.rho));
        }
      });

  io::save_density(out_path(c, "design.txt"), density_of(res.design.rho));
  io::save_density_csv(out_path(c, "design.csv"), density_of(res.design.rho));
  std::cout << "status: " << to_string(res.status) << "\n"
            << "iterations: " << res.history.size() - 1 << "\n"
            << "z = " << io::format_double(res.z) << ", g = " << io::format_double(res.g) << "\n"
            << "C_eff =\n" << res.C_eff << "\n";
  if (res.status == OptimizationStatus::Aborted) {
    history << "# FAILED: " << res.message << '\n';
    if (res.failed_phi) {
      const DesignProblem problem(model, c.problem);
      const RegularizedField f =
          regularize(*res.failed_phi, problem.filter(), problem.symmetry(), res.design.beta, c.problem.eta);
      io::save_density(out_path(c, "failed_design.txt"), density_of(f.rho));
    }
    spdlog::error("optimization aborted: {}", res.message);
    return kSolverFailure;
  }
  return kSuccess;
}

int gradcheck(const Options& o) {
  const io::RunConfig c = resolve_config(o);
  const io::DensityField field = load_design(o, c);
  const RveModel model = model_for(field, c);
  const Vector& rho = field.rho;
  const Mat3 C_target = c.target_mode == io::TargetMode::Explicit ? c.problem.C_target : Mat3::Zero();

  SolveSettings settings = c.problem.solver;
  settings.polish_iterations = std::max(settings.polish_iterations, 2);
  MicroState state;
  try {
    state = solve_path(rho, c.problem.E_applied, c.problem.path_steps, model, settings).final_state;
  } catch (const Error& e) {
    spdlog::error("forward solve failed: {}", e.what());
    return kSolverFailure;
  }
  const SaddleFactorization fac = factorize_at(state, rho, model);
  const AdjointResult adj = adjoint_gradient(state, rho, model, C_target, fac);

  const int ne = model.mesh().num_elements();
  std::vector<int> elements(static_cast<std::size_t>(ne));
  std::iota(elements.begin(), elements.end(), 0);
  std::mt19937_64 rng(c.seed);
  std::shuffle(elements.begin(), elements.end(), rng);
  elements.resize(static_cast<std::size_t>(std::min(ne, c.gradcheck_samples)));

  FdProblem fd;
  fd.model = &model;
  fd.E_applied = c.problem.E_applied;
  fd.C_target = C_target;
  fd.settings = settings;
  fd.n_steps = c.problem.path_steps;
  fd.warm_start = state;
  const std::vector<FdOutcome> outcomes = fd_oracle_many(rho, elements, c.gradcheck_step, fd);

  double scale = 0.0;
  for (const auto& r : outcomes)
    if (r.ok) scale = std::max(scale, std::abs(r.value));
  scale = std::max(scale, 1e-300);

  bool all_ok = true;
  bool solver_failed = false;
  std::printf("z = %.17g\n%8s %24s %24s %12s %s\n", adj.z, "element", "adjoint", "fd", "rel_error", "result");
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const int e = elements[i];
    const double a = adj.gradient.d_rho[e];
    if (!outcomes[i].ok) {
      std::printf("%8d %24.16e %24s %12s FAIL (%s)\n", e, a, "-", "-", outcomes[i].message.c_str());
      solver_failed = true;
      continue;
    }
    const double err = std::abs(a - outcomes[i].value) / scale;
    const bool pass = err < c.gradcheck_tolerance;
    all_ok = all_ok && pass;
    std::printf("%8d %24.16e %24.16e %12.3e %s\n", e, a, outcomes[i].value, err, pass ? "PASS" : "FAIL");
  }
  if (solver_failed) return kSolverFailure;
  return all_ok ? kSuccess : kGradcheckFailure;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  configure_logging();
  CLI::App app{"Finite-strain homogenization and topology optimization of periodic microstructures",
               "microtopt"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out_dir, "Output directory (overrides [output] directory)");
    sub->add_option("--resolution", o.resolution, "Mesh resolution NX NY")
        ->expected(2)
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--threads", o.threads, "Worker threads (0 = runtime default)")
        ->check(CLI::NonNegativeNumber);
  };

  CLI::App* hom = app.add_subcommand("homogenize", "Stress-strain and tangent curves of a density field");
  add_common(hom);
  hom->add_option("--density", o.density_path, "Density file")->required()->check(CLI::ExistingFile);

  CLI::App* opt = app.add_subcommand("optimize", "Match a target tangent by topology optimization");
  add_common(opt);
  opt->add_option("--density", o.density_path, "Not used; optimize starts from --initial-guess");
  opt->add_option("--initial-guess", o.initial_guess, "uniform, circular_hole or cross");

  CLI::App* gc = app.add_subcommand("gradcheck", "Compare adjoint and finite-difference gradients");
  add_common(gc);
  gc->add_option("--density", o.density_path, "Density file")->required()->check(CLI::ExistingFile);
  gc->add_option("--samples", o.samples, "Number of sampled elements")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kSuccess : kUsageError;
  }

  try {
    if (hom->parsed()) return homogenize(o);
    if (opt->parsed()) return optimize(o);
    return gradcheck(o);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    switch (e.kind()) {
      case ErrorKind::InvalidArgument:
      case ErrorKind::Io:
        return kUsageError;
      default:
        return kSolverFailure;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kUsageError;
  }
}

}  // namespace microtopt::cli
