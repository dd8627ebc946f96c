#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "microtopt/error.hpp"
#include "microtopt/io/config.hpp"
#include "microtopt/io/density_file.hpp"
#include "microtopt/io/export.hpp"
#include "test_support.hpp"

using namespace microtopt;
namespace fs = std::filesystem;

namespace {

std::string tmp(const std::string& name) {
  fs::create_directories(MICROTOPT_TEST_TMP);
  return (fs::path(MICROTOPT_TEST_TMP) / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config defaults") {
  const io::RunConfig c = io::parse_config("");
  CHECK(c.nx == 100);
  CHECK(c.ny == 100);
  CHECK(c.thickness == 0.3);
  CHECK(c.problem.v_max == 0.305);
  CHECK(c.problem.r_min == 0.0875);
  CHECK(c.problem.E_applied == VoigtStrain(0, 0.2, 0));
  CHECK(c.target_mode == io::TargetMode::Seed);
  CHECK(c.target_volume_fraction == 0.305);
  CHECK(c.problem.mma.asyinit == 0.017);
  CHECK(c.problem.mma.c == 1000.0);
}

TEST_CASE("config parsing") {
  const io::RunConfig c = io::parse_config(
      "[mesh]\nnx = 40\nny = 30\n"
      "[load]\nstrain = 0.01 0.1 0.0\nsteps = 7\n"
      "[optimizer]\nv_max = 0.4\ninitial_guess = cross\nsymmetry = false\n"
      "[target]\nmode = explicit\ntensor = 1 2 0 2 3 0 0 0 4\n"
      "[run]\nseed = 42\n");
  CHECK(c.nx == 40);
  CHECK(c.ny == 30);
  CHECK(c.problem.E_applied == VoigtStrain(0.01, 0.1, 0));
  CHECK(c.problem.path_steps == 7);
  CHECK(c.problem.v_max == 0.4);
  CHECK(c.target_volume_fraction == 0.4);
  CHECK(c.initial_guess == SeedKind::Cross);
  CHECK_FALSE(c.problem.enforce_symmetry);
  CHECK(c.target_mode == io::TargetMode::Explicit);
  CHECK(c.problem.C_target(1, 1) == 3.0);
  CHECK(c.problem.C_target(2, 2) == 4.0);
  CHECK(c.seed == 42);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(io::parse_config("[bogus]\nx = 1\n"), Error);
  CHECK_THROWS_AS(io::parse_config("[mesh]\ncolor = red\n"), Error);
  CHECK_THROWS_AS(io::parse_config("nx = 3\n"), Error);
  CHECK_THROWS_AS(io::parse_config("[mesh]\nnx = three\n"), Error);
  CHECK_THROWS_AS(io::parse_config("[mesh]\nnx = 0\n"), Error);
  CHECK_THROWS_AS(io::parse_config("[load]\nstrain = 0 0.1\n"), Error);
  CHECK_THROWS_AS(io::parse_config("[optimizer]\nsymmetry = maybe\n"), Error);
  CHECK_THROWS_AS(io::load_config(tmp("missing.ini")), Error);
}

TEST_CASE("config round trip") {
  io::RunConfig c;
  c.nx = 17;
  c.l1 = 1.0 / 3.0;
  c.problem.E_applied = VoigtStrain(0.1, -0.0123456789012345, 1e-7);
  c.problem.C_target << 1.0 / 7.0, 2, 3, 4, 5, 6, 7, 8, 9;
  c.target_mode = io::TargetMode::Explicit;
  c.output_dir = "some/dir";
  c.seed = 123456789;
  c.problem.solver.arc_length_enabled = true;
  const std::string text = io::serialize_config(c);
  const io::RunConfig d = io::parse_config(text);
  CHECK(io::serialize_config(d) == text);
  CHECK(d.l1 == c.l1);
  CHECK(d.problem.E_applied == c.problem.E_applied);
  CHECK(d.problem.C_target == c.problem.C_target);
  CHECK(d.output_dir == "some/dir");
  CHECK(d.problem.solver.arc_length_enabled);
}

TEST_CASE("density round trip is exact") {
  io::DensityField f{3, 2, 1.5, 1.0, 0.3, testing::random_density(6, 0, 1, 8)};
  f.rho[0] = 0.0;
  f.rho[5] = 1.0;
  const std::string text = io::format_density(f);
  CHECK(text.rfind("microtopt-density 1\n", 0) == 0);
  const io::DensityField g = io::parse_density(text);
  CHECK(g.nx == 3);
  CHECK(g.ny == 2);
  CHECK(g.l1 == 1.5);
  CHECK(g.thickness == 0.3);
  CHECK(g.rho == f.rho);

  io::save_density(tmp("d.txt"), f);
  CHECK(io::load_density(tmp("d.txt")).rho == f.rho);
  CHECK(g.mesh().num_elements() == 6);

  io::save_density_csv(tmp("d.csv"), f);
  const std::string csv = slurp(tmp("d.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(std::count(csv.begin(), csv.end(), ',') == 4);
}

TEST_CASE("density errors") {
  CHECK_THROWS_AS(io::parse_density("hello\n"), Error);
  CHECK_THROWS_AS(io::parse_density("microtopt-density 1\n2 1 1 1 1\n0.5\n"), Error);
  CHECK_THROWS_AS(io::parse_density("microtopt-density 1\n2 1 1 1 1\n0.5 1.5\n"), Error);
  CHECK_THROWS_AS(io::parse_density("microtopt-density 1\n2 1 1 1 1\n0.5 0.5 0.5\n"), Error);
  CHECK_THROWS_AS(io::load_density(tmp("nope.txt")), Error);
}

TEST_CASE("csv exports") {
  CHECK(io::format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(io::format_double(1.0 / 3.0)) == 1.0 / 3.0);

  std::vector<PathSample> samples(2);
  samples[1].load_factor = 1.0;
  samples[1].E = VoigtStrain(0, 0.2, 0);
  samples[1].S_int = VoigtStress(1, 2, 3);
  samples[0].C_eff = Mat3::Identity();
  samples[1].C_eff = 2.0 * Mat3::Identity();
  io::write_stress_strain_csv(tmp("ss.csv"), samples, std::string("diverged"));
  const std::string ss = slurp(tmp("ss.csv"));
  CHECK(ss.rfind("step,load_factor,E11,E22,E12_eng,S11,S22,S12,dS22_dE22\n", 0) == 0);
  CHECK(ss.find("# FAILED: diverged") != std::string::npos);
  CHECK(ss.find("\n1,1,0,0.20000000000000001,0,1,2,3,2\n") != std::string::npos);

  io::write_tangent_csv(tmp("t.csv"), samples);
  CHECK(slurp(tmp("t.csv")).find("C11") != std::string::npos);

  HistoryRecord r;
  r.iteration = 3;
  r.beta_updated = true;
  CHECK(io::history_header().rfind("iteration,z,g,beta", 0) == 0);
  CHECK(io::history_row(r).rfind("3,", 0) == 0);
  io::write_history_csv(tmp("h.csv"), {r, r});
  const std::string h = slurp(tmp("h.csv"));
  CHECK(std::count(h.begin(), h.end(), '\n') == 3);
}
