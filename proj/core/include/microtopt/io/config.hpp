#pragma once

#include <string>

#include "microtopt/element.hpp"
#include "microtopt/optimizer.hpp"
#include "microtopt/seeds.hpp"

namespace microtopt::io {

enum class TargetMode { Seed, Explicit };

/// Full run configuration. Defaults reproduce the reference problem
/// (20% uniaxial strain, V_max 0.305, r_min 0.0875, thickness 0.3) on a
/// 100 x 100 mesh.
struct RunConfig {
  int nx = 100;
  int ny = 100;
  double l1 = 1.0;
  double l2 = 1.0;
  double thickness = 0.3;
  MaterialParams material;
  SimpParams simp;
  ProblemConfig problem;

  TargetMode target_mode = TargetMode::Seed;
  /// Volume fraction of the regularized circular-hole target seed; defaults to V_max.
  double target_volume_fraction = 0.305;
  double target_beta = 100.0;

  SeedKind initial_guess = SeedKind::CircularHole;
  int snapshot_every = 0;

  std::string output_dir = "out";
  unsigned long long seed = 0;
  int threads = 0;

  int gradcheck_samples = 10;
  double gradcheck_step = 1e-6;
  double gradcheck_tolerance = 1e-4;

  void validate() const;
};

/// Parses INI text with sections [mesh], [material], [simp], [load],
/// [target], [optimizer], [solver], [output], [run] and [gradcheck].
/// Missing keys keep their defaults; unknown sections or keys throw
/// InvalidArgument.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Serializes every key with full precision; parse_config inverts it.
std::string serialize_config(const RunConfig& config);

}  // namespace microtopt::io
