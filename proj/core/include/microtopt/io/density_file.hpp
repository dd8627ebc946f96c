#pragma once

#include <string>

#include "microtopt/rve_mesh.hpp"
#include "microtopt/types.hpp"

namespace microtopt::io {

/// Element density grid. Text layout:
///   microtopt-density 1
///   nx ny l1 l2 thickness
///   ny lines of nx values, element rows from the bottom (row-major ids)
/// Values are written with 17 significant digits so save/load is exact.
struct DensityField {
  int nx = 0;
  int ny = 0;
  double l1 = 1.0;
  double l2 = 1.0;
  double thickness = 1.0;
  Vector rho;

  void validate() const;
  RveMesh mesh() const;
};

std::string format_density(const DensityField& field);
DensityField parse_density(const std::string& text);

void save_density(const std::string& path, const DensityField& field);
DensityField load_density(const std::string& path);

/// Plain CSV grid, one row per element row.
void save_density_csv(const std::string& path, const DensityField& field);

}  // namespace microtopt::io
