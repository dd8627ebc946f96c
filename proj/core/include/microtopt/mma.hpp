#pragma once

#include "microtopt/types.hpp"

namespace microtopt {

/// Method of moving asymptotes (Svanberg 1987, with the 2002 interior-point
/// subproblem solver) for
///   min f0(x) + a0 z + sum_i (c_i y_i + d_i y_i^2 / 2)
///   s.t. f_i(x) - a_i z - y_i <= 0, x_min <= x <= x_max, y, z >= 0.
struct MmaSettings {
  double asyinit = 0.017;
  double asydecr = 0.55;
  double asyincr = 1.05;
  /// Smallest asymptote distance, relative to the variable range.
  double asymin = 1e-4;
  double c = 1000.0;
  double d = 1.0;
  double a0 = 1.0;
  double albefa = 0.1;
  double move = 0.1;

  void validate() const;
};

struct MmaState {
  int iteration = 0;
  Vector xold1;
  Vector xold2;
  Vector low;
  Vector upp;
};

struct MmaResult {
  Vector x;
  /// Largest artificial variable y_i; positive means the subproblem relaxed a
  /// constraint it could not satisfy.
  double max_relaxation = 0.0;
  int subsolver_iterations = 0;
};

/// One MMA step on variables bounded by [x_min, x_max]. g holds the m
/// constraint values and dg their gradients as rows (m x n). m = 0 is allowed.
/// The move limit overrides settings.move when positive.
MmaResult mma_update(const Vector& x, const Vector& df0, const Vector& g, const Matrix& dg,
                     const Vector& x_min, const Vector& x_max, MmaState& state,
                     const MmaSettings& settings, double move = -1.0);

}  // namespace microtopt
