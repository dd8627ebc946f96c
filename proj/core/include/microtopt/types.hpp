#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace microtopt {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

// Voigt conventions used throughout: strains carry engineering shear
// [E11, E22, 2 E12], stresses carry the plain component [S11, S22, S12].
using VoigtStrain = Vec3;
using VoigtStress = Vec3;

/// Symmetric displacement gradient [G11, G22, G12].
using SymGradient = Vec3;

}  // namespace microtopt
