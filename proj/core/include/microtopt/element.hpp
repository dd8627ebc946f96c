#pragma once

#include <array>

#include "microtopt/types.hpp"

namespace microtopt {

/// Isotropic base material, plane stress.
struct MaterialParams {
  double youngs_modulus = 1.0;
  double poisson_ratio = 0.3;

  void validate() const;
  /// E/(1-nu^2) [[1, nu, 0], [nu, 1, 0], [0, 0, (1-nu)/2]] acting on
  /// engineering-shear Voigt strain.
  Mat3 plane_stress_matrix() const;
};

/// SIMP interpolation and the void threshold below which an element's
/// geometric nonlinearity is frozen (small-strain operator).
struct SimpParams {
  double penalty = 3.0;
  double rho_min = 1e-4;
  double rho_void = 0.01;

  void validate() const;
};

struct SimpModulus {
  double modulus = 0.0;
  double derivative = 0.0;
};

/// E(rho) = (rho_min + rho^p (1 - rho_min)) E0 and dE/drho.
SimpModulus simp_modulus(double rho, const MaterialParams& mat, const SimpParams& simp);

/// Kinematics and stress at one Gauss point.
struct ElementQuadState {
  Mat2 F = Mat2::Identity();
  Mat2 E = Mat2::Zero();
  Mat2 S = Mat2::Zero();
};

using ElementVector = Eigen::Matrix<double, 8, 1>;
using ElementMatrix = Eigen::Matrix<double, 8, 8>;
using ElementCoords = Eigen::Matrix<double, 2, 4>;

/// Four-node bilinear total-Lagrangian quadrilateral with 2x2 Gauss
/// quadrature and a Saint Venant-Kirchhoff law. Element DOFs are ordered
/// [u0x, u0y, u1x, u1y, ...].
///
/// All element quantities carry the SIMP factor E(rho)/E0 and the thickness.
/// Elements with rho < rho_void use the linear strain-displacement operator,
/// so their response is linear in u.
class QuadElement {
 public:
  static constexpr int kGaussPoints = 4;

  /// Throws DegenerateElement when the isoparametric Jacobian is not positive.
  QuadElement(const ElementCoords& X, double thickness);

  static std::array<Vec2, kGaussPoints> gauss_points();

  const ElementCoords& coords() const { return X_; }
  double area() const;

  /// Kinematics at an arbitrary parametric point (xi, eta) in [-1, 1]^2,
  /// with S from the unscaled base material.
  ElementQuadState kinematics(const ElementVector& u, const Vec2& xi,
                              const MaterialParams& mat) const;

  /// Strain energy; the internal force is its exact gradient.
  double energy(const ElementVector& u, double rho, const MaterialParams& mat,
                const SimpParams& simp) const;
  ElementVector internal_force(const ElementVector& u, double rho, const MaterialParams& mat,
                               const SimpParams& simp) const;
  ElementMatrix tangent(const ElementVector& u, double rho, const MaterialParams& mat,
                        const SimpParams& simp) const;
  /// Entry p is v^T (dK_e/du_p) w, exact for the Saint Venant-Kirchhoff law.
  ElementVector tangent_directional(const ElementVector& u, const ElementVector& v,
                                    const ElementVector& w, double rho,
                                    const MaterialParams& mat, const SimpParams& simp) const;

  /// Force and tangent in one pass over the Gauss points.
  void force_and_tangent(const ElementVector& u, double rho, const MaterialParams& mat,
                         const SimpParams& simp, ElementVector& f, ElementMatrix& K) const;

  static bool frozen(double rho, const SimpParams& simp) { return rho < simp.rho_void; }

 private:
  struct GaussData {
    Eigen::Matrix<double, 2, 4> dN;  // dN_a/dX_J, row J, column a
    double weight = 0.0;             // w * det J * thickness
  };

  ElementCoords X_;
  double thickness_;
  std::array<GaussData, kGaussPoints> gp_;
};

}  // namespace microtopt
