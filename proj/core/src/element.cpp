#include "microtopt/element.hpp"

#include <cmath>
#include <string>

#include <Eigen/LU>

#include "microtopt/error.hpp"

namespace microtopt {

void MaterialParams::validate() const {
  require(youngs_modulus > 0.0, "material: Young's modulus must be positive");
  require(poisson_ratio > -1.0 && poisson_ratio < 0.5,
          "material: Poisson ratio must lie in (-1, 0.5)");
}

Mat3 MaterialParams::plane_stress_matrix() const {
  const double nu = poisson_ratio;
  const double c = youngs_modulus / (1.0 - nu * nu);
  Mat3 C;
  C << c, c * nu, 0.0,
       c * nu, c, 0.0,
       0.0, 0.0, c * 0.5 * (1.0 - nu);
  return C;
}

void SimpParams::validate() const {
  require(penalty >= 1.0, "simp: penalty exponent must be >= 1");
  require(rho_min > 0.0 && rho_min < 1.0, "simp: rho_min must lie in (0, 1)");
  require(rho_void >= 0.0 && rho_void < 1.0, "simp: rho_void must lie in [0, 1)");
}

SimpModulus simp_modulus(double rho, const MaterialParams& mat, const SimpParams& simp) {
  if (!(rho >= 0.0 && rho <= 1.0))
    throw_error(ErrorKind::InvalidArgument,
                "simp_modulus: density " + std::to_string(rho) + " outside [0, 1]");
  const double p = simp.penalty;
  SimpModulus out;
  out.modulus = (simp.rho_min + std::pow(rho, p) * (1.0 - simp.rho_min)) * mat.youngs_modulus;
  out.derivative = (rho == 0.0 && p > 1.0)
                       ? 0.0
                       : p * std::pow(rho, p - 1.0) * (1.0 - simp.rho_min) * mat.youngs_modulus;
  return out;
}

namespace {

constexpr std::array<double, 4> kXiNode = {-1.0, 1.0, 1.0, -1.0};
constexpr std::array<double, 4> kEtaNode = {-1.0, -1.0, 1.0, 1.0};

Eigen::Matrix<double, 2, 4> parametric_gradients(const Vec2& xi) {
  Eigen::Matrix<double, 2, 4> g;
  for (int a = 0; a < 4; ++a) {
    g(0, a) = 0.25 * kXiNode[a] * (1.0 + xi.y() * kEtaNode[a]);
    g(1, a) = 0.25 * kEtaNode[a] * (1.0 + xi.x() * kXiNode[a]);
  }
  return g;
}

// Physical gradients dN/dX and det J at a parametric point.
std::pair<Eigen::Matrix<double, 2, 4>, double> physical_gradients(const ElementCoords& X,
                                                                  const Vec2& xi) {
  const Eigen::Matrix<double, 2, 4> dNxi = parametric_gradients(xi);
  const Mat2 J = X * dNxi.transpose();
  const double detJ = J.determinant();
  if (!(detJ > 0.0))
    throw_error(ErrorKind::DegenerateElement,
                "quad element: non-positive isoparametric Jacobian " + std::to_string(detJ));
  return {J.inverse().transpose() * dNxi, detJ};
}

// Gradient of a nodal vector field: G(i, J) = sum_a v(2a+i) dN_a/dX_J.
Mat2 nodal_gradient(const ElementVector& v, const Eigen::Matrix<double, 2, 4>& dN) {
  Mat2 G = Mat2::Zero();
  for (int a = 0; a < 4; ++a) {
    G(0, 0) += v[2 * a] * dN(0, a);
    G(0, 1) += v[2 * a] * dN(1, a);
    G(1, 0) += v[2 * a + 1] * dN(0, a);
    G(1, 1) += v[2 * a + 1] * dN(1, a);
  }
  return G;
}

// Voigt strain-displacement operator sym(A^T dN) for a given 2x2 "A".
// A = F gives dE/du; A = I gives the small-strain operator; A = grad v gives
// the columns of the second variation d^2E[v, e_p].
Eigen::Matrix<double, 3, 8> strain_operator(const Mat2& A, const Eigen::Matrix<double, 2, 4>& dN) {
  Eigen::Matrix<double, 3, 8> B;
  for (int a = 0; a < 4; ++a) {
    for (int i = 0; i < 2; ++i) {
      const int c = 2 * a + i;
      B(0, c) = A(i, 0) * dN(0, a);
      B(1, c) = A(i, 1) * dN(1, a);
      B(2, c) = A(i, 0) * dN(1, a) + A(i, 1) * dN(0, a);
    }
  }
  return B;
}

Vec3 green_lagrange_voigt(const Mat2& F) {
  const Mat2 E = 0.5 * (F.transpose() * F - Mat2::Identity());
  return {E(0, 0), E(1, 1), 2.0 * E(0, 1)};
}

Vec3 small_strain_voigt(const Mat2& G) { return {G(0, 0), G(1, 1), G(0, 1) + G(1, 0)}; }

// Voigt form of sym(Ga^T Gb), engineering shear.
Vec3 second_variation_voigt(const Mat2& Ga, const Mat2& Gb) {
  return {Ga(0, 0) * Gb(0, 0) + Ga(1, 0) * Gb(1, 0),
          Ga(0, 1) * Gb(0, 1) + Ga(1, 1) * Gb(1, 1),
          Ga(0, 0) * Gb(0, 1) + Ga(1, 0) * Gb(1, 1) + Ga(0, 1) * Gb(0, 0) + Ga(1, 1) * Gb(1, 0)};
}

Mat2 voigt_stress_to_matrix(const Vec3& s) {
  Mat2 S;
  S << s[0], s[2], s[2], s[1];
  return S;
}

Mat2 voigt_strain_to_matrix(const Vec3& e) {
  Mat2 E;
  E << e[0], 0.5 * e[2], 0.5 * e[2], e[1];
  return E;
}

double simp_factor(double rho, const MaterialParams& mat, const SimpParams& simp) {
  return simp_modulus(rho, mat, simp).modulus / mat.youngs_modulus;
}

}  // namespace

std::array<Vec2, QuadElement::kGaussPoints> QuadElement::gauss_points() {
  const double g = 1.0 / std::sqrt(3.0);
  return {Vec2(-g, -g), Vec2(g, -g), Vec2(g, g), Vec2(-g, g)};
}

QuadElement::QuadElement(const ElementCoords& X, double thickness) : X_(X), thickness_(thickness) {
  require(thickness > 0.0, "quad element: thickness must be positive");
  const auto pts = gauss_points();
  for (int q = 0; q < kGaussPoints; ++q) {
    auto [dN, detJ] = physical_gradients(X_, pts[q]);
    gp_[q].dN = dN;
    gp_[q].weight = detJ * thickness_;
  }
}

double QuadElement::area() const {
  double a = 0.0;
  for (const auto& g : gp_) a += g.weight;
  return a / thickness_;
}

ElementQuadState QuadElement::kinematics(const ElementVector& u, const Vec2& xi,
                                         const MaterialParams& mat) const {
  const auto dN = physical_gradients(X_, xi).first;
  ElementQuadState s;
  s.F = Mat2::Identity() + nodal_gradient(u, dN);
  const Vec3 e = green_lagrange_voigt(s.F);
  s.E = voigt_strain_to_matrix(e);
  s.S = voigt_stress_to_matrix(mat.plane_stress_matrix() * e);
  return s;
}

double QuadElement::energy(const ElementVector& u, double rho, const MaterialParams& mat,
                           const SimpParams& simp) const {
  const Mat3 C = mat.plane_stress_matrix();
  const bool lin = frozen(rho, simp);
  double W = 0.0;
  for (const auto& g : gp_) {
    const Mat2 Gu = nodal_gradient(u, g.dN);
    const Vec3 e = lin ? small_strain_voigt(Gu) : green_lagrange_voigt(Mat2::Identity() + Gu);
    W += 0.5 * g.weight * e.dot(C * e);
  }
  return simp_factor(rho, mat, simp) * W;
}

ElementVector QuadElement::internal_force(const ElementVector& u, double rho,
                                          const MaterialParams& mat,
                                          const SimpParams& simp) const {
  const Mat3 C = mat.plane_stress_matrix();
  const bool lin = frozen(rho, simp);
  ElementVector f = ElementVector::Zero();
  for (const auto& g : gp_) {
    const Mat2 Gu = nodal_gradient(u, g.dN);
    if (lin) {
      const auto B = strain_operator(Mat2::Identity(), g.dN);
      f += g.weight * B.transpose() * (C * small_strain_voigt(Gu));
    } else {
      const Mat2 F = Mat2::Identity() + Gu;
      const auto B = strain_operator(F, g.dN);
      f += g.weight * B.transpose() * (C * green_lagrange_voigt(F));
    }
  }
  return simp_factor(rho, mat, simp) * f;
}

void QuadElement::force_and_tangent(const ElementVector& u, double rho, const MaterialParams& mat,
                                    const SimpParams& simp, ElementVector& f,
                                    ElementMatrix& K) const {
  const Mat3 C = mat.plane_stress_matrix();
  const bool lin = frozen(rho, simp);
  f.setZero();
  K.setZero();
  for (const auto& g : gp_) {
    const Mat2 Gu = nodal_gradient(u, g.dN);
    if (lin) {
      const auto B = strain_operator(Mat2::Identity(), g.dN);
      f.noalias() += g.weight * B.transpose() * (C * small_strain_voigt(Gu));
      K.noalias() += g.weight * B.transpose() * C * B;
      continue;
    }
    const Mat2 F = Mat2::Identity() + Gu;
    const auto B = strain_operator(F, g.dN);
    const Vec3 S = C * green_lagrange_voigt(F);
    f.noalias() += g.weight * B.transpose() * S;
    K.noalias() += g.weight * B.transpose() * C * B;
    // Initial-stress part: (grad N_a . S grad N_b) on both displacement components.
    const Mat2 Sm = voigt_stress_to_matrix(S);
    const Eigen::Matrix4d Gab = g.dN.transpose() * Sm * g.dN;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        K(2 * a, 2 * b) += g.weight * Gab(a, b);
        K(2 * a + 1, 2 * b + 1) += g.weight * Gab(a, b);
      }
  }
  const double s = simp_factor(rho, mat, simp);
  f *= s;
  K *= s;
}

ElementMatrix QuadElement::tangent(const ElementVector& u, double rho, const MaterialParams& mat,
                                   const SimpParams& simp) const {
  ElementVector f;
  ElementMatrix K;
  force_and_tangent(u, rho, mat, simp, f, K);
  return K;
}

ElementVector QuadElement::tangent_directional(const ElementVector& u, const ElementVector& v,
                                               const ElementVector& w, double rho,
                                               const MaterialParams& mat,
                                               const SimpParams& simp) const {
  ElementVector out = ElementVector::Zero();
  if (frozen(rho, simp)) return out;
  const Mat3 C = mat.plane_stress_matrix();
  for (const auto& g : gp_) {
    const Mat2 F = Mat2::Identity() + nodal_gradient(u, g.dN);
    const Mat2 Gv = nodal_gradient(v, g.dN);
    const Mat2 Gw = nodal_gradient(w, g.dN);
    const auto BF = strain_operator(F, g.dN);
    const auto Bv = strain_operator(Gv, g.dN);
    const auto Bw = strain_operator(Gw, g.dN);
    // d/du_p [dE[v] . C dE[w] + S . d2E[v, w]]
    const Vec3 Cdw = C * (BF * w);
    const Vec3 Cdv = C * (BF * v);
    const Vec3 Hvw = second_variation_voigt(Gv, Gw);
    out.noalias() += g.weight * (Bv.transpose() * Cdw + Bw.transpose() * Cdv +
                                 BF.transpose() * (C * Hvw));
  }
  return simp_factor(rho, mat, simp) * out;
}

}  // namespace microtopt
