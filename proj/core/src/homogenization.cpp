#include "microtopt/homogenization.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SparseLU>

#include "microtopt/error.hpp"

namespace microtopt {

PbcOperators build_pbc_operators(const RveMesh& mesh, const BoundaryPairing& pairing,
                                 double alpha) {
  require(alpha > 0.0, "pbc operators: alpha must be positive");
  PbcOperators ops;
  const int m = pairing.num_pairs();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(4 * m));
  for (int k = 0; k < m; ++k) {
    const auto [pos, neg] = pairing.pairs[k];
    for (int d = 0; d < 2; ++d) {
      trip.emplace_back(2 * k + d, 2 * pos + d, 1.0);
      trip.emplace_back(2 * k + d, 2 * neg + d, -1.0);
    }
  }
  ops.T_p.resize(2 * m, mesh.num_dofs());
  ops.T_p.setFromTriplets(trip.begin(), trip.end());
  ops.T_X = build_coordinate_operator(mesh);
  ops.T_s << 1, 0, 0,
             0, 0, 1,
             0, 0, 1,
             0, 1, 0;
  ops.alpha = alpha;
  ops.T_pXs = ops.T_p * (ops.T_X * ops.T_s);
  return ops;
}

SymGradient strain_to_symmetric_gradient(const VoigtStrain& E_hat) {
  Mat2 C;
  C << 1.0 + 2.0 * E_hat[0], E_hat[2], E_hat[2], 1.0 + 2.0 * E_hat[1];
  Eigen::SelfAdjointEigenSolver<Mat2> eig(C);
  const Vec2 lam = eig.eigenvalues();
  if (!(lam.minCoeff() > 0.0))
    throw_error(ErrorKind::InadmissibleStrain,
                "macroscale strain is inadmissible: I + 2E is not positive definite");
  const Mat2 U = eig.eigenvectors() * lam.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  return {U(0, 0) - 1.0, U(1, 1) - 1.0, 0.5 * (U(0, 1) + U(1, 0))};
}

Mat3 gradient_matrix(const SymGradient& g) {
  Mat3 G;
  G << g[0], 0.0, g[2],
       0.0, g[1], g[2],
       g[2], g[2], g[0] + g[1];
  return G;
}

Mat3 geometric_stress_matrix(const VoigtStress& s) { return gradient_matrix(s); }

Mat3 gradient_matrix_basis(int k) { return gradient_matrix(Vec3::Unit(k)); }

VoigtStrain symmetric_gradient_to_strain(const SymGradient& G_sym) {
  const Mat3 Ibar = Vec3(1.0, 1.0, 2.0).asDiagonal();
  return (Ibar + 0.5 * gradient_matrix(G_sym)) * G_sym;
}

MacroKinematics make_kinematics(const VoigtStrain& E_hat, const PbcOperators& ops) {
  MacroKinematics k;
  k.E_hat = E_hat;
  k.G_sym = strain_to_symmetric_gradient(E_hat);
  k.Gbar = gradient_matrix(k.G_sym);
  k.Mbar = k.Ibar + k.Gbar;
  Eigen::FullPivLU<Mat3> lu(k.Mbar);
  if (!lu.isInvertible())
    throw_error(ErrorKind::InadmissibleKinematics, "macro kinematics: Mbar is singular");
  k.Mbar_inv = lu.inverse();
  k.Z = ops.T_pXs * k.Mbar_inv;
  return k;
}

VoigtStress internal_macro_stress(const Vector& lambda_hat, const MacroKinematics& kin,
                                  const PbcOperators& ops) {
  require(lambda_hat.size() == kin.Z.rows(), "internal_macro_stress: multiplier size mismatch");
  return ops.alpha * kin.Z.transpose() * lambda_hat;
}

Vector MicroState::fluctuation(const PbcOperators& ops) const {
  return u_hat - ops.T_X * (ops.T_s * kin.G_sym);
}

// ---------------------------------------------------------------------------

RveModel::RveModel(RveMesh mesh, MaterialParams material, SimpParams simp)
    : mesh_(std::move(mesh)), material_(material), simp_(simp) {
  material_.validate();
  simp_.validate();
  pairing_ = build_boundary_pairing(mesh_);
  ops_ = build_pbc_operators(mesh_, pairing_, material_.youngs_modulus);

  const int ne = mesh_.num_elements();
  elements_.reserve(static_cast<std::size_t>(ne));
  element_dofs_.resize(static_cast<std::size_t>(ne));
  for (int e = 0; e < ne; ++e) {
    elements_.emplace_back(mesh_.element_coords(e), mesh_.thickness);
    for (int a = 0; a < 4; ++a) {
      element_dofs_[e][2 * a] = 2 * mesh_.element_connectivity[e][a];
      element_dofs_[e][2 * a + 1] = 2 * mesh_.element_connectivity[e][a] + 1;
    }
  }

  free_index_.assign(static_cast<std::size_t>(mesh_.num_dofs()), -1);
  for (int d = 0; d < mesh_.num_dofs(); ++d) {
    if (d / 2 == mesh_.pinned_node) continue;
    free_index_[d] = num_free_++;
  }

  // -alpha T_p restricted to free columns.
  const int nm = num_multipliers();
  std::vector<Eigen::Triplet<double>> ctrip;
  for (int k = 0; k < ops_.T_p.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(ops_.T_p, k); it; ++it) {
      const int fi = free_index_[it.col()];
      if (fi >= 0) ctrip.emplace_back(static_cast<int>(it.row()), fi, -ops_.alpha * it.value());
    }
  constraint_.resize(nm, num_free_);
  constraint_.setFromTriplets(ctrip.begin(), ctrip.end());

  // Saddle pattern: element blocks plus both constraint blocks.
  std::vector<Eigen::Triplet<double>> strip;
  strip.reserve(static_cast<std::size_t>(64 * ne) + 2 * ctrip.size());
  for (int e = 0; e < ne; ++e)
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        const int ia = free_index_[element_dofs_[e][a]];
        const int ib = free_index_[element_dofs_[e][b]];
        if (ia >= 0 && ib >= 0) strip.emplace_back(ia, ib, 0.0);
      }
  for (const auto& t : ctrip) {
    strip.emplace_back(num_free_ + t.row(), t.col(), t.value());
    strip.emplace_back(t.col(), num_free_ + t.row(), t.value());
  }
  saddle_pattern_.resize(num_unknowns(), num_unknowns());
  saddle_pattern_.setFromTriplets(strip.begin(), strip.end());
  saddle_pattern_.makeCompressed();

  auto slot = [&](int r, int c) {
    const int* inner = saddle_pattern_.innerIndexPtr();
    const int begin = saddle_pattern_.outerIndexPtr()[c];
    const int end = saddle_pattern_.outerIndexPtr()[c + 1];
    const int* it = std::lower_bound(inner + begin, inner + end, r);
    return static_cast<int>(it - inner);
  };
  saddle_slots_.resize(static_cast<std::size_t>(ne));
  for (int e = 0; e < ne; ++e)
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        const int ia = free_index_[element_dofs_[e][a]];
        const int ib = free_index_[element_dofs_[e][b]];
        saddle_slots_[e][8 * a + b] = (ia >= 0 && ib >= 0) ? slot(ia, ib) : -1;
      }
}

ElementVector RveModel::gather(const Vector& full, int e) const {
  ElementVector v;
  for (int a = 0; a < 8; ++a) v[a] = full[element_dofs_[e][a]];
  return v;
}

Vector RveModel::reduce(const Vector& full) const {
  Vector r(num_free_);
  for (int d = 0; d < num_dofs(); ++d)
    if (free_index_[d] >= 0) r[free_index_[d]] = full[d];
  return r;
}

Vector RveModel::expand(const Vector& reduced) const {
  Vector f = Vector::Zero(num_dofs());
  for (int d = 0; d < num_dofs(); ++d)
    if (free_index_[d] >= 0) f[d] = reduced[free_index_[d]];
  return f;
}

void RveModel::check_density(const Vector& rho) const {
  require(rho.size() == mesh_.num_elements(), "density field size does not match the mesh");
  for (Eigen::Index e = 0; e < rho.size(); ++e)
    if (!(rho[e] >= 0.0 && rho[e] <= 1.0))
      throw_error(ErrorKind::InvalidArgument,
                  "density of element " + std::to_string(e) + " outside [0, 1]");
}

Vector RveModel::internal_force(const Vector& u, const Vector& rho) const {
  require(u.size() == num_dofs(), "internal_force: displacement size mismatch");
  check_density(rho);
  const int ne = mesh_.num_elements();
  std::vector<ElementVector> fe(static_cast<std::size_t>(ne));
#pragma omp parallel for schedule(static)
  for (int e = 0; e < ne; ++e)
    fe[e] = elements_[e].internal_force(gather(u, e), rho[e], material_, simp_);
  Vector f = Vector::Zero(num_dofs());
  for (int e = 0; e < ne; ++e)
    for (int a = 0; a < 8; ++a) f[element_dofs_[e][a]] += fe[e][a];
  return f;
}

SparseMatrix RveModel::stiffness(const Vector& u, const Vector& rho) const {
  require(u.size() == num_dofs(), "stiffness: displacement size mismatch");
  check_density(rho);
  std::vector<Eigen::Triplet<double>> trip;
  const int ne = mesh_.num_elements();
  trip.reserve(static_cast<std::size_t>(64 * ne));
  for (int e = 0; e < ne; ++e) {
    const ElementMatrix K = elements_[e].tangent(gather(u, e), rho[e], material_, simp_);
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        const int ia = free_index_[element_dofs_[e][a]];
        const int ib = free_index_[element_dofs_[e][b]];
        if (ia >= 0 && ib >= 0) trip.emplace_back(ia, ib, K(a, b));
      }
  }
  SparseMatrix K(num_free_, num_free_);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

SparseMatrix RveModel::saddle_matrix(const Vector& u, const Vector& rho, Vector* f_int) const {
  require(u.size() == num_dofs(), "saddle_matrix: displacement size mismatch");
  check_density(rho);
  const int ne = mesh_.num_elements();
  std::vector<ElementVector> fe(static_cast<std::size_t>(ne));
  std::vector<ElementMatrix> Ke(static_cast<std::size_t>(ne));
#pragma omp parallel for schedule(static)
  for (int e = 0; e < ne; ++e)
    elements_[e].force_and_tangent(gather(u, e), rho[e], material_, simp_, fe[e], Ke[e]);

  SparseMatrix U = saddle_pattern_;
  double* values = U.valuePtr();
  // Element slots only ever hit the K block, whose pattern entries start at zero.
  const double inv_vol = 1.0 / volume();
  for (int e = 0; e < ne; ++e)
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        const int s = saddle_slots_[e][8 * a + b];
        if (s >= 0) values[s] += inv_vol * Ke[e](a, b);
      }
  if (f_int) {
    f_int->setZero(num_dofs());
    for (int e = 0; e < ne; ++e)
      for (int a = 0; a < 8; ++a) (*f_int)[element_dofs_[e][a]] += fe[e][a];
  }
  return U;
}

MicroState zero_state(const RveModel& model) {
  MicroState s;
  s.u_hat = Vector::Zero(model.num_dofs());
  s.lambda_hat = Vector::Zero(model.num_multipliers());
  s.kin = make_kinematics(VoigtStrain::Zero(), model.ops());
  s.S_int.setZero();
  s.converged = true;
  return s;
}

Vector ResidualBlocks::stacked() const {
  Vector r(equilibrium.size() + constraint.size() + 3);
  r << equilibrium, constraint, stress;
  return r;
}

ResidualBlocks assemble_residual(const MicroState& state, const Vector& rho, const RveModel& model,
                                 const std::optional<VoigtStress>& applied_S) {
  require(state.u_hat.size() == model.num_dofs() &&
              state.lambda_hat.size() == model.num_multipliers() &&
              state.kin.Z.rows() == model.num_multipliers(),
          "assemble_residual: state dimensions do not match the model");
  const PbcOperators& ops = model.ops();
  ResidualBlocks r;
  r.equilibrium = model.internal_force(state.u_hat, rho) / model.volume() -
                  ops.alpha * (ops.T_p.transpose() * state.lambda_hat);
  r.constraint = -ops.alpha * (ops.T_p * state.u_hat) + ops.alpha * (ops.T_pXs * state.kin.G_sym);
  r.S_int = internal_macro_stress(state.lambda_hat, state.kin, ops);
  r.stress = applied_S ? Vec3(r.S_int - *applied_S) : Vec3::Zero();
  return r;
}

// ---------------------------------------------------------------------------

struct SaddleFactorization::Impl {
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
  Eigen::Index rows = 0;
  Eigen::Index nnz = 0;
};

SaddleFactorization::SaddleFactorization() : impl_(std::make_unique<Impl>()) {}
SaddleFactorization::~SaddleFactorization() = default;
SaddleFactorization::SaddleFactorization(SaddleFactorization&&) noexcept = default;
SaddleFactorization& SaddleFactorization::operator=(SaddleFactorization&&) noexcept = default;

void SaddleFactorization::factorize(const SparseMatrix& upsilon) {
  ready_ = false;
  if (!impl_->analyzed || impl_->rows != upsilon.rows() || impl_->nnz != upsilon.nonZeros()) {
    impl_->lu.analyzePattern(upsilon);
    impl_->analyzed = true;
    impl_->rows = upsilon.rows();
    impl_->nnz = upsilon.nonZeros();
  }
  impl_->lu.factorize(upsilon);
  if (impl_->lu.info() != Eigen::Success)
    throw_error(ErrorKind::StructuralSingularity,
                "saddle-point factorization failed: " + impl_->lu.lastErrorMessage());
  ready_ = true;
}

Matrix SaddleFactorization::solve(const Matrix& rhs) const {
  require(ready_, "SaddleFactorization::solve called before factorize");
  Matrix x = impl_->lu.solve(rhs);
  return x;
}

Vector SaddleFactorization::solve(const Vector& rhs) const {
  require(ready_, "SaddleFactorization::solve called before factorize");
  Vector x = impl_->lu.solve(rhs);
  return x;
}

SaddleFactorization factorize_at(const MicroState& state, const Vector& rho, const RveModel& model) {
  SaddleFactorization f;
  f.factorize(model.saddle_matrix(state.u_hat, rho));
  return f;
}

EffectiveTangent effective_tangent(const MicroState& state, const RveModel& model,
                                   const SaddleFactorization& factorization, bool with_psi) {
  const PbcOperators& ops = model.ops();
  const MacroKinematics& kin = state.kin;
  const int nf = model.num_free_dofs();
  const int nm = model.num_multipliers();
  const double alpha = ops.alpha;

  EffectiveTangent t;
  const VoigtStress S = internal_macro_stress(state.lambda_hat, kin, ops);
  t.Sbar = geometric_stress_matrix(S);
  t.C_s = -kin.Mbar_inv * t.Sbar * kin.Mbar_inv;

  Matrix rhs = Matrix::Zero(nf + nm, 3);
  rhs.bottomRows(nm) = kin.Z;
  const Matrix sol = factorization.solve(rhs);
  t.psi_inv_z = alpha * alpha * sol.bottomRows(nm);
  t.C_eff = t.C_s - kin.Z.transpose() * t.psi_inv_z;
  if (!t.C_eff.allFinite())
    throw_error(ErrorKind::RankDeficiency, "effective tangent is not finite");

  t.V = Matrix::Zero(model.num_dofs(), 3);
  const double scale = alpha / model.volume();
  for (int c = 0; c < 3; ++c) t.V.col(c) = model.expand(scale * sol.col(c).head(nf));

  if (with_psi) {
    Matrix e = Matrix::Zero(nf + nm, nm);
    e.bottomRows(nm).setIdentity();
    const Matrix psi_inv = alpha * alpha * factorization.solve(e).bottomRows(nm);
    Eigen::FullPivLU<Matrix> lu(psi_inv);
    if (!lu.isInvertible())
      throw_error(ErrorKind::RankDeficiency,
                  "Schur matrix Psi does not exist: K is singular on the constraint space");
    t.Psi = lu.inverse();
  }
  return t;
}

}  // namespace microtopt
