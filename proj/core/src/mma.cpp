#include "microtopt/mma.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "microtopt/error.hpp"

namespace microtopt {

void MmaSettings::validate() const {
  require(asyinit > 0.0 && asyinit < 1.0, "mma: asyinit must lie in (0, 1)");
  require(asydecr > 0.0 && asydecr < 1.0, "mma: asydecr must lie in (0, 1)");
  require(asyincr >= 1.0, "mma: asyincr must be >= 1");
  require(c > 0.0 && d >= 0.0 && a0 > 0.0, "mma: c, d, a0 must be positive");
  require(albefa > 0.0 && albefa < 1.0, "mma: albefa must lie in (0, 1)");
  require(asymin > 0.0 && asymin <= asyinit, "mma: asymin must lie in (0, asyinit]");
  require(move > 0.0 && move <= 1.0, "mma: move must lie in (0, 1]");
}

namespace {

using Array = Eigen::ArrayXd;

struct Subproblem {
  int m = 0;
  int n = 0;
  Array low, upp, alfa, beta, p0, q0;
  Matrix P, Q;
  Vector b;
  double a0 = 1.0;
  Vector a, c, d;
};

struct Iterate {
  Array x, xsi, eta;
  Vector y, lam, mu, s;
  double z = 1.0;
  double zet = 1.0;
};

struct Residual {
  Vector r;
  double norm() const { return r.norm(); }
  double max() const { return r.size() ? r.cwiseAbs().maxCoeff() : 0.0; }
};

Residual kkt_residual(const Subproblem& sp, const Iterate& it, double epsi) {
  const int m = sp.m;
  const int n = sp.n;
  const Array ux1 = sp.upp - it.x;
  const Array xl1 = it.x - sp.low;
  const Array plam = sp.p0 + (sp.P.transpose() * it.lam).array();
  const Array qlam = sp.q0 + (sp.Q.transpose() * it.lam).array();
  const Vector gvec = sp.P * (1.0 / ux1).matrix() + sp.Q * (1.0 / xl1).matrix();
  const Array dpsidx = plam / ux1.square() - qlam / xl1.square();

  Residual res;
  res.r.resize(3 * n + 4 * m + 2);
  int k = 0;
  res.r.segment(k, n) = (dpsidx - it.xsi + it.eta).matrix();
  k += n;
  res.r.segment(k, m) = sp.c + sp.d.cwiseProduct(it.y) - it.mu - it.lam;
  k += m;
  res.r[k++] = sp.a0 - it.zet - sp.a.dot(it.lam);
  res.r.segment(k, m) = gvec - sp.a * it.z - it.y + it.s - sp.b;
  k += m;
  res.r.segment(k, n) = (it.xsi * (it.x - sp.alfa) - epsi).matrix();
  k += n;
  res.r.segment(k, n) = (it.eta * (sp.beta - it.x) - epsi).matrix();
  k += n;
  res.r.segment(k, m) = (it.mu.array() * it.y.array() - epsi).matrix();
  k += m;
  res.r[k++] = it.zet * it.z - epsi;
  res.r.segment(k, m) = (it.lam.array() * it.s.array() - epsi).matrix();
  return res;
}

Iterate subsolve(const Subproblem& sp, int& iterations) {
  const int m = sp.m;
  const double epsimin = 1e-7;
  Iterate it;
  it.x = 0.5 * (sp.alfa + sp.beta);
  it.y = Vector::Ones(m);
  it.lam = Vector::Ones(m);
  it.xsi = (1.0 / (it.x - sp.alfa)).max(1.0);
  it.eta = (1.0 / (sp.beta - it.x)).max(1.0);
  it.mu = (0.5 * sp.c.array()).max(1.0).matrix();
  it.s = Vector::Ones(m);

  double epsi = 1.0;
  while (epsi > epsimin) {
    Residual res = kkt_residual(sp, it, epsi);
    double resnorm = res.norm();
    double resmax = res.max();
    int inner = 0;
    while (resmax > 0.9 * epsi && inner < 200) {
      ++inner;
      ++iterations;
      const Array ux1 = sp.upp - it.x;
      const Array xl1 = it.x - sp.low;
      const Array ux2 = ux1.square();
      const Array xl2 = xl1.square();
      const Array plam = sp.p0 + (sp.P.transpose() * it.lam).array();
      const Array qlam = sp.q0 + (sp.Q.transpose() * it.lam).array();
      const Vector gvec = sp.P * (1.0 / ux1).matrix() + sp.Q * (1.0 / xl1).matrix();
      const Matrix GG = sp.P * (1.0 / ux2).matrix().asDiagonal() -
                        sp.Q * (1.0 / xl2).matrix().asDiagonal();
      const Array dpsidx = plam / ux2 - qlam / xl2;
      const Array delx = dpsidx - epsi / (it.x - sp.alfa) + epsi / (sp.beta - it.x);
      const Vector dely = sp.c + sp.d.cwiseProduct(it.y) - it.lam -
                          (epsi / it.y.array()).matrix();
      const double delz = sp.a0 - sp.a.dot(it.lam) - epsi / it.z;
      const Vector dellam = gvec - sp.a * it.z - it.y - sp.b +
                            (epsi / it.lam.array()).matrix();
      const Array diagx = 2.0 * (plam / (ux1 * ux2) + qlam / (xl1 * xl2)) +
                          it.xsi / (it.x - sp.alfa) + it.eta / (sp.beta - it.x);
      const Vector diagy = sp.d + (it.mu.array() / it.y.array()).matrix();
      const Vector diaglamyi = (it.s.array() / it.lam.array() + 1.0 / diagy.array()).matrix();

      // Reduced (m + 1) system in (dlam, dz).
      const Vector blam = dellam + (dely.array() / diagy.array()).matrix() -
                          GG * (delx / diagx).matrix();
      Matrix AA(m + 1, m + 1);
      AA.topLeftCorner(m, m) = Matrix(diaglamyi.asDiagonal()) +
                               GG * (1.0 / diagx).matrix().asDiagonal() * GG.transpose();
      AA.topRightCorner(m, 1) = sp.a;
      AA.bottomLeftCorner(1, m) = sp.a.transpose();
      AA(m, m) = -it.zet / it.z;
      Vector bb(m + 1);
      bb << blam, delz;
      const Vector sol = AA.fullPivLu().solve(bb);
      const Vector dlam = sol.head(m);
      const double dz = sol[m];
      const Array dx = -delx / diagx - (GG.transpose() * dlam).array() / diagx;
      const Vector dy = ((-dely + dlam).array() / diagy.array()).matrix();
      const Array dxsi = -it.xsi + epsi / (it.x - sp.alfa) - it.xsi * dx / (it.x - sp.alfa);
      const Array deta = -it.eta + epsi / (sp.beta - it.x) + it.eta * dx / (sp.beta - it.x);
      const Vector dmu = (-it.mu.array() + epsi / it.y.array() -
                          it.mu.array() * dy.array() / it.y.array()).matrix();
      const double dzet = -it.zet + epsi / it.z - it.zet * dz / it.z;
      const Vector ds = (-it.s.array() + epsi / it.lam.array() -
                         it.s.array() * dlam.array() / it.lam.array()).matrix();

      // Largest step keeping all slack variables positive.
      double stm = 1.0;
      auto track = [&stm](const Array& v, const Array& dv) {
        if (v.size()) stm = std::max(stm, (-1.01 * dv / v).maxCoeff());
      };
      track(it.y.array(), dy.array());
      track(Array::Constant(1, it.z), Array::Constant(1, dz));
      track(it.lam.array(), dlam.array());
      track(it.xsi, dxsi);
      track(it.eta, deta);
      track(it.mu.array(), dmu.array());
      track(Array::Constant(1, it.zet), Array::Constant(1, dzet));
      track(it.s.array(), ds.array());
      track(it.x - sp.alfa, -dx);
      track(sp.beta - it.x, dx);
      double step = 1.0 / stm;

      const Iterate old = it;
      double newnorm = 2.0 * resnorm;
      for (int bt = 0; bt < 50 && newnorm > resnorm; ++bt) {
        it.x = old.x + step * dx;
        it.y = old.y + step * dy;
        it.z = old.z + step * dz;
        it.lam = old.lam + step * dlam;
        it.xsi = old.xsi + step * dxsi;
        it.eta = old.eta + step * deta;
        it.mu = old.mu + step * dmu;
        it.zet = old.zet + step * dzet;
        it.s = old.s + step * ds;
        res = kkt_residual(sp, it, epsi);
        newnorm = res.norm();
        step *= 0.5;
      }
      resnorm = newnorm;
      resmax = res.max();
    }
    epsi *= 0.1;
  }
  return it;
}

}  // namespace

MmaResult mma_update(const Vector& x, const Vector& df0, const Vector& g, const Matrix& dg,
                     const Vector& x_min, const Vector& x_max, MmaState& state,
                     const MmaSettings& settings, double move) {
  settings.validate();
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(g.size());
  require(df0.size() == n && x_min.size() == n && x_max.size() == n,
          "mma_update: variable vector sizes differ");
  require(dg.rows() == m && (m == 0 || dg.cols() == n), "mma_update: constraint gradient shape");
  require(df0.allFinite() && g.allFinite() && dg.allFinite(), "mma_update: non-finite gradient");
  if (move <= 0.0) move = settings.move;

  const Array xa = x.array();
  const Array range = (x_max - x_min).array();
  const Array xmami = range.max(1e-5);

  Array low(n), upp(n);
  if (state.iteration < 2 || state.low.size() != n) {
    low = xa - settings.asyinit * range;
    upp = xa + settings.asyinit * range;
  } else {
    const Array o1 = state.xold1.array();
    const Array o2 = state.xold2.array();
    const Array sign = (xa - o1) * (o1 - o2);
    Array factor = Array::Ones(n);
    for (int j = 0; j < n; ++j) {
      if (sign[j] > 0.0) factor[j] = settings.asyincr;
      else if (sign[j] < 0.0) factor[j] = settings.asydecr;
    }
    low = xa - factor * (o1 - state.low.array());
    upp = xa + factor * (state.upp.array() - o1);
    low = low.max(xa - 10.0 * range).min(xa - settings.asymin * range);
    upp = upp.min(xa + 10.0 * range).max(xa + settings.asymin * range);
  }

  Subproblem sp;
  sp.m = m;
  sp.n = n;
  sp.low = low;
  sp.upp = upp;
  sp.alfa = (low + settings.albefa * (xa - low)).max(xa - move * range).max(x_min.array());
  sp.beta = (upp - settings.albefa * (upp - xa)).min(xa + move * range).min(x_max.array());

  const Array ux2 = (upp - xa).square();
  const Array xl2 = (xa - low).square();
  const double raa0 = 1e-5;
  const Array dfa = df0.array();
  const Array pq0 = 0.001 * dfa.abs() + raa0 / xmami;
  sp.p0 = (dfa.max(0.0) + pq0) * ux2;
  sp.q0 = ((-dfa).max(0.0) + pq0) * xl2;
  sp.P.resize(m, n);
  sp.Q.resize(m, n);
  for (int i = 0; i < m; ++i) {
    const Array gi = dg.row(i).transpose().array();
    const Array pq = 0.001 * gi.abs() + raa0 / xmami;
    sp.P.row(i) = ((gi.max(0.0) + pq) * ux2).matrix().transpose();
    sp.Q.row(i) = (((-gi).max(0.0) + pq) * xl2).matrix().transpose();
  }
  sp.b = sp.P * (1.0 / (upp - xa)).matrix() + sp.Q * (1.0 / (xa - low)).matrix() - g;
  sp.a0 = settings.a0;
  sp.a = Vector::Zero(m);
  sp.c = Vector::Constant(m, settings.c);
  sp.d = Vector::Constant(m, settings.d);

  MmaResult out;
  const Iterate it = subsolve(sp, out.subsolver_iterations);
  out.x = it.x.max(x_min.array()).min(x_max.array()).matrix();
  out.max_relaxation = m ? it.y.maxCoeff() : 0.0;

  state.xold2 = state.xold1.size() == n ? state.xold1 : x;
  state.xold1 = x;
  state.low = low.matrix();
  state.upp = upp.matrix();
  ++state.iteration;
  return out;
}

}  // namespace microtopt
