#include "dhgmpc/structured_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dhgmpc {

namespace {

// Inequality rows of one stage in the form row(z) <= bound, where z = [x; u].
struct Rows {
  std::vector<int> var;      // box rows: index into [x; u]
  std::vector<double> sign;  // +1 for an upper bound, -1 for a lower bound
  Eigen::VectorXd bound;     // boxes first, then general rows
  int num_box = 0;
  int num_general = 0;
  int size() const { return num_box + num_general; }
};

Rows collect_rows(const QpStage& st, int n, int m, bool fixed_state) {
  Rows rows;
  std::vector<double> bounds;
  auto add_box = [&](const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                     int offset, int dim) {
    if (lb.size() == 0 && ub.size() == 0) return;
    if (lb.size() != dim || ub.size() != dim) {
      throw std::invalid_argument("structured QP: bound size mismatch");
    }
    for (int i = 0; i < dim; ++i) {
      if (std::isfinite(lb(i))) {
        rows.var.push_back(offset + i);
        rows.sign.push_back(-1.0);
        bounds.push_back(-lb(i));
      }
    }
    for (int i = 0; i < dim; ++i) {
      if (std::isfinite(ub(i))) {
        rows.var.push_back(offset + i);
        rows.sign.push_back(1.0);
        bounds.push_back(ub(i));
      }
    }
  };
  if (!fixed_state) add_box(st.x_lb, st.x_ub, 0, n);
  add_box(st.u_lb, st.u_ub, n, m);
  rows.num_box = static_cast<int>(bounds.size());
  rows.num_general = static_cast<int>(st.g.size());
  rows.bound.resize(rows.size());
  for (int i = 0; i < rows.num_box; ++i) rows.bound(i) = bounds[i];
  rows.bound.tail(rows.num_general) = st.g;
  return rows;
}

struct Workspace {
  int n = 0;
  int m = 0;
  int horizon = 0;
  std::vector<Rows> rows;
  // Riccati factorization
  std::vector<Eigen::MatrixXd> p;
  std::vector<Eigen::MatrixXd> k;
  std::vector<Eigen::MatrixXd> h_ux;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> h_uu;
};

struct Iterate {
  std::vector<Eigen::VectorXd> x, u, pi, lam, s;
};

struct Residuals {
  std::vector<Eigen::VectorXd> rx, ru, rdyn, rin;
  double norm = 0.0;
};

int stage_inputs(const Workspace& ws, int k) { return k < ws.horizon ? ws.m : 0; }

Eigen::VectorXd eval_rows(const QpStage& st, const Rows& rows,
                          const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                          int n) {
  Eigen::VectorXd v(rows.size());
  for (int i = 0; i < rows.num_box; ++i) {
    const int j = rows.var[i];
    v(i) = rows.sign[i] * (j < n ? x(j) : u(j - n));
  }
  if (rows.num_general > 0) {
    Eigen::VectorXd gen = st.cx * x;
    if (u.size() > 0 && st.cu.size() > 0) gen += st.cu * u;
    v.tail(rows.num_general) = gen;
  }
  return v;
}

// Adds rows' (.)^T w to the x and u gradients.
void add_rows_transpose(const QpStage& st, const Rows& rows,
                        const Eigen::VectorXd& w, int n, Eigen::VectorXd* gx,
                        Eigen::VectorXd* gu) {
  for (int i = 0; i < rows.num_box; ++i) {
    const int j = rows.var[i];
    if (j < n) {
      (*gx)(j) += rows.sign[i] * w(i);
    } else {
      (*gu)(j - n) += rows.sign[i] * w(i);
    }
  }
  if (rows.num_general > 0) {
    const auto wg = w.tail(rows.num_general);
    *gx += st.cx.transpose() * wg;
    if (gu->size() > 0 && st.cu.size() > 0) *gu += st.cu.transpose() * wg;
  }
}

Residuals residuals(const StructuredQp& qp, const Workspace& ws,
                    const Iterate& it) {
  const int N = ws.horizon;
  Residuals r;
  r.rx.resize(N + 1);
  r.ru.resize(N);
  r.rdyn.resize(N);
  r.rin.resize(N + 1);
  double worst = 0.0;
  for (int k = 0; k <= N; ++k) {
    const QpStage& st = qp.stages[k];
    Eigen::VectorXd gx = st.q_xx * it.x[k] + st.q_x;
    Eigen::VectorXd gu(stage_inputs(ws, k));
    if (k < N) {
      gx += st.a.transpose() * it.pi[k];
      gu = st.q_uu * it.u[k] + st.q_u + st.b.transpose() * it.pi[k];
      if (st.q_ux.size() > 0) {
        gx += st.q_ux.transpose() * it.u[k];
        gu += st.q_ux * it.x[k];
      }
      r.rdyn[k] = st.a * it.x[k] + st.b * it.u[k] + st.c - it.x[k + 1];
      worst = std::max(worst, r.rdyn[k].lpNorm<Eigen::Infinity>());
    }
    if (k > 0) gx -= it.pi[k - 1];
    add_rows_transpose(st, ws.rows[k], it.lam[k], ws.n, &gx, &gu);
    r.rin[k] = eval_rows(st, ws.rows[k], it.x[k],
                         k < N ? it.u[k] : Eigen::VectorXd(), ws.n) +
               it.s[k] - ws.rows[k].bound;
    if (k > 0) worst = std::max(worst, gx.lpNorm<Eigen::Infinity>());
    if (k < N) worst = std::max(worst, gu.lpNorm<Eigen::Infinity>());
    if (r.rin[k].size() > 0) {
      worst = std::max(worst, r.rin[k].lpNorm<Eigen::Infinity>());
    }
    r.rx[k] = std::move(gx);
    if (k < N) r.ru[k] = std::move(gu);
  }
  r.norm = worst;
  return r;
}

// Q + C'SC etc. for one stage, with sigma = lam / s.
void condensed_stage(const QpStage& st, const Rows& rows,
                     const Eigen::VectorXd& sigma, int n, int m,
                     Eigen::MatrixXd* qxx, Eigen::MatrixXd* qux,
                     Eigen::MatrixXd* quu) {
  *qxx = st.q_xx;
  if (m > 0) {
    *qux = st.q_ux.size() > 0 ? st.q_ux : Eigen::MatrixXd::Zero(m, n);
    *quu = st.q_uu;
  }
  for (int i = 0; i < rows.num_box; ++i) {
    const int j = rows.var[i];
    if (j < n) {
      (*qxx)(j, j) += sigma(i);
    } else {
      (*quu)(j - n, j - n) += sigma(i);
    }
  }
  if (rows.num_general > 0) {
    const auto sg = sigma.tail(rows.num_general).asDiagonal();
    *qxx += st.cx.transpose() * sg * st.cx;
    if (m > 0 && st.cu.size() > 0) {
      *qux += st.cu.transpose() * sg * st.cx;
      *quu += st.cu.transpose() * sg * st.cu;
    }
  }
}

// Barrier weights lam/s beyond this only add rounding error to the Riccati
// recursion. Slacks below lam / kMaxBarrierWeight are replaced by that floor
// in the linearized complementarity equation (a primal-dual regularization).
// Residuals stay exact, so the solution is unchanged.
constexpr double kMaxBarrierWeight = 1e12;

Eigen::VectorXd effective_slack(const Eigen::VectorXd& lam,
                                const Eigen::VectorXd& s) {
  return s.cwiseMax(lam / kMaxBarrierWeight);
}

Eigen::VectorXd barrier_weights(const Eigen::VectorXd& lam,
                                const Eigen::VectorXd& s) {
  return lam.cwiseQuotient(effective_slack(lam, s));
}

void factor(const StructuredQp& qp, Workspace& ws, const Iterate& it) {
  const int N = ws.horizon;
  const int n = ws.n;
  const int m = ws.m;
  Eigen::MatrixXd qxx, qux, quu;
  {
    const Eigen::VectorXd sigma = barrier_weights(it.lam[N], it.s[N]);
    condensed_stage(qp.stages[N], ws.rows[N], sigma, n, 0, &qxx, &qux, &quu);
    ws.p[N] = qxx;
  }
  for (int k = N - 1; k >= 0; --k) {
    const QpStage& st = qp.stages[k];
    const Eigen::VectorXd sigma = barrier_weights(it.lam[k], it.s[k]);
    condensed_stage(st, ws.rows[k], sigma, n, m, &qxx, &qux, &quu);
    const Eigen::MatrixXd pb = ws.p[k + 1] * st.b;
    Eigen::MatrixXd huu = quu + st.b.transpose() * pb;
    ws.h_ux[k] = qux + pb.transpose() * st.a;
    huu = 0.5 * (huu + huu.transpose());
    ws.h_uu[k].compute(huu);
    double shift = 1e-12 * huu.diagonal().cwiseAbs().maxCoeff();
    for (int t = 0; t < 4 && ws.h_uu[k].info() != Eigen::Success; ++t) {
      huu.diagonal().array() += shift;
      ws.h_uu[k].compute(huu);
      shift *= 100.0;
    }
    if (ws.h_uu[k].info() != Eigen::Success) {
      throw std::runtime_error("structured QP: reduced Hessian is not positive "
                               "definite");
    }
    ws.k[k] = -ws.h_uu[k].solve(ws.h_ux[k]);
    if (k > 0) {
      // Joseph form: a sum of PSD terms, so large barrier weights do not
      // cancel P into indefiniteness.
      const Eigen::MatrixXd acl = st.a + st.b * ws.k[k];
      const Eigen::MatrixXd sk = qux.transpose() * ws.k[k];
      Eigen::MatrixXd pk = qxx + sk + sk.transpose() +
                           ws.k[k].transpose() * quu * ws.k[k] +
                           acl.transpose() * ws.p[k + 1] * acl;
      ws.p[k] = 0.5 * (pk + pk.transpose());
    }
  }
}

// Solves the Newton system for complementarity right-hand side rc.
void newton_direction(const StructuredQp& qp, const Workspace& ws,
                      const Iterate& it, const Residuals& res,
                      const std::vector<Eigen::VectorXd>& rc, Iterate* dir) {
  const int N = ws.horizon;
  const int n = ws.n;
  // Fold the inequality residuals into the linear terms.
  std::vector<Eigen::VectorXd> rtx(N + 1), rtu(N);
  for (int k = 0; k <= N; ++k) {
    const Eigen::VectorXd w =
        (it.lam[k].cwiseProduct(res.rin[k]) - rc[k])
            .cwiseQuotient(effective_slack(it.lam[k], it.s[k]));
    rtx[k] = res.rx[k];
    Eigen::VectorXd gu = k < N ? res.ru[k] : Eigen::VectorXd();
    add_rows_transpose(qp.stages[k], ws.rows[k], w, n, &rtx[k], &gu);
    if (k < N) rtu[k] = std::move(gu);
  }
  std::vector<Eigen::VectorXd> p(N + 1), kff(N);
  p[N] = rtx[N];
  for (int k = N - 1; k >= 0; --k) {
    const QpStage& st = qp.stages[k];
    const Eigen::VectorXd v = ws.p[k + 1] * res.rdyn[k] + p[k + 1];
    kff[k] = -ws.h_uu[k].solve(rtu[k] + st.b.transpose() * v);
    if (k > 0) {
      p[k] = rtx[k] + st.a.transpose() * v + ws.h_ux[k].transpose() * kff[k];
    }
  }
  dir->x[0].setZero(n);
  for (int k = 0; k < N; ++k) {
    const QpStage& st = qp.stages[k];
    dir->u[k] = ws.k[k] * dir->x[k] + kff[k];
    dir->x[k + 1] = st.a * dir->x[k] + st.b * dir->u[k] + res.rdyn[k];
    dir->pi[k] = ws.p[k + 1] * dir->x[k + 1] + p[k + 1];
  }
  for (int k = 0; k <= N; ++k) {
    // The rows are linear in (x, u), so they map directions directly.
    const Eigen::VectorXd drow =
        eval_rows(qp.stages[k], ws.rows[k], dir->x[k],
                  k < N ? dir->u[k] : Eigen::VectorXd(), n);
    dir->s[k] = -res.rin[k] - drow;
    dir->lam[k] = (-rc[k] - it.lam[k].cwiseProduct(dir->s[k]))
                      .cwiseQuotient(effective_slack(it.lam[k], it.s[k]));
  }
}

double max_step(const std::vector<Eigen::VectorXd>& v,
                const std::vector<Eigen::VectorXd>& dv) {
  double step = 1.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    for (Eigen::Index i = 0; i < v[k].size(); ++i) {
      if (dv[k](i) < 0.0) step = std::min(step, -v[k](i) / dv[k](i));
    }
  }
  return step;
}

double dot_all(const std::vector<Eigen::VectorXd>& a,
               const std::vector<Eigen::VectorXd>& b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k].dot(b[k]);
  return acc;
}

}  // namespace

QpSolution solve_structured_qp(const StructuredQp& qp,
                               const QpOptions& options) {
  const int N = qp.horizon();
  if (N < 1) throw std::invalid_argument("structured QP: horizon must be >= 1");
  Workspace ws;
  ws.horizon = N;
  ws.n = static_cast<int>(qp.x0.size());
  ws.m = static_cast<int>(qp.stages[0].q_uu.rows());
  ws.rows.resize(N + 1);
  int total_rows = 0;
  for (int k = 0; k <= N; ++k) {
    ws.rows[k] = collect_rows(qp.stages[k], ws.n, k < N ? ws.m : 0, k == 0);
    total_rows += ws.rows[k].size();
  }
  ws.p.resize(N + 1);
  ws.k.resize(N);
  ws.h_ux.resize(N);
  ws.h_uu.resize(N);

  Iterate it;
  it.x.assign(N + 1, Eigen::VectorXd::Zero(ws.n));
  it.x[0] = qp.x0;
  it.u.assign(N, Eigen::VectorXd::Zero(ws.m));
  it.pi.assign(N, Eigen::VectorXd::Zero(ws.n));
  it.lam.resize(N + 1);
  it.s.resize(N + 1);
  // Forward simulation gives a dynamics-feasible start.
  for (int k = 0; k < N; ++k) {
    const QpStage& st = qp.stages[k];
    it.x[k + 1] = st.a * it.x[k] + st.b * it.u[k] + st.c;
  }
  for (int k = 0; k <= N; ++k) {
    const Eigen::VectorXd row =
        eval_rows(qp.stages[k], ws.rows[k], it.x[k],
                  k < N ? it.u[k] : Eigen::VectorXd(), ws.n);
    it.s[k] = (ws.rows[k].bound - row).cwiseMax(1.0);
    it.lam[k] = Eigen::VectorXd::Ones(ws.rows[k].size());
  }

  Iterate dir = it;
  Iterate dir_aff = it;
  QpSolution sol;
  std::vector<Eigen::VectorXd> rc(N + 1);
  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    const Residuals res = residuals(qp, ws, it);
    const double mu =
        total_rows > 0 ? dot_all(it.s, it.lam) / total_rows : 0.0;
    sol.iterations = iter;
    double worst = 0.0;
    for (int k = 0; k <= N; ++k) {
      if (it.s[k].size() > 0) {
        worst = std::max(worst, it.s[k].cwiseProduct(it.lam[k]).maxCoeff());
      }
    }
    sol.residual = std::max(res.norm, worst);
    if (!std::isfinite(sol.residual)) break;
    if (sol.residual <= options.tolerance) {
      sol.converged = true;
      break;
    }
    if (iter == options.max_iterations) break;

    factor(qp, ws, it);
    // Predictor.
    for (int k = 0; k <= N; ++k) rc[k] = it.s[k].cwiseProduct(it.lam[k]);
    newton_direction(qp, ws, it, res, rc, &dir_aff);
    const double a_aff = std::min(max_step(it.s, dir_aff.s),
                                  max_step(it.lam, dir_aff.lam));
    double mu_aff = 0.0;
    for (int k = 0; k <= N; ++k) {
      mu_aff += (it.s[k] + a_aff * dir_aff.s[k])
                    .dot(it.lam[k] + a_aff * dir_aff.lam[k]);
    }
    mu_aff = total_rows > 0 ? mu_aff / total_rows : 0.0;
    const double sigma = mu > 0.0 ? std::pow(mu_aff / mu, 3) : 0.0;
    // Corrector with the same factorization.
    for (int k = 0; k <= N; ++k) {
      rc[k] = it.s[k].cwiseProduct(it.lam[k]) +
              dir_aff.s[k].cwiseProduct(dir_aff.lam[k]);
      rc[k].array() -= sigma * mu;
    }
    newton_direction(qp, ws, it, res, rc, &dir);
    const double step = std::min(
        1.0, 0.995 * std::min(max_step(it.s, dir.s), max_step(it.lam, dir.lam)));
    for (int k = 0; k <= N; ++k) {
      if (k > 0) it.x[k] += step * dir.x[k];
      if (k < N) {
        it.u[k] += step * dir.u[k];
        it.pi[k] += step * dir.pi[k];
      }
      it.s[k] += step * dir.s[k];
      it.lam[k] += step * dir.lam[k];
    }
  }
  sol.x = std::move(it.x);
  sol.u = std::move(it.u);
  sol.pi = std::move(it.pi);
  sol.lam = std::move(it.lam);
  sol.slack = std::move(it.s);
  return sol;
}

double QpKkt::max() const {
  return std::max({stationarity, dynamics, infeasibility, complementarity,
                   dual_sign});
}

int qp_stage_rows(const StructuredQp& qp, int k) {
  const int n = static_cast<int>(qp.x0.size());
  const int m = static_cast<int>(qp.stages[0].q_uu.rows());
  return collect_rows(qp.stages[k], n, k < qp.horizon() ? m : 0, k == 0).size();
}

QpKkt evaluate_qp_kkt(const StructuredQp& qp,
                      const std::vector<Eigen::VectorXd>& x,
                      const std::vector<Eigen::VectorXd>& u,
                      const std::vector<Eigen::VectorXd>& pi,
                      const std::vector<Eigen::VectorXd>& lam) {
  const int N = qp.horizon();
  Workspace ws;
  ws.horizon = N;
  ws.n = static_cast<int>(qp.x0.size());
  ws.m = static_cast<int>(qp.stages[0].q_uu.rows());
  ws.rows.resize(N + 1);
  Iterate it;
  it.x = x;
  it.u = u;
  it.pi = pi;
  it.lam = lam;
  it.s.resize(N + 1);
  QpKkt kkt;
  for (int k = 0; k <= N; ++k) {
    ws.rows[k] = collect_rows(qp.stages[k], ws.n, k < N ? ws.m : 0, k == 0);
    if (lam[k].size() != ws.rows[k].size()) {
      throw std::invalid_argument("evaluate_qp_kkt: multiplier size mismatch");
    }
    const Eigen::VectorXd row = eval_rows(
        qp.stages[k], ws.rows[k], x[k], k < N ? u[k] : Eigen::VectorXd(), ws.n);
    it.s[k] = ws.rows[k].bound - row;  // zero inequality residual
    for (Eigen::Index i = 0; i < row.size(); ++i) {
      kkt.infeasibility = std::max(kkt.infeasibility, -it.s[k](i));
      kkt.complementarity =
          std::max(kkt.complementarity, std::abs(lam[k](i) * it.s[k](i)));
      kkt.dual_sign = std::max(kkt.dual_sign, -lam[k](i));
    }
  }
  const Residuals res = residuals(qp, ws, it);
  for (int k = 0; k <= N; ++k) {
    if (k > 0) {
      kkt.stationarity =
          std::max(kkt.stationarity, res.rx[k].lpNorm<Eigen::Infinity>());
    }
    if (k < N) {
      kkt.stationarity =
          std::max(kkt.stationarity, res.ru[k].lpNorm<Eigen::Infinity>());
      kkt.dynamics =
          std::max(kkt.dynamics, res.rdyn[k].lpNorm<Eigen::Infinity>());
    }
  }
  return kkt;
}

}  // namespace dhgmpc
