#include "dhgmpc/terminal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dhgmpc/stabilization.hpp"

namespace dhgmpc {

namespace {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

// Box or linear input row as a function of the state deviation:
// u_row = center - c^T e, allowed in [lb, ub].
double row_alpha(const Eigen::RowVectorXd& c, const Eigen::MatrixXd& p_inv,
                 double center, double lb, double ub) {
  const double margin = std::min(center - lb, ub - center);
  if (!(margin > 0.0)) return 0.0;
  const double spread = c * p_inv * c.transpose();
  if (spread <= 0.0) return std::numeric_limits<double>::infinity();
  return margin * margin / spread;
}

Eigen::VectorXd unit_normal(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
  return z.normalized();
}

struct Evaluation {
  double phi = 0.0;
  Eigen::VectorXd grad;  // w.r.t. the state deviation
  Eigen::VectorXd x;
  Eigen::VectorXd u;
};

// phi and optionally its gradient. A vertex mass leaving its admissible
// range counts as an infinite violation.
bool evaluate(const DiscreteModel& model, const TerminalIngredients& ti,
              const Eigen::MatrixXd& stage_weight, const Eigen::VectorXd& e,
              bool with_gradient, Evaluation* out) {
  out->x = ti.x_bar + e;
  out->u = ti.u_bar - ti.k * e;
  try {
    const Eigen::VectorXd ep = model.step(out->x, out->u, ti.d_bar) - ti.x_bar;
    const Eigen::VectorXd pe = ti.p * e;
    const Eigen::VectorXd we = stage_weight * e;
    out->phi = ep.dot(ti.p * ep) - e.dot(pe) + e.dot(we);
    if (with_gradient) {
      Eigen::MatrixXd a;
      Eigen::MatrixXd b;
      model.linearize(out->x, out->u, ti.d_bar, &a, &b);
      const Eigen::MatrixXd j = a - b * ti.k;
      out->grad = 2.0 * (j.transpose() * (ti.p * ep) - pe + we);
    }
  } catch (const SingularMassError&) {
    out->phi = std::numeric_limits<double>::infinity();
    return false;
  }
  return true;
}

}  // namespace

DareSolution solve_dare(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                        int max_iterations) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != b.cols() || r.cols() != b.cols()) {
    throw std::invalid_argument("solve_dare: inconsistent dimensions");
  }
  Eigen::LLT<Eigen::MatrixXd> r_llt(r);
  if (r_llt.info() != Eigen::Success) {
    throw TerminalError("solve_dare: R is not positive definite");
  }
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd ak = a;
  Eigen::MatrixXd gk = symmetrize(b * r_llt.solve(b.transpose()));
  Eigen::MatrixXd hk = symmetrize(q);

  DareSolution sol;
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::PartialPivLU<Eigen::MatrixXd> w(eye + gk * hk);
    const Eigen::MatrixXd w_a = w.solve(ak);
    const Eigen::MatrixXd w_g = w.solve(gk);
    Eigen::MatrixXd h_next = symmetrize(hk + ak.transpose() * hk * w_a);
    gk = symmetrize(gk + ak * w_g * ak.transpose());
    ak = ak * w_a;
    const double change = (h_next - hk).norm();
    hk = std::move(h_next);
    sol.iterations = it;
    if (!hk.allFinite()) throw TerminalError("solve_dare: iteration diverged");
    if (change <= 1e-15 * hk.norm()) break;
  }
  sol.p = hk;
  const Eigen::MatrixXd bp = b.transpose() * sol.p;
  sol.k = (r + bp * b).ldlt().solve(bp * a);
  const Eigen::MatrixXd res = a.transpose() * sol.p * a - sol.p -
                              a.transpose() * sol.p * b * sol.k + q;
  sol.residual = res.norm() / std::max(1.0, sol.p.norm());
  if (spectral_radius(a - b * sol.k) >= 1.0) {
    throw TerminalError("solve_dare: closed loop is not stable; the pair may "
                        "not be stabilizable");
  }
  return sol;
}

Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& a,
                                        const Eigen::MatrixXd& q) {
  if (a.rows() != a.cols() || q.rows() != a.rows() || q.cols() != a.cols()) {
    throw std::invalid_argument("solve_discrete_lyapunov: dimension mismatch");
  }
  if (spectral_radius(a) >= 1.0) {
    throw TerminalError("solve_discrete_lyapunov: A is not Schur stable");
  }
  // P = sum_k (A^T)^k Q A^k, summed by squaring.
  Eigen::MatrixXd p = symmetrize(q);
  Eigen::MatrixXd ak = a;
  for (int it = 0; it < 64; ++it) {
    const Eigen::MatrixXd inc = ak.transpose() * p * ak;
    p = symmetrize(p + inc);
    ak = ak * ak;
    if (inc.norm() <= 1e-17 * p.norm()) break;
  }
  return p;
}

double lyapunov_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& p,
                         const Eigen::MatrixXd& q) {
  return (a.transpose() * p * a - p + q).norm() / std::max(1.0, p.norm());
}

Eigen::VectorXd ellipsoid_box_projection(const Eigen::MatrixXd& p,
                                         double alpha) {
  Eigen::LLT<Eigen::MatrixXd> llt(p);
  if (llt.info() != Eigen::Success) {
    throw TerminalError("ellipsoid_box_projection: P is not positive definite");
  }
  const Eigen::MatrixXd p_inv =
      llt.solve(Eigen::MatrixXd::Identity(p.rows(), p.cols()));
  return (alpha * p_inv.diagonal().array()).sqrt();
}

double terminal_violation(const DiscreteModel& model,
                          const TerminalIngredients& ti,
                          const Eigen::VectorXd& x) {
  const Eigen::MatrixXd w = ti.q + ti.k.transpose() * ti.r * ti.k;
  Evaluation ev;
  evaluate(model, ti, w, x - ti.x_bar, false, &ev);
  return ev.phi;
}

double admissible_alpha(const Eigen::MatrixXd& p, const Eigen::MatrixXd& k,
                        const Eigen::VectorXd& x_bar,
                        const Eigen::VectorXd& u_bar,
                        const ConstraintSet& constraints) {
  Eigen::LLT<Eigen::MatrixXd> llt(p);
  if (llt.info() != Eigen::Success) {
    throw TerminalError("admissible_alpha: P is not positive definite");
  }
  const Eigen::MatrixXd p_inv =
      llt.solve(Eigen::MatrixXd::Identity(p.rows(), p.cols()));
  double alpha = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x_bar.size(); ++i) {
    Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(x_bar.size());
    c(i) = -1.0;  // x_i = x_bar_i - c e
    alpha = std::min(alpha, row_alpha(c, p_inv, x_bar(i), constraints.x_lb(i),
                                      constraints.x_ub(i)));
  }
  for (Eigen::Index j = 0; j < u_bar.size(); ++j) {
    alpha = std::min(alpha, row_alpha(k.row(j), p_inv, u_bar(j),
                                      constraints.u_lb(j), constraints.u_ub(j)));
  }
  for (int r = 0; r < constraints.num_linear(); ++r) {
    const Eigen::RowVectorXd g = constraints.u_lin.row(r);
    alpha = std::min(alpha, row_alpha(g * k, p_inv, g.dot(u_bar),
                                      constraints.lin_lb(r),
                                      constraints.lin_ub(r)));
  }
  return alpha;
}

double find_alpha(const DiscreteModel& model, TerminalIngredients& ti,
                  const ConstraintSet& constraints,
                  const TerminalOptions& options) {
  const Eigen::Index n = ti.x_bar.size();
  const Eigen::MatrixXd w = ti.q + ti.k.transpose() * ti.r * ti.k;
  Eigen::LLT<Eigen::MatrixXd> llt(ti.p);
  if (llt.info() != Eigen::Success) {
    throw TerminalError("find_alpha: P is not positive definite");
  }
  const Eigen::MatrixXd l_inv_t = llt.matrixU().solve(
      Eigen::MatrixXd::Identity(n, n));  // L^-T, so e = sqrt(alpha) L^-T z

  ti.alpha_max = admissible_alpha(ti.p, ti.k, ti.x_bar, ti.u_bar, constraints);
  if (!(ti.alpha_max > 0.0) || !std::isfinite(ti.alpha_max)) {
    throw TerminalError("find_alpha: steady state is not interior to the "
                        "constraint set");
  }

  // Largest phi found on the boundary of {C_P <= alpha}; stops at the first
  // positive value because the trial is rejected anyway.
  auto worst_on_boundary = [&](double alpha) {
    std::mt19937_64 rng(options.seed);
    const double radius = std::sqrt(alpha);
    double worst = -std::numeric_limits<double>::infinity();
    Evaluation ev;
    Evaluation trial;
    for (int s = 0; s < options.starts; ++s) {
      Eigen::VectorXd z = unit_normal(rng, n);
      if (!evaluate(model, ti, w, radius * l_inv_t * z, true, &ev)) {
        return ev.phi;
      }
      double step = 0.3;
      for (int it = 0; it < options.ascent_iterations && step > 1e-4; ++it) {
        Eigen::VectorXd g = radius * l_inv_t.transpose() * ev.grad;
        g -= g.dot(z) * z;
        const double gn = g.norm();
        if (gn <= 1e-14 * (1.0 + std::abs(ev.phi))) break;
        const Eigen::VectorXd zt = (z + step * g / gn).normalized();
        evaluate(model, ti, w, radius * l_inv_t * zt, false, &trial);
        if (trial.phi > ev.phi) {
          z = zt;
          if (!evaluate(model, ti, w, radius * l_inv_t * z, true, &ev)) {
            return ev.phi;
          }
          step = std::min(1.0, 1.5 * step);
        } else {
          step *= 0.5;
        }
        if (ev.phi > 0.0) break;
      }
      if (constraints.input_violation(ev.u) > 0.0 ||
          constraints.state_violation(ev.x) > 0.0) {
        return std::numeric_limits<double>::infinity();
      }
      worst = std::max(worst, ev.phi);
      if (worst > 0.0) break;
    }
    return worst;
  };

  double hi = ti.alpha_max;
  double worst = worst_on_boundary(hi);
  if (worst <= 0.0) {
    ti.max_violation = worst;
    return hi;
  }
  double lo = 0.0;
  double lo_worst = 0.0;
  for (int halvings = 0; halvings < 200; ++halvings) {
    const double trial = 0.5 * hi;
    const double v = worst_on_boundary(trial);
    if (v <= 0.0) {
      lo = trial;
      lo_worst = v;
      break;
    }
    hi = trial;
  }
  if (!(lo > 0.0)) throw TerminalError("find_alpha: no positive alpha found");
  while (hi - lo > options.alpha_rel_tol * lo) {
    const double mid = 0.5 * (lo + hi);
    const double v = worst_on_boundary(mid);
    if (v <= 0.0) {
      lo = mid;
      lo_worst = v;
    } else {
      hi = mid;
    }
  }
  ti.max_violation = lo_worst;
  return lo;
}

TerminalIngredients synthesize_terminal(const DiscreteModel& model,
                                        const SteadyState& ss,
                                        const Eigen::MatrixXd& a,
                                        const Eigen::MatrixXd& b,
                                        const ConstraintSet& constraints,
                                        const Weights& weights,
                                        const TerminalOptions& options) {
  TerminalIngredients ti;
  ti.x_bar = ss.x;
  ti.u_bar = ss.u;
  ti.d_bar = ss.d;
  ti.q = weights.q;
  ti.r = weights.r;

  const DareSolution dare = solve_dare(a, b, weights.q, weights.r);
  ti.p_lqr = dare.p;
  ti.k = dare.k;
  ti.dare_residual = dare.residual;
  const Eigen::MatrixXd a_cl = a - b * ti.k;
  ti.closed_loop_radius = spectral_radius(a_cl);
  const Eigen::MatrixXd q_star =
      options.qstar_factor * (weights.q + ti.k.transpose() * weights.r * ti.k);
  ti.p = solve_discrete_lyapunov(a_cl, q_star);
  ti.lyapunov_residual = lyapunov_residual(a_cl, ti.p, q_star);
  ti.alpha = find_alpha(model, ti, constraints, options);
  return ti;
}

DecreaseCheck verify_terminal_decrease(const DiscreteModel& model,
                                       const TerminalIngredients& ti,
                                       const ConstraintSet& constraints,
                                       int samples, std::uint64_t seed) {
  const Eigen::Index n = ti.x_bar.size();
  const Eigen::MatrixXd w = ti.q + ti.k.transpose() * ti.r * ti.k;
  Eigen::LLT<Eigen::MatrixXd> llt(ti.p);
  const Eigen::MatrixXd l_inv_t =
      llt.matrixU().solve(Eigen::MatrixXd::Identity(n, n));
  std::mt19937_64 rng(seed);
  DecreaseCheck chk;
  chk.samples = samples;
  chk.worst_decrease = -std::numeric_limits<double>::infinity();
  Evaluation ev;
  for (int s = 0; s < samples; ++s) {
    const Eigen::VectorXd e = std::sqrt(ti.alpha) * l_inv_t * unit_normal(rng, n);
    evaluate(model, ti, w, e, false, &ev);
    chk.worst_decrease = std::max(chk.worst_decrease, ev.phi);
    chk.worst_input_violation =
        std::max(chk.worst_input_violation, constraints.input_violation(ev.u));
    chk.worst_state_violation =
        std::max(chk.worst_state_violation, constraints.state_violation(ev.x));
    if (std::isfinite(ev.phi)) {
      const Eigen::VectorXd xp = model.step(ev.x, ev.u, ti.d_bar);
      chk.worst_successor_cost =
          std::max(chk.worst_successor_cost, ti.cost(xp) / ti.alpha);
    } else {
      chk.worst_successor_cost = std::numeric_limits<double>::infinity();
    }
  }
  return chk;
}

}  // namespace dhgmpc
