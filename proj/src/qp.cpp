#include "chainmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace chainmpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void validate(const QpProblem& qp) {
  const Index n = qp.H.rows();
  const Index m = qp.A.rows();
  if (qp.H.cols() != n || qp.g.size() != n) throw std::invalid_argument("QP: H must be n x n and g of size n");
  if (m > 0 && qp.A.cols() != n) throw std::invalid_argument("QP: A must have n columns");
  if (qp.lower.size() != m || qp.upper.size() != m) throw std::invalid_argument("QP: bounds must have m entries");
  const double asym = n > 0 ? (qp.H - qp.H.transpose()).cwiseAbs().maxCoeff() : 0.0;
  const double scale = std::max(1.0, n > 0 ? qp.H.cwiseAbs().maxCoeff() : 0.0);
  if (asym > 1e-10 * scale) throw std::invalid_argument("QP: H is not symmetric");
  for (Index i = 0; i < m; ++i) {
    if (qp.lower(i) > qp.upper(i)) throw std::invalid_argument("QP: lower bound exceeds upper bound");
  }
}

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::solved:
      return "solved";
    case QpStatus::max_iter:
      return "max_iter";
    case QpStatus::infeasible:
      return "infeasible";
    case QpStatus::non_finite:
      return "non_finite";
  }
  return "unknown";
}

namespace {

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

bool is_inf_lower(double l) { return l <= -kQpInfinity; }
bool is_inf_upper(double u) { return u >= kQpInfinity; }

// Equilibrated copy of the problem: Hs = c D H D, gs = c D g, As = E A D.
struct Scaled {
  MatrixXd H;
  VectorXd g;
  MatrixXd A;
  VectorXd l;
  VectorXd u;
  VectorXd D;
  VectorXd E;
  double c{1.0};
};

Scaled equilibrate(const QpProblem& qp, int passes) {
  const Index n = qp.H.rows();
  const Index m = qp.A.rows();
  Scaled s{qp.H, qp.g, qp.A, qp.lower, qp.upper, VectorXd::Ones(n), VectorXd::Ones(m), 1.0};
  auto clip = [](double v) { return std::clamp(v, 1e-4, 1e4); };
  for (int pass = 0; pass < passes; ++pass) {
    VectorXd dcol(n);
    VectorXd erow(m);
    for (Index j = 0; j < n; ++j) {
      double norm = s.H.col(j).cwiseAbs().maxCoeff();
      if (m > 0) norm = std::max(norm, s.A.col(j).cwiseAbs().maxCoeff());
      dcol(j) = norm < 1e-4 ? 1.0 : 1.0 / std::sqrt(clip(norm));
    }
    for (Index i = 0; i < m; ++i) {
      const double norm = s.A.row(i).cwiseAbs().maxCoeff();
      erow(i) = norm < 1e-4 ? 1.0 : 1.0 / std::sqrt(clip(norm));
    }
    s.H = dcol.asDiagonal() * s.H * dcol.asDiagonal();
    s.g = dcol.cwiseProduct(s.g);
    if (m > 0) s.A = erow.asDiagonal() * s.A * dcol.asDiagonal();
    s.D = s.D.cwiseProduct(dcol);
    s.E = s.E.cwiseProduct(erow);

    // Cost scaling.
    double mean_col = 0.0;
    for (Index j = 0; j < n; ++j) mean_col += s.H.col(j).cwiseAbs().maxCoeff();
    mean_col = n > 0 ? mean_col / static_cast<double>(n) : 0.0;
    const double gnorm = inf_norm(s.g);
    double denom = std::max(mean_col, gnorm);
    denom = denom < 1e-4 ? 1.0 : clip(denom);
    const double gamma = 1.0 / denom;
    s.H *= gamma;
    s.g *= gamma;
    s.c *= gamma;
  }
  for (Index i = 0; i < m; ++i) {
    s.l(i) = is_inf_lower(qp.lower(i)) ? -kQpInfinity : qp.lower(i) * s.E(i);
    s.u(i) = is_inf_upper(qp.upper(i)) ? kQpInfinity : qp.upper(i) * s.E(i);
  }
  return s;
}

struct Residuals {
  double prim{0.0};
  double dual{0.0};
  double eps_prim{0.0};
  double eps_dual{0.0};
  bool converged() const { return prim <= eps_prim && dual <= eps_dual; }
};

// Residuals of an unscaled primal/dual pair against the original problem.
Residuals unscaled_residuals(const QpProblem& qp, const VectorXd& z, const VectorXd& y, const QpSettings& st) {
  Residuals r;
  const VectorXd Az = qp.A * z;
  const VectorXd proj = Az.cwiseMax(qp.lower).cwiseMin(qp.upper);
  const VectorXd Hz = qp.H * z;
  const VectorXd Aty = qp.A.transpose() * y;
  r.prim = inf_norm(proj - Az);
  r.dual = inf_norm(Hz + qp.g + Aty);
  r.eps_prim = st.tol_abs + st.tol_rel * std::max(inf_norm(Az), inf_norm(proj));
  r.eps_dual = st.tol_abs + st.tol_rel * std::max({inf_norm(Hz), inf_norm(Aty), inf_norm(qp.g)});
  return r;
}

enum class Activity : signed char { lower = -1, inactive = 0, upper = 1 };

std::vector<Activity> guess_active_set(const VectorXd& w, const VectorXd& y, const VectorXd& l, const VectorXd& u) {
  std::vector<Activity> act(static_cast<std::size_t>(w.size()), Activity::inactive);
  for (Index i = 0; i < w.size(); ++i) {
    if (w(i) - l(i) < -y(i)) {
      act[static_cast<std::size_t>(i)] = Activity::lower;
    } else if (u(i) - w(i) < y(i)) {
      act[static_cast<std::size_t>(i)] = Activity::upper;
    }
  }
  return act;
}

// Equality-constrained KKT solve on the rows marked active, with a small
// primal-dual regularization removed again by iterative refinement.
bool solve_on_active_set(const MatrixXd& H, const VectorXd& g, const MatrixXd& A, const VectorXd& l,
                         const VectorXd& u, const std::vector<Activity>& act, VectorXd& z, VectorXd& y) {
  const Index n = H.rows();
  const Index m = A.rows();
  std::vector<Index> rows;
  for (Index i = 0; i < m; ++i) {
    if (act[static_cast<std::size_t>(i)] != Activity::inactive) rows.push_back(i);
  }
  const auto k = static_cast<Index>(rows.size());
  if (k > n) return false;
  const double delta = 1e-9;
  MatrixXd K0 = MatrixXd::Zero(n + k, n + k);
  K0.topLeftCorner(n, n) = H;
  VectorXd rhs(n + k);
  rhs.head(n) = -g;
  for (Index r = 0; r < k; ++r) {
    const Index i = rows[static_cast<std::size_t>(r)];
    K0.block(n + r, 0, 1, n) = A.row(i);
    K0.block(0, n + r, n, 1) = A.row(i).transpose();
    rhs(n + r) = act[static_cast<std::size_t>(i)] == Activity::lower ? l(i) : u(i);
  }
  MatrixXd Kd = K0;
  Kd.diagonal().head(n).array() += delta;
  Kd.diagonal().tail(k).array() -= delta;
  const Eigen::PartialPivLU<MatrixXd> lu(Kd);
  VectorXd sol = lu.solve(rhs);
  for (int it = 0; it < 5; ++it) {
    const VectorXd res = rhs - K0 * sol;
    sol += lu.solve(res);
  }
  if (!sol.allFinite()) return false;
  z = sol.head(n);
  y = VectorXd::Zero(m);
  for (Index r = 0; r < k; ++r) y(rows[static_cast<std::size_t>(r)]) = sol(n + r);
  return true;
}

// Accepts (z, y) only if it is primal feasible, stationary and sign-consistent
// with the active set on the original problem.
bool accept_candidate(const QpProblem& qp, const std::vector<Activity>& act, const VectorXd& z, const VectorXd& y,
                      const QpSettings& st, QpSolution& sol) {
  const Residuals r = unscaled_residuals(qp, z, y, st);
  if (!r.converged()) return false;
  for (Index i = 0; i < y.size(); ++i) {
    const Activity a = act[static_cast<std::size_t>(i)];
    if (a == Activity::inactive || qp.upper(i) - qp.lower(i) < 1e-12) continue;
    if (a == Activity::lower && y(i) > r.eps_dual) return false;
    if (a == Activity::upper && y(i) < -r.eps_dual) return false;
  }
  sol.z = z;
  sol.y = y;
  sol.status = QpStatus::solved;
  sol.primal_residual = r.prim;
  sol.dual_residual = r.dual;
  sol.polished = true;
  return true;
}

class AdmmSolver {
 public:
  AdmmSolver(const QpProblem& qp, const QpSettings& st) : qp_(qp), st_(st), s_(equilibrate(qp, st.scaling_passes)) {
    n_ = qp.H.rows();
    m_ = qp.A.rows();
    x_ = VectorXd::Zero(n_);
    w_ = VectorXd::Zero(m_);
    y_ = VectorXd::Zero(m_);
    rho_scalar_ = st.rho;
    set_rho();
  }

  void warm_start(const QpWarmStart& warm) {
    if (warm.z.size() == n_) {
      x_ = warm.z.cwiseQuotient(s_.D);
      w_ = (s_.A * x_).cwiseMax(s_.l).cwiseMin(s_.u);
    }
    if (warm.y.size() == m_) y_ = s_.c * warm.y.cwiseQuotient(s_.E);
  }

  QpSolution solve(bool try_polish_first) {
    QpSolution sol;
    if (st_.polish && try_polish_first && m_ > 0) {
      const auto act = guess_active_set(w_, y_, s_.l, s_.u);
      if (polish(act, sol)) {
        sol.iterations = 0;
        return sol;
      }
      last_failed_polish_ = act;
    }

    std::vector<Activity> previous_active;
    int stable_count = 0;
    VectorXd y_prev = y_;
    for (int k = 1; k <= st_.max_iter; ++k) {
      y_prev = y_;
      iterate();
      const bool check = k <= 5 || k % 5 == 0 || k == st_.max_iter;
      if (!check) continue;

      const Residuals r = scaled_residuals();
      if (r.converged()) {
        // Accept the ADMM iterate unless polishing yields a cleaner point.
        if (st_.polish && m_ > 0 && polish(guess_active_set(w_, y_, s_.l, s_.u), sol)) {
          sol.iterations = k;
          return sol;
        }
        finish(sol, QpStatus::solved, k);
        if (sol.primal_residual <= r.eps_prim * 10.0 + st_.tol_abs && sol.dual_residual <= r.eps_dual * 10.0 + st_.tol_abs) {
          return sol;
        }
      }
      if (primal_infeasible(y_ - y_prev)) {
        finish(sol, QpStatus::infeasible, k);
        return sol;
      }
      if (st_.polish && m_ > 0) {
        auto act = guess_active_set(w_, y_, s_.l, s_.u);
        stable_count = (act == previous_active) ? stable_count + 1 : 0;
        if (stable_count >= 2 && act != last_failed_polish_) {
          if (polish(act, sol)) {
            sol.iterations = k;
            return sol;
          }
          last_failed_polish_ = act;
        }
        previous_active = std::move(act);
      }
      if (st_.adapt_interval > 0 && k % st_.adapt_interval == 0) adapt_rho(r);
    }
    finish(sol, QpStatus::max_iter, st_.max_iter);
    return sol;
  }

 private:
  void set_rho() {
    rho_ = VectorXd::Constant(m_, rho_scalar_);
    for (Index i = 0; i < m_; ++i) {
      const bool lo_inf = is_inf_lower(s_.l(i));
      const bool up_inf = is_inf_upper(s_.u(i));
      if (lo_inf && up_inf) {
        rho_(i) = 1e-6;
      } else if (s_.u(i) - s_.l(i) < 1e-9) {
        rho_(i) = 1e3 * rho_scalar_;
      }
    }
    MatrixXd K = s_.H;
    K.diagonal().array() += st_.sigma;
    if (m_ > 0) {
      const MatrixXd Ar = rho_.cwiseSqrt().asDiagonal() * s_.A;
      K.noalias() += Ar.transpose() * Ar;
    }
    llt_.compute(K);
  }

  void iterate() {
    VectorXd rhs = st_.sigma * x_ - s_.g;
    if (m_ > 0) rhs.noalias() += s_.A.transpose() * (rho_.cwiseProduct(w_) - y_);
    const VectorXd xt = llt_.solve(rhs);
    const double a = st_.relaxation;
    x_ = a * xt + (1.0 - a) * x_;
    if (m_ == 0) return;
    const VectorXd wt = s_.A * xt;
    const VectorXd w_relax = a * wt + (1.0 - a) * w_;
    const VectorXd w_new = (w_relax + y_.cwiseQuotient(rho_)).cwiseMax(s_.l).cwiseMin(s_.u);
    y_ += rho_.cwiseProduct(w_relax - w_new);
    w_ = w_new;
  }

  Residuals scaled_residuals() {
    Residuals r;
    const VectorXd Ax = s_.A * x_;
    const VectorXd Hx = s_.H * x_;
    const VectorXd Aty = s_.A.transpose() * y_;
    const VectorXd Einv = s_.E.cwiseInverse();
    const VectorXd Dinv = s_.D.cwiseInverse();
    r.prim = m_ > 0 ? inf_norm(Einv.cwiseProduct(Ax - w_)) : 0.0;
    r.dual = inf_norm(Dinv.cwiseProduct(Hx + s_.g + Aty)) / s_.c;
    r.eps_prim = st_.tol_abs + st_.tol_rel * std::max(inf_norm(Einv.cwiseProduct(Ax)), inf_norm(Einv.cwiseProduct(w_)));
    r.eps_dual = st_.tol_abs + st_.tol_rel / s_.c *
                                   std::max({inf_norm(Dinv.cwiseProduct(Hx)), inf_norm(Dinv.cwiseProduct(Aty)),
                                             inf_norm(Dinv.cwiseProduct(s_.g))});
    last_prim_scale_ = std::max(inf_norm(Einv.cwiseProduct(Ax)), inf_norm(Einv.cwiseProduct(w_)));
    last_dual_scale_ = std::max({inf_norm(Dinv.cwiseProduct(Hx)), inf_norm(Dinv.cwiseProduct(Aty)),
                                 inf_norm(Dinv.cwiseProduct(s_.g))}) / s_.c;
    return r;
  }

  void adapt_rho(const Residuals& r) {
    const double pn = r.prim / std::max(last_prim_scale_, 1e-12);
    const double dn = r.dual / std::max(last_dual_scale_, 1e-12);
    if (!(pn > 0.0) || !(dn > 0.0)) return;
    const double ratio = std::sqrt(pn / dn);
    if (ratio > 5.0 || ratio < 0.2) {
      rho_scalar_ = std::clamp(rho_scalar_ * ratio, 1e-6, 1e6);
      set_rho();
    }
  }

  bool primal_infeasible(const VectorXd& dy) const {
    if (m_ == 0) return false;
    const VectorXd dy_unscaled = s_.E.cwiseProduct(dy);
    const double norm_dy = inf_norm(dy_unscaled);
    if (norm_dy < 1e-12) return false;
    const VectorXd Atdy = s_.D.cwiseInverse().cwiseProduct(s_.A.transpose() * dy);
    if (inf_norm(Atdy) > st_.infeasibility_tol * norm_dy) return false;
    double support = 0.0;
    for (Index i = 0; i < m_; ++i) {
      if (dy(i) > 0.0) {
        if (is_inf_upper(s_.u(i))) return false;
        support += s_.u(i) * dy(i);
      } else if (dy(i) < 0.0) {
        if (is_inf_lower(s_.l(i))) return false;
        support += s_.l(i) * dy(i);
      }
    }
    return support < -st_.infeasibility_tol * norm_dy;
  }

  bool polish(const std::vector<Activity>& act, QpSolution& sol) {
    VectorXd zs;
    VectorXd ys;
    if (!solve_on_active_set(s_.H, s_.g, s_.A, s_.l, s_.u, act, zs, ys)) return false;
    return accept_candidate(qp_, act, s_.D.cwiseProduct(zs), VectorXd(s_.E.cwiseProduct(ys) / s_.c), st_, sol);
  }

  void finish(QpSolution& sol, QpStatus status, int iterations) const {
    sol.z = s_.D.cwiseProduct(x_);
    sol.y = m_ > 0 ? VectorXd(s_.E.cwiseProduct(y_) / s_.c) : VectorXd();
    const Residuals r = unscaled_residuals(qp_, sol.z, sol.y, st_);
    sol.primal_residual = r.prim;
    sol.dual_residual = r.dual;
    sol.status = status;
    sol.iterations = iterations;
    sol.polished = false;
  }

  const QpProblem& qp_;
  const QpSettings& st_;
  Scaled s_;
  Index n_{0};
  Index m_{0};
  VectorXd x_;
  VectorXd w_;
  VectorXd y_;
  VectorXd rho_;
  double rho_scalar_{0.1};
  double last_prim_scale_{1.0};
  double last_dual_scale_{1.0};
  Eigen::LLT<MatrixXd> llt_;
  std::vector<Activity> last_failed_polish_;
};


// Goldfarb-Idnani dual active-set method. Each two-sided row i contributes the
// one-sided constraints a_i z >= l_i (side +1) and -a_i z >= -u_i (side -1).
// J = L^{-T} Q and R (upper triangular) hold the QR factors of L^{-1} N_active.
class DualActiveSetSolver {
 public:
  DualActiveSetSolver(const QpProblem& qp, const QpSettings& st) : qp_(qp), st_(st) {
    n_ = qp.H.rows();
    m_ = qp.A.rows();
  }

  bool factorize() {
    const Eigen::LLT<MatrixXd> llt(qp_.H);
    if (llt.info() != Eigen::Success) return false;
    J_ = llt.matrixU().solve(MatrixXd::Identity(n_, n_));
    z_ = -llt.solve(qp_.g);
    return J_.allFinite() && z_.allFinite();
  }

  QpSolution solve() {
    QpSolution sol;
    R_ = MatrixXd::Zero(n_, n_);
    lambda_ = VectorXd::Zero(n_);
    active_.clear();
    row_norm_ = m_ > 0 ? VectorXd(qp_.A.rowwise().norm()) : VectorXd();
    int iterations = 0;

    for (;;) {
      Candidate p;
      if (!most_violated(p)) break;
      const VectorXd np = p.side * qp_.A.row(p.row).transpose();
      const double bp = p.side > 0 ? qp_.lower(p.row) : -qp_.upper(p.row);
      double lambda_p = 0.0;

      for (;;) {
        if (++iterations > st_.max_iter) return finish(sol, QpStatus::max_iter, iterations - 1);
        const auto q = static_cast<Index>(active_.size());
        VectorXd d = J_.transpose() * np;
        const VectorXd s = J_.rightCols(n_ - q) * d.tail(n_ - q);
        const VectorXd r =
            q > 0 ? VectorXd(R_.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q))) : VectorXd();

        // Largest dual step keeping the active multipliers nonnegative.
        double t_dual = std::numeric_limits<double>::infinity();
        Index blocking = -1;
        for (Index j = 0; j < q; ++j) {
          if (active_[static_cast<std::size_t>(j)].equality || r(j) <= 0.0) continue;
          const double ratio = lambda_(j) / r(j);
          if (ratio < t_dual) {
            t_dual = ratio;
            blocking = j;
          }
        }
        // Step that makes constraint p active.
        double t_primal = std::numeric_limits<double>::infinity();
        const double curvature = d.tail(n_ - q).squaredNorm();
        if (curvature > 1e-14 * std::max(1.0, d.squaredNorm())) {
          t_primal = (bp - np.dot(z_)) / curvature;
        }
        if (!std::isfinite(t_primal) && !std::isfinite(t_dual)) {
          return finish(sol, QpStatus::infeasible, iterations);
        }
        if (!std::isfinite(t_primal)) {
          if (q > 0) lambda_.head(q) -= t_dual * r;
          lambda_p += t_dual;
          drop(blocking);
          continue;
        }
        const double t = std::min(t_primal, t_dual);
        z_ += t * s;
        if (q > 0) lambda_.head(q) -= t * r;
        lambda_p += t;
        if (t_primal <= t_dual) {
          add(d, p, lambda_p);
          break;
        }
        drop(blocking);
      }
    }

    // Clean up round-off accumulated by the updates.
    std::vector<Activity> act(static_cast<std::size_t>(m_), Activity::inactive);
    for (const Entry& e : active_) act[static_cast<std::size_t>(e.row)] = e.side > 0 ? Activity::lower : Activity::upper;
    VectorXd zr;
    VectorXd yr;
    if (solve_on_active_set(qp_.H, qp_.g, qp_.A, qp_.lower, qp_.upper, act, zr, yr) &&
        accept_candidate(qp_, act, zr, yr, st_, sol)) {
      sol.iterations = iterations;
      return sol;
    }
    return finish(sol, QpStatus::solved, iterations);
  }

 private:
  struct Entry {
    Index row;
    int side;
    bool equality;
  };
  struct Candidate {
    Index row{-1};
    int side{0};
  };

  bool most_violated(Candidate& p) const {
    if (m_ == 0) return false;
    const VectorXd Az = qp_.A * z_;
    std::vector<char> is_active(static_cast<std::size_t>(m_), 0);
    for (const Entry& e : active_) is_active[static_cast<std::size_t>(e.row)] = 1;
    double worst = 0.0;
    for (Index i = 0; i < m_; ++i) {
      if (is_active[static_cast<std::size_t>(i)] || row_norm_(i) == 0.0) continue;
      const double lo = qp_.lower(i);
      const double up = qp_.upper(i);
      const double tol = st_.tol_abs + st_.tol_rel * std::abs(Az(i));
      if (!is_inf_lower(lo) && lo - Az(i) > tol) {
        const double v = (lo - Az(i)) / row_norm_(i);
        if (v > worst) {
          worst = v;
          p = {i, +1};
        }
      }
      if (!is_inf_upper(up) && Az(i) - up > tol) {
        const double v = (Az(i) - up) / row_norm_(i);
        if (v > worst) {
          worst = v;
          p = {i, -1};
        }
      }
    }
    return worst > 0.0;
  }

  static void rotate(MatrixXd& M, Index a, Index b, double c, double s, bool columns) {
    if (columns) {
      const VectorXd ca = M.col(a);
      M.col(a) = c * ca + s * M.col(b);
      M.col(b) = -s * ca + c * M.col(b);
    } else {
      const Eigen::RowVectorXd ra = M.row(a);
      M.row(a) = c * ra + s * M.row(b);
      M.row(b) = -s * ra + c * M.row(b);
    }
  }

  void add(VectorXd& d, const Candidate& p, double lambda_p) {
    const auto q = static_cast<Index>(active_.size());
    for (Index j = n_ - 1; j > q; --j) {
      const double a = d(j - 1);
      const double b = d(j);
      if (b == 0.0) continue;
      const double h = std::hypot(a, b);
      const double c = a / h;
      const double s = b / h;
      d(j - 1) = h;
      d(j) = 0.0;
      rotate(J_, j - 1, j, c, s, true);
    }
    R_.col(q).head(q + 1) = d.head(q + 1);
    lambda_(q) = lambda_p;
    const bool equality = qp_.upper(p.row) - qp_.lower(p.row) < 1e-12;
    active_.push_back({p.row, p.side, equality});
  }

  void drop(Index k) {
    const auto q = static_cast<Index>(active_.size());
    for (Index j = k; j + 1 < q; ++j) {
      R_.col(j) = R_.col(j + 1);
      lambda_(j) = lambda_(j + 1);
    }
    R_.col(q - 1).setZero();
    lambda_(q - 1) = 0.0;
    active_.erase(active_.begin() + k);
    const Index qn = q - 1;
    // Restore the triangular shape of R column by column.
    for (Index j = k; j < qn; ++j) {
      const double a = R_(j, j);
      const double b = R_(j + 1, j);
      if (b == 0.0) continue;
      const double h = std::hypot(a, b);
      const double c = a / h;
      const double s = b / h;
      rotate(R_, j, j + 1, c, s, false);
      R_(j + 1, j) = 0.0;
      rotate(J_, j, j + 1, c, s, true);
    }
  }

  QpSolution& finish(QpSolution& sol, QpStatus status, int iterations) const {
    sol.z = z_;
    sol.y = VectorXd::Zero(m_);
    for (std::size_t j = 0; j < active_.size(); ++j) {
      sol.y(active_[j].row) = -active_[j].side * lambda_(static_cast<Index>(j));
    }
    const Residuals r = unscaled_residuals(qp_, sol.z, sol.y, st_);
    sol.primal_residual = r.prim;
    sol.dual_residual = r.dual;
    sol.status = status;
    if (status == QpStatus::solved && !r.converged()) sol.status = QpStatus::max_iter;
    sol.iterations = iterations;
    sol.polished = false;
    return sol;
  }

  const QpProblem& qp_;
  const QpSettings& st_;
  Index n_{0};
  Index m_{0};
  MatrixXd J_;
  MatrixXd R_;
  VectorXd z_;
  VectorXd lambda_;
  VectorXd row_norm_;
  std::vector<Entry> active_;
};

}  // namespace

QpSolution solve_qp(const QpProblem& qp, const QpSettings& settings, const std::optional<QpWarmStart>& warm) {
  validate(qp);
  if (settings.method == QpMethod::active_set) {
    // A warm guess of the active set is tried first; the dual method starts cold.
    if (warm && warm->y.size() == qp.A.rows() && qp.A.rows() > 0) {
      const VectorXd Az = warm->z.size() == qp.H.rows() ? VectorXd(qp.A * warm->z) : VectorXd::Zero(qp.A.rows());
      const VectorXd w = Az.cwiseMax(qp.lower).cwiseMin(qp.upper);
      const auto act = guess_active_set(w, warm->y, qp.lower, qp.upper);
      VectorXd z;
      VectorXd y;
      QpSolution sol;
      if (solve_on_active_set(qp.H, qp.g, qp.A, qp.lower, qp.upper, act, z, y) &&
          accept_candidate(qp, act, z, y, settings, sol)) {
        sol.iterations = 0;
        return sol;
      }
    }
    DualActiveSetSolver solver(qp, settings);
    if (solver.factorize()) return solver.solve();
  }
  AdmmSolver solver(qp, settings);
  if (warm) solver.warm_start(*warm);
  return solver.solve(warm.has_value());
}

}  // namespace chainmpc
