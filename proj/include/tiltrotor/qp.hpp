#pragma once

// Dense convex QP solver.
//
//   minimize    1/2 z'Hz + g'z
//   subject to  E z = e
//               lbA <= A z <= ubA
//               lb  <=   z <= ub
//
// Strictly convex problems are solved with the Goldfarb-Idnani dual
// active-set method. Positive semidefinite H is handled by an outer proximal
// point loop, each pass solving a strictly convex regularized problem warm
// from the previous iterate.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace tiltrotor {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QpProblem {
  MatrixXd hessian;
  VectorXd gradient;
  MatrixXd eq_matrix;     // rows = equality count, may be empty
  VectorXd eq_rhs;
  MatrixXd ineq_matrix;   // rows = general constraint count, may be empty
  VectorXd ineq_lower;    // -inf allowed
  VectorXd ineq_upper;    // +inf allowed
  VectorXd lower;         // size n or empty
  VectorXd upper;

  int num_vars() const { return static_cast<int>(gradient.size()); }
};

enum class QpStatus { kSolved, kInfeasible, kIterationLimit, kNotConvex };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::kSolved: return "solved";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kIterationLimit: return "iteration_limit";
    case QpStatus::kNotConvex: return "not_convex";
  }
  return "unknown";
}

struct QpOptions {
  int max_iterations = 0;          // 0 -> 20 * (n + constraints)
  double feasibility_tol = 1e-10;
  int max_proximal_passes = 200;
  double proximal_weight = 1e-6;   // relative to the largest diagonal of H
};

/// Multipliers follow the sign convention H z + g = E'mu + A'y + w, where
/// y and w are nonnegative on lower-active rows and nonpositive on upper-active rows.
struct QpResult {
  VectorXd z;
  VectorXd eq_multipliers;
  VectorXd ineq_multipliers;
  VectorXd bound_multipliers;
  QpStatus status = QpStatus::kIterationLimit;
  int iterations = 0;
  int active_set_size = 0;
  double kkt_residual = kInf;
};

/// Largest of stationarity, primal infeasibility, dual infeasibility and complementarity.
inline double qp_kkt_residual(const QpProblem& qp, const VectorXd& z, const VectorXd& mu,
                              const VectorXd& y, const VectorXd& w) {
  VectorXd stat = qp.hessian * z + qp.gradient;
  double res = 0.0;
  if (qp.eq_matrix.rows() > 0) {
    stat -= qp.eq_matrix.transpose() * mu;
    res = std::max(res, (qp.eq_matrix * z - qp.eq_rhs).cwiseAbs().maxCoeff());
  }
  auto two_sided = [&res](double val, double lo, double hi, double mult) {
    res = std::max({res, lo - val, val - hi});
    // Lower-active rows carry mult >= 0, upper-active rows mult <= 0.
    if (mult > 0.0) {
      res = std::max(res, std::abs(mult * (val - lo)));
    } else if (mult < 0.0) {
      res = std::max(res, std::abs(mult * (hi - val)));
    }
  };
  if (qp.ineq_matrix.rows() > 0) {
    stat -= qp.ineq_matrix.transpose() * y;
    const VectorXd az = qp.ineq_matrix * z;
    for (Eigen::Index i = 0; i < az.size(); ++i) {
      two_sided(az(i), qp.ineq_lower(i), qp.ineq_upper(i), y(i));
      if (y(i) > 0.0 && !std::isfinite(qp.ineq_lower(i))) res = std::max(res, y(i));
      if (y(i) < 0.0 && !std::isfinite(qp.ineq_upper(i))) res = std::max(res, -y(i));
    }
  }
  if (qp.lower.size() > 0) {
    stat -= w;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      two_sided(z(i), qp.lower(i), qp.upper(i), w(i));
      if (w(i) > 0.0 && !std::isfinite(qp.lower(i))) res = std::max(res, w(i));
      if (w(i) < 0.0 && !std::isfinite(qp.upper(i))) res = std::max(res, -w(i));
    }
  }
  return std::max(res, stat.size() > 0 ? stat.cwiseAbs().maxCoeff() : 0.0);
}

namespace detail {

// One-sided constraint n'z >= b, or n'z = b for equalities.
struct Row {
  enum class Kind { kEq, kIneqLower, kIneqUpper, kBoundLower, kBoundUpper };
  Kind kind;
  int source;  // index into the originating block
  double rhs;
};

class DualActiveSet {
 public:
  DualActiveSet(const QpProblem& qp, const MatrixXd& h, const VectorXd& g)
      : qp_(qp), h_(h), g_(g), n_(qp.num_vars()) {
    for (Eigen::Index i = 0; i < qp.eq_matrix.rows(); ++i)
      rows_.push_back({Row::Kind::kEq, static_cast<int>(i), qp.eq_rhs(i)});
    for (Eigen::Index i = 0; i < qp.ineq_matrix.rows(); ++i) {
      if (std::isfinite(qp.ineq_lower(i)))
        rows_.push_back({Row::Kind::kIneqLower, static_cast<int>(i), qp.ineq_lower(i)});
      if (std::isfinite(qp.ineq_upper(i)))
        rows_.push_back({Row::Kind::kIneqUpper, static_cast<int>(i), -qp.ineq_upper(i)});
    }
    for (Eigen::Index i = 0; i < qp.lower.size(); ++i) {
      if (std::isfinite(qp.lower(i)))
        rows_.push_back({Row::Kind::kBoundLower, static_cast<int>(i), qp.lower(i)});
      if (std::isfinite(qp.upper(i)))
        rows_.push_back({Row::Kind::kBoundUpper, static_cast<int>(i), -qp.upper(i)});
    }
  }

  bool factor() {
    Eigen::LLT<MatrixXd> llt(h_);
    if (llt.info() != Eigen::Success) return false;
    hinv_ = llt.solve(MatrixXd::Identity(n_, n_));
    return hinv_.allFinite();
  }

  // Normal vector of row k (n'z >= b form).
  VectorXd normal(int k) const {
    const Row& r = rows_[k];
    VectorXd v = VectorXd::Zero(n_);
    switch (r.kind) {
      case Row::Kind::kEq:
        v = qp_.eq_matrix.row(r.source).transpose();
        break;
      case Row::Kind::kIneqLower:
        v = qp_.ineq_matrix.row(r.source).transpose();
        break;
      case Row::Kind::kIneqUpper:
        v = -qp_.ineq_matrix.row(r.source).transpose();
        break;
      case Row::Kind::kBoundLower:
        v(r.source) = 1.0;
        break;
      case Row::Kind::kBoundUpper:
        v(r.source) = -1.0;
        break;
    }
    return v;
  }

  double slack(int k, const VectorXd& z) const {
    const Row& r = rows_[k];
    switch (r.kind) {
      case Row::Kind::kEq:
      case Row::Kind::kIneqLower:
        return (r.kind == Row::Kind::kEq ? qp_.eq_matrix.row(r.source).dot(z)
                                         : qp_.ineq_matrix.row(r.source).dot(z)) - r.rhs;
      case Row::Kind::kIneqUpper:
        return -qp_.ineq_matrix.row(r.source).dot(z) - r.rhs;
      case Row::Kind::kBoundLower:
        return z(r.source) - r.rhs;
      case Row::Kind::kBoundUpper:
        return -z(r.source) - r.rhs;
    }
    return 0.0;
  }

  QpStatus run(VectorXd& z, int max_iter, double tol, int& iterations) {
    z = -hinv_ * g_;
    active_.clear();
    lambda_.clear();
    normals_.resize(n_, 0);
    std::vector<char> is_active(rows_.size(), 0);
    iterations = 0;

    // Equalities first: they are never dropped.
    for (int k = 0; k < static_cast<int>(rows_.size()); ++k) {
      if (rows_[k].kind != Row::Kind::kEq) continue;
      const QpStatus s = add_constraint(k, z, is_active, max_iter, iterations, true);
      if (s != QpStatus::kSolved) return s;
    }

    while (true) {
      int p = -1;
      double worst = -tol;
      for (int k = 0; k < static_cast<int>(rows_.size()); ++k) {
        if (is_active[k] || rows_[k].kind == Row::Kind::kEq) continue;
        const double s = slack(k, z);
        if (s < worst) {
          worst = s;
          p = k;
        }
      }
      if (p < 0) return QpStatus::kSolved;
      const QpStatus s = add_constraint(p, z, is_active, max_iter, iterations, false);
      if (s != QpStatus::kSolved) return s;
    }
  }

  const std::vector<int>& active() const { return active_; }
  const std::vector<double>& lambda() const { return lambda_; }
  const std::vector<Row>& rows() const { return rows_; }

 private:
  // Moves z and the multipliers until row p becomes active, dropping
  // inequality rows whose multipliers reach zero on the way.
  QpStatus add_constraint(int p, VectorXd& z, std::vector<char>& is_active, int max_iter,
                          int& iterations, bool equality) {
    const VectorXd np = normal(p);
    double t_p = 0.0;  // multiplier accumulated on p
    while (true) {
      if (++iterations > max_iter) return QpStatus::kIterationLimit;
      const int na = static_cast<int>(active_.size());
      VectorXd dz;
      VectorXd dlam(na);
      if (na == 0) {
        dz = hinv_ * np;
      } else {
        const MatrixXd& nmat = normals_;
        const MatrixXd hn = hinv_ * nmat;
        const MatrixXd s = nmat.transpose() * hn;
        const VectorXd rhs = -(hn.transpose() * np);
        dlam = s.ldlt().solve(rhs);
        dz = hinv_ * np + hn * dlam;
      }
      const double sp = slack(p, z);
      if (equality && std::abs(sp) <= 1e-14) {
        // Already satisfied; a dependent equality adds nothing.
        if (dz.norm() <= 1e-12 * (1.0 + np.norm())) return QpStatus::kSolved;
      }
      const double curvature = np.dot(dz);
      double t_primal = kInf;
      if (curvature > 1e-12 * np.dot(hinv_ * np)) {
        t_primal = -sp / curvature;
      }
      double t_dual = kInf;
      int block = -1;
      for (int j = 0; j < na; ++j) {
        if (rows_[active_[j]].kind == Row::Kind::kEq) continue;
        if (dlam(j) < 0.0) {
          const double t = lambda_[j] / -dlam(j);
          if (t < t_dual) {
            t_dual = t;
            block = j;
          }
        }
      }
      if (equality) {
        // Equalities may need negative multipliers: step sign follows the slack.
        if (!std::isfinite(t_primal)) return QpStatus::kInfeasible;
        z += t_primal * dz;
        for (int j = 0; j < na; ++j) lambda_[j] += t_primal * dlam(j);
        push_active(p, t_primal, np, is_active);
        return QpStatus::kSolved;
      }
      if (!std::isfinite(t_primal) && !std::isfinite(t_dual)) return QpStatus::kInfeasible;
      const double t = std::min(t_primal, t_dual);
      if (std::isfinite(t_primal)) z += t * dz;
      for (int j = 0; j < na; ++j) lambda_[j] += t * dlam(j);
      t_p += t;
      if (t_primal <= t_dual) {
        push_active(p, t_p, np, is_active);
        return QpStatus::kSolved;
      }
      drop_active(block, is_active);
    }
  }

  void push_active(int k, double mult, const VectorXd& nk, std::vector<char>& is_active) {
    active_.push_back(k);
    lambda_.push_back(mult);
    normals_.conservativeResize(n_, static_cast<Eigen::Index>(active_.size()));
    normals_.col(normals_.cols() - 1) = nk;
    is_active[k] = 1;
  }

  void drop_active(int j, std::vector<char>& is_active) {
    is_active[active_[j]] = 0;
    active_.erase(active_.begin() + j);
    lambda_.erase(lambda_.begin() + j);
    const Eigen::Index last = normals_.cols() - 1;
    for (Eigen::Index c = j; c < last; ++c) normals_.col(c) = normals_.col(c + 1);
    normals_.conservativeResize(n_, last);
  }

  const QpProblem& qp_;
  const MatrixXd& h_;
  const VectorXd& g_;
  int n_;
  MatrixXd hinv_;
  std::vector<Row> rows_;
  std::vector<int> active_;
  std::vector<double> lambda_;
  MatrixXd normals_;
};

inline void scatter_multipliers(const QpProblem& qp, const DualActiveSet& das, QpResult& r) {
  r.eq_multipliers = VectorXd::Zero(qp.eq_matrix.rows());
  r.ineq_multipliers = VectorXd::Zero(qp.ineq_matrix.rows());
  r.bound_multipliers = VectorXd::Zero(qp.lower.size());
  const auto& rows = das.rows();
  for (std::size_t j = 0; j < das.active().size(); ++j) {
    const Row& row = rows[das.active()[j]];
    const double m = das.lambda()[j];
    switch (row.kind) {
      case Row::Kind::kEq: r.eq_multipliers(row.source) = m; break;
      case Row::Kind::kIneqLower: r.ineq_multipliers(row.source) = m; break;
      case Row::Kind::kIneqUpper: r.ineq_multipliers(row.source) = -m; break;
      case Row::Kind::kBoundLower: r.bound_multipliers(row.source) = m; break;
      case Row::Kind::kBoundUpper: r.bound_multipliers(row.source) = -m; break;
    }
  }
  r.active_set_size = static_cast<int>(das.active().size());
}

inline void normalize(QpProblem& qp) {
  const int n = qp.num_vars();
  if (qp.eq_matrix.size() == 0) {
    qp.eq_matrix.resize(0, n);
    qp.eq_rhs.resize(0);
  }
  if (qp.ineq_matrix.size() == 0) {
    qp.ineq_matrix.resize(0, n);
    qp.ineq_lower.resize(0);
    qp.ineq_upper.resize(0);
  }
  if (qp.lower.size() == 0 && qp.upper.size() > 0) qp.lower = VectorXd::Constant(n, -kInf);
  if (qp.upper.size() == 0 && qp.lower.size() > 0) qp.upper = VectorXd::Constant(n, kInf);
}

}  // namespace detail

/// Solves a convex QP. Deterministic for identical inputs.
inline QpResult solve_qp(QpProblem qp, const QpOptions& opt = {}) {
  detail::normalize(qp);
  const int n = qp.num_vars();
  const int m = static_cast<int>(qp.eq_matrix.rows() + 2 * qp.ineq_matrix.rows() +
                                 2 * qp.lower.size());
  const int max_iter = opt.max_iterations > 0 ? opt.max_iterations : 20 * (n + m) + 50;

  QpResult result;
  result.z = VectorXd::Zero(n);

  const MatrixXd h = 0.5 * (qp.hessian + qp.hessian.transpose());
  {
    Eigen::LDLT<MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() < -1e-9 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff())).any()) {
      result.status = QpStatus::kNotConvex;
      return result;
    }
  }

  // Strictly convex: a single dual active-set solve.
  detail::DualActiveSet direct(qp, h, qp.gradient);
  bool strictly_convex = false;
  {
    Eigen::LLT<MatrixXd> llt(h);
    if (llt.info() == Eigen::Success) {
      const double dmax = llt.matrixL().toDenseMatrix().diagonal().maxCoeff();
      const double dmin = llt.matrixL().toDenseMatrix().diagonal().minCoeff();
      strictly_convex = dmin > 1e-7 * dmax;
    }
  }
  if (strictly_convex && direct.factor()) {
    result.status = direct.run(result.z, max_iter, opt.feasibility_tol, result.iterations);
    detail::scatter_multipliers(qp, direct, result);
    result.kkt_residual = qp_kkt_residual(qp, result.z, result.eq_multipliers,
                                          result.ineq_multipliers, result.bound_multipliers);
    return result;
  }

  // Semidefinite: proximal point iterations on H + rho I.
  const double rho = opt.proximal_weight * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
  const MatrixXd hp = h + rho * MatrixXd::Identity(n, n);
  VectorXd center = VectorXd::Zero(n);
  int total_iter = 0;
  for (int pass = 0; pass < opt.max_proximal_passes; ++pass) {
    const VectorXd gp = qp.gradient - rho * center;
    detail::DualActiveSet das(qp, hp, gp);
    if (!das.factor()) {
      result.status = QpStatus::kNotConvex;
      return result;
    }
    int it = 0;
    VectorXd z;
    const QpStatus s = das.run(z, max_iter, opt.feasibility_tol, it);
    total_iter += it;
    result.status = s;
    result.z = z;
    detail::scatter_multipliers(qp, das, result);
    if (s != QpStatus::kSolved) break;
    result.kkt_residual = qp_kkt_residual(qp, result.z, result.eq_multipliers,
                                          result.ineq_multipliers, result.bound_multipliers);
    const double move = (z - center).cwiseAbs().maxCoeff();
    center = z;
    if (result.kkt_residual <= 1e-10 || move <= 1e-14) break;
  }
  result.iterations = total_iter;
  result.kkt_residual = qp_kkt_residual(qp, result.z, result.eq_multipliers,
                                        result.ineq_multipliers, result.bound_multipliers);
  return result;
}

}  // namespace tiltrotor
