#include "drra/localsolve.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "drra/error.hpp"

namespace drra {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Affine chart of {x : A x = rhs}: x = particular + N z with N an orthonormal
// null-space basis. pinv gives the minimum-norm correction for projections.
struct EqManifold {
  Eigen::VectorXd particular;
  Eigen::MatrixXd N;
  Eigen::MatrixXd pinv;  // dim x m
  bool trivial = false;  // no equality rows
};

EqManifold make_manifold(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs, int dim) {
  EqManifold m;
  if (A.rows() == 0) {
    m.trivial = true;
    m.particular = Eigen::VectorXd::Zero(dim);
    m.N = Eigen::MatrixXd::Identity(dim, dim);
    m.pinv = Eigen::MatrixXd::Zero(dim, 0);
    return m;
  }
  const int rows = static_cast<int>(A.rows());
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV | Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  if (sv(rows - 1) <= 1e-12 * sv(0))
    throw SolveError("equality rows are rank-deficient (sigma_min/sigma_max = " +
                     std::to_string(sv(rows - 1) / sv(0)) + ")");
  m.pinv = svd.matrixV().leftCols(rows) * sv.cwiseInverse().asDiagonal() *
           svd.matrixU().transpose();
  m.particular = m.pinv * rhs;
  m.N = svd.matrixV().rightCols(dim - rows);
  return m;
}

Eigen::VectorXd project_onto(const EqManifold& m, const Eigen::MatrixXd& A,
                             const Eigen::VectorXd& rhs, const Eigen::VectorXd& x) {
  if (m.trivial) return x;
  return x - m.pinv * (A * x - rhs);
}

// Extends a manifold over x to one over (x, extra scalar); the scalar is free.
EqManifold extend_manifold(const EqManifold& m, double extra0) {
  EqManifold e;
  const int d = static_cast<int>(m.particular.size());
  const int z = static_cast<int>(m.N.cols());
  e.trivial = m.trivial;
  e.particular = Eigen::VectorXd::Zero(d + 1);
  e.particular.head(d) = m.particular;
  e.particular(d) = extra0;
  e.N = Eigen::MatrixXd::Zero(d + 1, z + 1);
  e.N.topLeftCorner(d, z) = m.N;
  e.N(d, z) = 1.0;
  e.pinv = Eigen::MatrixXd::Zero(d + 1, m.pinv.cols());
  e.pinv.topRows(d) = m.pinv;
  return e;
}

// Largest step along dx before an affine local constraint of any block hits
// zero, scaled by the fraction-to-boundary coefficient. Nonlinear constraints
// are left to the backtracking domain checks.
double affine_block_step_limit(const ConstrainedProgram& prog, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& dx, double frac) {
  double t = kInf;
  for (std::size_t b = 0; b < prog.blocks.size(); ++b) {
    const auto& blk = prog.blocks[b];
    const auto xb = x.segment(prog.offsets[b], blk.dim());
    const auto db = dx.segment(prog.offsets[b], blk.dim());
    for (const auto& g : blk.constraints()) {
      if (g.kind != SmoothConvexFn::Kind::affine) continue;
      const double rate = g.q.dot(db);
      if (rate > 0.0) t = std::min(t, frac * (-g.value(xb)) / rate);
    }
  }
  return t;
}

// Merit for the main path-following stage: block objectives (fixed-weight
// local barriers included) plus -mu log(slack) on the inequality rows.
struct MainMerit {
  const ConstrainedProgram* prog;
  double mu;

  bool in_domain(const Eigen::VectorXd& x) const {
    if (!prog->strictly_interior(x)) return false;
    if (prog->m_in() > 0 && mu > 0.0)
      return ((prog->ineq_rhs - prog->ineq_A * x).array() > 0.0).all();
    return true;
  }

  double value(const Eigen::VectorXd& x) const {
    if (!in_domain(x)) return kInf;
    double v = prog->objective(x);
    if (prog->m_in() > 0 && mu > 0.0) {
      const Eigen::VectorXd s = prog->ineq_rhs - prog->ineq_A * x;
      v -= mu * s.array().log().sum();
    }
    return v;
  }

  void grad_hess(const Eigen::VectorXd& x, Eigen::VectorXd& g, Eigen::MatrixXd& H) const {
    g = prog->objective_gradient(x);
    H = prog->objective_hessian(x);
    if (prog->m_in() > 0 && mu > 0.0) {
      const Eigen::VectorXd s = prog->ineq_rhs - prog->ineq_A * x;
      g += prog->ineq_A.transpose() * (mu * s.cwiseInverse());
      H += prog->ineq_A.transpose() * (mu * s.array().square().inverse()).matrix().asDiagonal() *
           prog->ineq_A;
    }
  }

  double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& dx, double frac) const {
    double t = affine_block_step_limit(*prog, x, dx, frac);
    if (prog->m_in() > 0 && mu > 0.0) {
      const Eigen::VectorXd s = prog->ineq_rhs - prog->ineq_A * x;
      const Eigen::VectorXd ds = prog->ineq_A * dx;
      for (int j = 0; j < s.size(); ++j)
        if (ds(j) > 0.0) t = std::min(t, frac * s(j) / ds(j));
    }
    return t;
  }

  // Bound on the floating-point noise of the merit gradient. Barrier terms
  // amplify rounding of the constraint value by 1/g^2, which caps the
  // achievable gradient norm once iterates approach a boundary.
  double grad_noise(const Eigen::VectorXd& x) const {
    constexpr double eps = 2.3e-16;
    double noise = 0.0;
    for (std::size_t b = 0; b < prog->blocks.size(); ++b) {
      const auto& blk = prog->blocks[b];
      const auto xb = x.segment(prog->offsets[b], blk.dim());
      const double c = blk.barrier().c;
      const bool log_kind = blk.barrier().kind == BarrierSpec::Kind::log;
      for (const auto& g : blk.constraints()) {
        const double gv = g.value(xb);
        double gscale = std::abs(g.r) + g.q.cwiseAbs().dot(xb.cwiseAbs());
        if (g.kind == SmoothConvexFn::Kind::quadratic)
          gscale += 0.5 * xb.cwiseAbs().dot(g.Q.cwiseAbs() * xb.cwiseAbs());
        const double dg = eps * (gscale + std::abs(gv));
        const double gn = g.gradient(xb).norm();
        noise += log_kind ? c * gn * dg / (gv * gv)
                          : 2.0 * c * gn * dg / std::abs(gv * gv * gv);
      }
    }
    if (prog->m_in() > 0 && mu > 0.0) {
      const Eigen::VectorXd s = prog->ineq_rhs - prog->ineq_A * x;
      for (int j = 0; j < s.size(); ++j) {
        const double sscale =
            std::abs(prog->ineq_rhs(j)) + prog->ineq_A.row(j).cwiseAbs().dot(x.cwiseAbs().transpose());
        const double ds = eps * (sscale + s(j));
        noise += mu * ds / (s(j) * s(j)) * prog->ineq_A.row(j).norm();
      }
    }
    return noise;
  }
};

// Phase-1 step A merit over (x, w): minimize the worst local-constraint
// margin, min w s.t. g_bj(x) <= w, via -mu log(w - g).
struct MarginMerit {
  const ConstrainedProgram* prog;
  double mu;

  bool in_domain(const Eigen::VectorXd& v) const {
    const int d = prog->dim();
    const double w = v(d);
    for (std::size_t b = 0; b < prog->blocks.size(); ++b) {
      const auto xb = v.segment(prog->offsets[b], prog->blocks[b].dim());
      for (const auto& g : prog->blocks[b].constraints())
        if (!(w - g.value(xb) > 0.0)) return false;
    }
    return true;
  }

  double value(const Eigen::VectorXd& v) const {
    if (!in_domain(v)) return kInf;
    const int d = prog->dim();
    const double w = v(d);
    double out = w;
    for (std::size_t b = 0; b < prog->blocks.size(); ++b) {
      const auto xb = v.segment(prog->offsets[b], prog->blocks[b].dim());
      for (const auto& g : prog->blocks[b].constraints())
        out -= mu * std::log(w - g.value(xb));
    }
    return out;
  }

  void grad_hess(const Eigen::VectorXd& v, Eigen::VectorXd& grad, Eigen::MatrixXd& H) const {
    const int d = prog->dim();
    const double w = v(d);
    grad = Eigen::VectorXd::Zero(d + 1);
    H = Eigen::MatrixXd::Zero(d + 1, d + 1);
    grad(d) = 1.0;
    for (std::size_t b = 0; b < prog->blocks.size(); ++b) {
      const int off = prog->offsets[b];
      const int bd = prog->blocks[b].dim();
      const auto xb = v.segment(off, bd);
      for (const auto& g : prog->blocks[b].constraints()) {
        const double h = w - g.value(xb);
        const Eigen::VectorXd gg = g.gradient(xb);
        grad.segment(off, bd) += mu * gg / h;
        grad(d) -= mu / h;
        // nh = grad of h over (x_b, w) is [-gg; 1]
        const double c2 = mu / (h * h);
        H.block(off, off, bd, bd) += c2 * gg * gg.transpose() + (mu / h) * g.hessian(xb);
        H.block(off, d, bd, 1) += -c2 * gg;
        H.block(d, off, 1, bd) += -c2 * gg.transpose();
        H(d, d) += c2;
      }
    }
  }

  double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double frac) const {
    const int d = prog->dim();
    const double w = v(d), dw = dv(d);
    double t = kInf;
    for (std::size_t b = 0; b < prog->blocks.size(); ++b) {
      const auto xb = v.segment(prog->offsets[b], prog->blocks[b].dim());
      const auto db = dv.segment(prog->offsets[b], prog->blocks[b].dim());
      for (const auto& g : prog->blocks[b].constraints()) {
        if (g.kind != SmoothConvexFn::Kind::affine) continue;
        const double rate = g.q.dot(db) - dw;  // d/dt of (g - w)
        if (rate > 0.0) t = std::min(t, frac * (w - g.value(xb)) / rate);
      }
    }
    return t;
  }

  double grad_noise(const Eigen::VectorXd&) const { return 0.0; }
};

// Phase-1 step B merit over (x, t): minimize the worst inequality-row
// violation while the fixed-weight barriers keep x strictly interior.
struct SlackMerit {
  const ConstrainedProgram* prog;
  double mu;

  bool in_domain(const Eigen::VectorXd& v) const {
    const int d = prog->dim();
    const auto x = v.head(d);
    if (!prog->strictly_interior(x)) return false;
    const Eigen::VectorXd h =
        Eigen::VectorXd::Constant(prog->m_in(), v(d)) + prog->ineq_rhs - prog->ineq_A * x;
    return (h.array() > 0.0).all();
  }

  double value(const Eigen::VectorXd& v) const {
    if (!in_domain(v)) return kInf;
    const int d = prog->dim();
    const auto x = v.head(d);
    const Eigen::VectorXd h =
        Eigen::VectorXd::Constant(prog->m_in(), v(d)) + prog->ineq_rhs - prog->ineq_A * x;
    return v(d) + prog->objective(x) - mu * h.array().log().sum();
  }

  void grad_hess(const Eigen::VectorXd& v, Eigen::VectorXd& grad, Eigen::MatrixXd& H) const {
    const int d = prog->dim();
    const auto x = v.head(d);
    const Eigen::VectorXd h =
        Eigen::VectorXd::Constant(prog->m_in(), v(d)) + prog->ineq_rhs - prog->ineq_A * x;
    grad = Eigen::VectorXd::Zero(d + 1);
    H = Eigen::MatrixXd::Zero(d + 1, d + 1);
    grad.head(d) = prog->objective_gradient(x);
    H.topLeftCorner(d, d) = prog->objective_hessian(x);
    grad(d) = 1.0;
    const Eigen::VectorXd hinv = h.cwiseInverse();
    grad.head(d) += prog->ineq_A.transpose() * (mu * hinv);
    grad(d) -= mu * hinv.sum();
    const Eigen::VectorXd w2 = mu * hinv.array().square().matrix();
    H.topLeftCorner(d, d) += prog->ineq_A.transpose() * w2.asDiagonal() * prog->ineq_A;
    const Eigen::VectorXd cross = -(prog->ineq_A.transpose() * w2);
    H.block(0, d, d, 1) = cross;
    H.block(d, 0, 1, d) = cross.transpose();
    H(d, d) += w2.sum();
  }

  double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double frac) const {
    const int d = prog->dim();
    const auto x = v.head(d);
    const auto dx = dv.head(d);
    double t = affine_block_step_limit(*prog, x, dx, frac);
    const Eigen::VectorXd h =
        Eigen::VectorXd::Constant(prog->m_in(), v(d)) + prog->ineq_rhs - prog->ineq_A * x;
    const Eigen::VectorXd dh = Eigen::VectorXd::Constant(prog->m_in(), dv(d)) - prog->ineq_A * dx;
    for (int j = 0; j < h.size(); ++j)
      if (dh(j) < 0.0) t = std::min(t, frac * h(j) / (-dh(j)));
    return t;
  }

  double grad_noise(const Eigen::VectorXd&) const { return 0.0; }
};

struct NewtonOutcome {
  Eigen::VectorXd x;
  int iters = 0;
  bool converged = false;
};

using MeritLog = std::vector<std::pair<int, double>>;

// Damped Newton on the equality manifold: steps restricted to range(N),
// ridge-regularized reduced system, fraction-to-boundary step cap, Armijo
// backtracking with a roundoff noise floor so quadratic-phase steps are not
// rejected once merit differences sink below double precision. An optional
// stop predicate ends the loop as soon as an iterate is good enough; phase-1
// merits can be unbounded below, so waiting for stationarity would diverge.
template <class Merit>
NewtonOutcome newton_loop(const Merit& merit, const Eigen::MatrixXd& N, Eigen::VectorXd x,
                          double tol, const SolveOptions& opts, int stage, MeritLog* log,
                          const std::function<bool(const Eigen::VectorXd&)>& stop_when = {}) {
  NewtonOutcome out;
  const int zdim = static_cast<int>(N.cols());
  double fx = merit.value(x);
  if (log) log->emplace_back(stage, fx);
  if (stop_when && stop_when(x)) {
    out.x = std::move(x);
    out.converged = true;
    return out;
  }
  if (zdim == 0) {
    out.x = std::move(x);
    out.converged = true;
    return out;
  }
  Eigen::VectorXd g;
  Eigen::MatrixXd H;
  for (int it = 0; it < opts.newton_budget; ++it) {
    merit.grad_hess(x, g, H);
    const Eigen::VectorXd gz = N.transpose() * g;
    // The gradient cannot be driven below its own evaluation noise, which
    // dominates near barrier boundaries; converge at that floor.
    if (gz.norm() <= std::max(tol, 8.0 * merit.grad_noise(x))) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd Hz = N.transpose() * H * N;
    const double tr = std::max(1.0, Hz.trace());
    Eigen::VectorXd dz;
    double ridge = 0.0;
    for (;;) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(
          Hz + ridge * Eigen::MatrixXd::Identity(zdim, zdim));
      bool ok = ldlt.info() == Eigen::Success;
      if (ok) {
        dz = ldlt.solve(-gz);
        ok = dz.allFinite() && gz.dot(dz) < 0.0;
      }
      if (ok) break;
      ridge = ridge == 0.0 ? 1e-12 * tr : ridge * 100.0;
      if (ridge > 1e20 * tr) {
        dz = -gz;
        break;
      }
    }
    const Eigen::VectorXd dx = N * dz;
    const double slope = g.dot(dx);
    if (!(slope < 0.0)) break;

    double t = std::min(1.0, merit.max_step(x, dx, opts.boundary_frac));
    const double noise_floor = 1e-15 * (1.0 + std::abs(fx));
    bool accepted = false;
    for (int ls = 0; ls < 80 && t > 0.0; ++ls) {
      const Eigen::VectorXd xt = x + t * dx;
      const double ft = merit.value(xt);
      if (ft <= fx + opts.armijo_slope * t * slope + noise_floor) {
        x = xt;
        fx = ft;
        accepted = true;
        break;
      }
      t *= opts.armijo_shrink;
    }
    ++out.iters;
    if (!accepted) break;
    if (log) log->emplace_back(stage, fx);
    if (stop_when && stop_when(x)) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged) {
    // Line-search stall or exhausted budget: accept if the gradient sits at
    // the evaluation noise floor, fail otherwise.
    merit.grad_hess(x, g, H);
    out.converged = (N.transpose() * g).norm() <= std::max(tol, 32.0 * merit.grad_noise(x));
  }
  out.x = std::move(x);
  return out;
}

int local_constraint_count(const ConstrainedProgram& prog) {
  int p = 0;
  for (const auto& b : prog.blocks) p += static_cast<int>(b.constraints().size());
  return p;
}

double max_local_constraint(const ConstrainedProgram& prog, const Eigen::VectorXd& x) {
  double worst = -kInf;
  for (std::size_t b = 0; b < prog.blocks.size(); ++b)
    worst = std::max(worst,
                     prog.blocks[b].max_constraint(x.segment(prog.offsets[b], prog.blocks[b].dim())));
  return worst;
}

}  // namespace

int ConstrainedProgram::dim() const {
  if (blocks.empty()) return 0;
  return offsets.back() + blocks.back().dim();
}

bool ConstrainedProgram::strictly_interior(const Eigen::VectorXd& x) const {
  for (std::size_t b = 0; b < blocks.size(); ++b)
    if (!blocks[b].strictly_interior(x.segment(offsets[b], blocks[b].dim()))) return false;
  return true;
}

double ConstrainedProgram::objective(const Eigen::VectorXd& x) const {
  double v = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b)
    v += blocks[b].value(x.segment(offsets[b], blocks[b].dim()));
  return v;
}

Eigen::VectorXd ConstrainedProgram::objective_gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g(dim());
  for (std::size_t b = 0; b < blocks.size(); ++b)
    g.segment(offsets[b], blocks[b].dim()) =
        blocks[b].gradient(x.segment(offsets[b], blocks[b].dim()));
  return g;
}

Eigen::MatrixXd ConstrainedProgram::objective_hessian(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim(), dim());
  for (std::size_t b = 0; b < blocks.size(); ++b)
    H.block(offsets[b], offsets[b], blocks[b].dim(), blocks[b].dim()) =
        blocks[b].hessian(x.segment(offsets[b], blocks[b].dim()));
  return H;
}

Eigen::VectorXd ConstrainedProgram::block(const Eigen::VectorXd& x, int b) const {
  return x.segment(offsets[b], blocks[b].dim());
}

ConstrainedProgram make_single_program(const NodeProblem& node, const BarrierSpec& barrier,
                                       const Eigen::VectorXd& y_in, const Eigen::VectorXd& y_eq) {
  if (y_in.size() != node.A_in.rows() || y_eq.size() != node.A_eq.rows())
    throw ValidationError("share dimensions do not match node " + std::to_string(node.id) +
                          " coupling rows");
  ConstrainedProgram p;
  p.blocks.emplace_back(node, barrier);
  p.offsets = {0};
  p.ineq_A = node.A_in;
  p.ineq_rhs = y_in;
  p.eq_A = node.A_eq;
  p.eq_rhs = y_eq;
  return p;
}

ConstrainedProgram make_joint_program(const std::vector<const NodeProblem*>& nodes,
                                      const BarrierSpec& barrier, const Eigen::VectorXd& rhs_in_sum,
                                      const Eigen::VectorXd& rhs_eq_sum) {
  if (nodes.empty()) throw ValidationError("joint program needs at least one node");
  const int m_in = static_cast<int>(rhs_in_sum.size());
  const int m_eq = static_cast<int>(rhs_eq_sum.size());
  int total = 0;
  ConstrainedProgram p;
  p.offsets.reserve(nodes.size());
  for (const NodeProblem* node : nodes) {
    if (node->A_in.rows() != m_in || node->A_eq.rows() != m_eq)
      throw ValidationError("node " + std::to_string(node->id) +
                            " coupling rows do not match the summed rhs");
    p.offsets.push_back(total);
    p.blocks.emplace_back(*node, barrier);
    total += node->dim;
  }
  p.ineq_A.resize(m_in, total);
  p.eq_A.resize(m_eq, total);
  for (std::size_t b = 0; b < nodes.size(); ++b) {
    p.ineq_A.block(0, p.offsets[b], m_in, nodes[b]->dim) = nodes[b]->A_in;
    p.eq_A.block(0, p.offsets[b], m_eq, nodes[b]->dim) = nodes[b]->A_eq;
  }
  p.ineq_rhs = rhs_in_sum;
  p.eq_rhs = rhs_eq_sum;
  return p;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::infeasible:
      return "infeasible";
    case SolveStatus::max_iters:
      return "max-iters";
  }
  return "unknown";
}

Eigen::VectorXd SubproblemResult::multiplier() const {
  Eigen::VectorXd u(u_in.size() + u_eq.size());
  u << u_in, u_eq;
  return u;
}

Phase1Result phase1(const ConstrainedProgram& program, const SolveOptions& opts) {
  const int d = program.dim();
  const EqManifold mani = make_manifold(program.eq_A, program.eq_rhs, d);
  Eigen::VectorXd x = mani.particular;
  Phase1Result res;

  // Step A: strict interiority of the local constraints.
  if (local_constraint_count(program) > 0 && !program.strictly_interior(x)) {
    const double w0 = max_local_constraint(program, x) + 1.0;
    const double early_margin = 1e-6 * (1.0 + std::abs(w0));
    const std::function<bool(const Eigen::VectorXd&)> interior_enough =
        [&](const Eigen::VectorXd& v) {
          return max_local_constraint(program, v.head(d)) <= -early_margin;
        };
    EqManifold ext = extend_manifold(mani, w0);
    Eigen::VectorXd v = ext.particular;
    v.head(d) = x;
    const int p = local_constraint_count(program);
    double mu = 1.0;
    for (;;) {
      MarginMerit merit{&program, mu};
      const double tol = std::max(1e-9, 1e-2 * mu);
      auto outcome = newton_loop(merit, ext.N, v, tol, opts, 0, nullptr, interior_enough);
      v = outcome.x;
      if (interior_enough(v)) break;
      if (p * mu <= 1e-9) break;
      if (v.head(d).norm() > 1e12) break;
      mu *= opts.mu_shrink;
    }
    x = v.head(d);
    if (!(max_local_constraint(program, x) <= -1e-9)) {
      res.status = SolveStatus::infeasible;
      res.max_local_constraint = max_local_constraint(program, x);
      return res;
    }
  }

  // Step B: positive slack on every inequality row.
  if (program.m_in() > 0) {
    Eigen::VectorXd slack = program.ineq_rhs - program.ineq_A * x;
    if (!((slack.array() > 0.0).all())) {
      const double t0 = (program.ineq_A * x - program.ineq_rhs).maxCoeff() + 1.0;
      const double early_margin = 1e-6 * (1.0 + std::abs(t0));
      const std::function<bool(const Eigen::VectorXd&)> slack_enough =
          [&](const Eigen::VectorXd& v) {
            return (program.ineq_A * v.head(d) - program.ineq_rhs).maxCoeff() <= -early_margin;
          };
      EqManifold ext = extend_manifold(mani, t0);
      Eigen::VectorXd v = ext.particular;
      v.head(d) = x;
      double mu = 1.0;
      for (;;) {
        SlackMerit merit{&program, mu};
        const double tol = std::max(1e-9, 1e-2 * mu);
        auto outcome = newton_loop(merit, ext.N, v, tol, opts, 0, nullptr, slack_enough);
        v = outcome.x;
        if (slack_enough(v)) break;
        if (program.m_in() * mu <= 1e-9) break;
        if (v.head(d).norm() > 1e12) break;
        mu *= opts.mu_shrink;
      }
      x = v.head(d);
      const double viol = (program.ineq_A * x - program.ineq_rhs).maxCoeff();
      if (!(viol < -1e-9)) {
        res.status = SolveStatus::infeasible;
        res.max_local_constraint = max_local_constraint(program, x);
        res.min_ineq_slack = -viol;
        return res;
      }
    }
    res.min_ineq_slack = (program.ineq_rhs - program.ineq_A * x).minCoeff();
  }

  res.status = SolveStatus::converged;
  res.x = std::move(x);
  res.max_local_constraint = max_local_constraint(program, res.x);
  return res;
}

SubproblemResult solve(const ConstrainedProgram& program, const SolveOptions& opts,
                       const std::optional<Eigen::VectorXd>& warm_start) {
  const int d = program.dim();
  const int m_in = program.m_in();
  const int m_eq = program.m_eq();
  const EqManifold mani = make_manifold(program.eq_A, program.eq_rhs, d);

  SubproblemResult res;
  Eigen::VectorXd x;
  bool started = false;
  if (warm_start) {
    Eigen::VectorXd xp = project_onto(mani, program.eq_A, program.eq_rhs, *warm_start);
    const bool interior = program.strictly_interior(xp);
    const bool slack_ok =
        m_in == 0 || ((program.ineq_rhs - program.ineq_A * xp).array() > 0.0).all();
    if (interior && slack_ok) {
      x = std::move(xp);
      started = true;
    }
  }
  if (!started) {
    Phase1Result p1 = phase1(program, opts);
    if (p1.status != SolveStatus::converged) {
      res.status = SolveStatus::infeasible;
      return res;
    }
    x = std::move(p1.x);
  }

  MeritLog* log = opts.collect_merit ? &res.merit_history : nullptr;
  bool all_converged = true;
  double mu_final = 0.0;
  if (m_in == 0) {
    MainMerit merit{&program, 0.0};
    const double scale = 1.0 + program.objective_gradient(x).norm();
    auto outcome = newton_loop(merit, mani.N, x, opts.kkt_tol * scale, opts, 0, log);
    x = outcome.x;
    res.newton_iters = outcome.iters;
    all_converged = outcome.converged;
  } else {
    double mu = 1.0;
    for (int stage = 0;; ++stage) {
      const bool final_stage = m_in * mu <= opts.gap_tol;
      MainMerit merit{&program, mu};
      const double scale = 1.0 + program.objective_gradient(x).norm();
      const double tol =
          final_stage ? opts.kkt_tol * scale : std::max(opts.kkt_tol * scale, 1e-2 * mu);
      auto outcome = newton_loop(merit, mani.N, x, tol, opts, stage, log);
      x = outcome.x;
      res.newton_iters += outcome.iters;
      if (!outcome.converged) {
        all_converged = false;
        break;
      }
      if (final_stage) {
        mu_final = mu;
        break;
      }
      mu *= opts.mu_shrink;
    }
  }

  res.x_star = x;
  res.value = program.objective(x);
  if (m_in > 0) {
    // Path multipliers u_j = mu / s_j. Near-active rows have slacks at the
    // rounding scale, so those multipliers are refined by a stationarity
    // least-squares fit; the path values keep the sign guarantee.
    const Eigen::VectorXd s = program.ineq_rhs - program.ineq_A * x;
    res.u_in = mu_final * s.cwiseInverse();
    const Eigen::VectorXd grad = program.objective_gradient(x);
    std::vector<int> active;
    for (int j = 0; j < m_in; ++j)
      if (res.u_in(j) >= 1e-6) active.push_back(j);
    if (!active.empty()) {
      Eigen::MatrixXd M(d, static_cast<int>(active.size()) + m_eq);
      for (std::size_t a = 0; a < active.size(); ++a)
        M.col(static_cast<int>(a)) = program.ineq_A.row(active[a]).transpose();
      if (m_eq > 0) M.rightCols(m_eq) = program.eq_A.transpose();
      Eigen::VectorXd v = grad;
      for (int j = 0; j < m_in; ++j) {
        bool is_active = false;
        for (int a : active) is_active = is_active || a == j;
        if (!is_active) v += res.u_in(j) * program.ineq_A.row(j).transpose();
      }
      const Eigen::VectorXd fit =
          Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(M).solve(-v);
      for (std::size_t a = 0; a < active.size(); ++a) {
        const double refined = fit(static_cast<int>(a));
        if (refined >= -1e-10) res.u_in(active[a]) = std::max(refined, 0.0);
      }
    }
    res.comp_slackness = (res.u_in.array() * s.array()).abs().maxCoeff();
  } else {
    res.u_in = Eigen::VectorXd();
    res.comp_slackness = 0.0;
  }
  Eigen::VectorXd v = program.objective_gradient(x);
  if (m_in > 0) v += program.ineq_A.transpose() * res.u_in;
  if (m_eq > 0) {
    res.u_eq = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(program.eq_A.transpose())
                   .solve(-v);
    res.kkt_residual = (v + program.eq_A.transpose() * res.u_eq).norm();
  } else {
    res.u_eq = Eigen::VectorXd();
    res.kkt_residual = v.norm();
  }
  res.status = all_converged ? SolveStatus::converged : SolveStatus::max_iters;
  return res;
}

SubproblemResult primal_value(const NodeProblem& node, const BarrierSpec& barrier,
                              const Eigen::VectorXd& y_in, const Eigen::VectorXd& y_eq,
                              const SolveOptions& opts,
                              const std::optional<Eigen::VectorXd>& warm_start) {
  return solve(make_single_program(node, barrier, y_in, y_eq), opts, warm_start);
}

NeighborhoodResult solve_neighborhood(const std::vector<const NodeProblem*>& nodes,
                                      const BarrierSpec& barrier, const Eigen::VectorXd& rhs_in_sum,
                                      const Eigen::VectorXd& rhs_eq_sum, const SolveOptions& opts,
                                      const std::optional<Eigen::VectorXd>& warm_start) {
  const ConstrainedProgram program = make_joint_program(nodes, barrier, rhs_in_sum, rhs_eq_sum);
  SubproblemResult sub = solve(program, opts, warm_start);
  if (!sub.converged()) {
    std::ostringstream os;
    os << "neighborhood solve failed (" << to_string(sub.status) << ") for nodes {";
    for (std::size_t i = 0; i < nodes.size(); ++i) os << (i ? "," : "") << nodes[i]->id;
    os << "}, rhs_in_sum = [" << rhs_in_sum.transpose() << "], rhs_eq_sum = ["
       << rhs_eq_sum.transpose() << "]; this contradicts the running-state feasibility invariant";
    throw SolveError(os.str());
  }
  NeighborhoodResult out;
  out.x.reserve(nodes.size());
  for (std::size_t b = 0; b < nodes.size(); ++b) out.x.push_back(program.block(sub.x_star, b));
  out.multiplier = sub.multiplier();
  out.value = sub.value;
  out.raw = std::move(sub);
  return out;
}

}  // namespace drra
