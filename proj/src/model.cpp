#include "drra/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "drra/error.hpp"
#include "drra/localsolve.hpp"

namespace drra {

namespace {

std::string shape(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

SmoothConvexFn SmoothConvexFn::quadratic(Eigen::MatrixXd Q, Eigen::VectorXd q, double r) {
  SmoothConvexFn f;
  f.kind = Kind::quadratic;
  f.dim = static_cast<int>(q.size());
  if (Q.rows() != f.dim || Q.cols() != f.dim)
    throw ValidationError("quadratic Q is " + shape(Q) + ", expected " + std::to_string(f.dim) +
                          "x" + std::to_string(f.dim));
  f.Q = std::move(Q);
  f.q = std::move(q);
  f.r = r;
  return f;
}

SmoothConvexFn SmoothConvexFn::affine(Eigen::VectorXd a, double beta) {
  SmoothConvexFn f;
  f.kind = Kind::affine;
  f.dim = static_cast<int>(a.size());
  f.q = std::move(a);
  f.r = beta;
  return f;
}

double SmoothConvexFn::value(const Eigen::VectorXd& x) const {
  if (kind == Kind::quadratic) return 0.5 * x.dot(Q * x) + q.dot(x) + r;
  return q.dot(x) + r;
}

Eigen::VectorXd SmoothConvexFn::gradient(const Eigen::VectorXd& x) const {
  if (kind == Kind::quadratic) return Q * x + q;
  return q;
}

Eigen::MatrixXd SmoothConvexFn::hessian(const Eigen::VectorXd& x) const {
  (void)x;
  if (kind == Kind::quadratic) return Q;
  return Eigen::MatrixXd::Zero(dim, dim);
}

bool SmoothConvexFn::is_psd() const {
  if (kind == Kind::affine) return true;
  const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  if (es.info() != Eigen::Success) return false;
  const double lmax = std::max(1.0, es.eigenvalues().maxCoeff());
  return es.eigenvalues().minCoeff() >= -1e-10 * lmax;
}

double barrier_eval(double g_value, const BarrierSpec& spec) {
  if (!(g_value < 0.0))
    throw DomainError("barrier evaluated at g = " + std::to_string(g_value) +
                      " >= 0: point left the strict interior");
  if (spec.kind == BarrierSpec::Kind::log) return -std::log(-g_value);
  return -1.0 / g_value;
}

Eigen::MatrixXd NodeProblem::stacked_A() const {
  Eigen::MatrixXd A(A_in.rows() + A_eq.rows(), dim);
  A << A_in, A_eq;
  return A;
}

Eigen::VectorXd CouplingSpec::stacked_b() const {
  Eigen::VectorXd b(b_in.size() + b_eq.size());
  b << b_in, b_eq;
  return b;
}

BarrierObjective::BarrierObjective(const NodeProblem& node, const BarrierSpec& barrier)
    : dim_(node.dim), objective_(node.objective), constraints_(node.local_constraints),
      barrier_(barrier) {}

bool BarrierObjective::strictly_interior(const Eigen::VectorXd& x) const {
  for (const auto& g : constraints_)
    if (!(g.value(x) < 0.0)) return false;
  return true;
}

double BarrierObjective::max_constraint(const Eigen::VectorXd& x) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& g : constraints_) worst = std::max(worst, g.value(x));
  return worst;
}

double BarrierObjective::value(const Eigen::VectorXd& x) const {
  double v = objective_.value(x);
  for (const auto& g : constraints_) v += barrier_.c * barrier_eval(g.value(x), barrier_);
  return v;
}

Eigen::VectorXd BarrierObjective::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd grad = objective_.gradient(x);
  for (const auto& g : constraints_) {
    const double gv = g.value(x);
    if (!(gv < 0.0))
      throw DomainError("gradient requested outside the strict interior (g = " +
                        std::to_string(gv) + ")");
    const Eigen::VectorXd gg = g.gradient(x);
    if (barrier_.kind == BarrierSpec::Kind::log) {
      grad += barrier_.c * (-gg / gv);
    } else {
      grad += barrier_.c * (gg / (gv * gv));
    }
  }
  return grad;
}

Eigen::MatrixXd BarrierObjective::hessian(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd hess = objective_.hessian(x);
  for (const auto& g : constraints_) {
    const double gv = g.value(x);
    if (!(gv < 0.0))
      throw DomainError("hessian requested outside the strict interior (g = " +
                        std::to_string(gv) + ")");
    const Eigen::VectorXd gg = g.gradient(x);
    const Eigen::MatrixXd gh = g.hessian(x);
    if (barrier_.kind == BarrierSpec::Kind::log) {
      hess += barrier_.c * (-gh / gv + gg * gg.transpose() / (gv * gv));
    } else {
      hess += barrier_.c * (gh / (gv * gv) - 2.0 * gg * gg.transpose() / (gv * gv * gv));
    }
  }
  return hess;
}

bool ValidationReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.pass ? "[pass] " : "[FAIL] ") << c.name;
    if (!c.detail.empty()) os << ": " << c.detail;
    os << "\n";
  }
  return os.str();
}

namespace {

// Interprets an affine constraint touching a single coordinate as a bound.
// a_k x_k + r <= 0 gives x_k <= -r/a_k (a_k > 0) or x_k >= -r/a_k (a_k < 0).
struct CoordBound {
  int coord;
  bool upper;
  double bound;
};

std::optional<CoordBound> as_coordinate_bound(const SmoothConvexFn& g) {
  if (g.kind != SmoothConvexFn::Kind::affine) return std::nullopt;
  int nz = -1;
  for (int k = 0; k < g.dim; ++k) {
    if (g.q[k] != 0.0) {
      if (nz >= 0) return std::nullopt;
      nz = k;
    }
  }
  if (nz < 0) return std::nullopt;
  return CoordBound{nz, g.q[nz] > 0.0, -g.r / g.q[nz]};
}

std::optional<Eigen::VectorXd> coordinate_bounds(const NodeProblem& node, bool upper) {
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd out = Eigen::VectorXd::Constant(node.dim, upper ? inf : -inf);
  for (const auto& g : node.local_constraints) {
    auto b = as_coordinate_bound(g);
    if (!b || b->upper != upper) continue;
    out[b->coord] = upper ? std::min(out[b->coord], b->bound) : std::max(out[b->coord], b->bound);
  }
  for (int k = 0; k < node.dim; ++k)
    if (!std::isfinite(out[k])) return std::nullopt;
  return out;
}

bool node_set_compact(const NodeProblem& node) {
  if (coordinate_lower_bounds(node) && coordinate_upper_bounds(node)) return true;
  // A strictly convex quadratic constraint bounds the set by itself.
  for (const auto& g : node.local_constraints) {
    if (g.kind != SmoothConvexFn::Kind::quadratic) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.Q);
    if (es.info() == Eigen::Success &&
        es.eigenvalues().minCoeff() > 1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()))
      return true;
  }
  return false;
}

bool is_identity(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() == 0) return false;
  return (A - Eigen::MatrixXd::Identity(A.rows(), A.cols())).cwiseAbs().maxCoeff() <= 1e-12;
}

// Lower-bounded coordinates combined with identity coupling rows pin the sum,
// which bounds every variable from both sides.
bool sum_pattern_compact(const ProblemInstance& inst) {
  bool eq_identity = inst.coupling.m_eq() > 0;
  bool in_identity = inst.coupling.m_in() > 0;
  for (const auto& node : inst.nodes) {
    if (!coordinate_lower_bounds(node)) return false;
    eq_identity = eq_identity && is_identity(node.A_eq);
    in_identity = in_identity && is_identity(node.A_in);
  }
  return eq_identity || in_identity;
}

}  // namespace

std::optional<Eigen::VectorXd> coordinate_lower_bounds(const NodeProblem& node) {
  return coordinate_bounds(node, /*upper=*/false);
}

std::optional<Eigen::VectorXd> coordinate_upper_bounds(const NodeProblem& node) {
  return coordinate_bounds(node, /*upper=*/true);
}

ValidationReport validate_instance(const ProblemInstance& inst) {
  ValidationReport report;
  auto add = [&report](const std::string& name, bool pass, const std::string& detail = "") {
    report.checks.push_back({name, pass, detail});
    return pass;
  };
  auto fail = [](std::string& slot, const std::string& detail) {
    slot = detail;
    return false;
  };

  // Structural consistency first; later checks assume it.
  std::string dim_detail;
  bool dims_ok = true;
  const int n = inst.n();
  const int m_in = inst.coupling.m_in();
  const int m_eq = inst.coupling.m_eq();
  if (n < 1) {
    dims_ok = false;
    dim_detail = "no nodes";
  } else if (inst.graph.n() != n) {
    dims_ok = false;
    dim_detail = "graph has " + std::to_string(inst.graph.n()) + " vertices for " +
                 std::to_string(n) + " nodes";
  } else if (m_in + m_eq < 1) {
    dims_ok = false;
    dim_detail = "no coupling rows";
  } else if (!(inst.barrier.c > 0.0)) {
    dims_ok = false;
    dim_detail = "barrier weight c must be positive";
  } else {
    for (int i = 0; i < n && dims_ok; ++i) {
      const auto& node = inst.nodes[i];
      const std::string tag = "node " + std::to_string(i + 1);
      if (node.id != i + 1) {
        dims_ok = fail(dim_detail, tag + " has id " + std::to_string(node.id));
      } else if (node.dim < 1 || node.objective.dim != node.dim) {
        dims_ok = fail(dim_detail, tag + " objective dim mismatch");
      } else if (node.A_in.rows() != m_in || (m_in > 0 && node.A_in.cols() != node.dim)) {
        dims_ok = fail(dim_detail, tag + " A_in is " + shape(node.A_in));
      } else if (node.A_eq.rows() != m_eq || (m_eq > 0 && node.A_eq.cols() != node.dim)) {
        dims_ok = fail(dim_detail, tag + " A_eq is " + shape(node.A_eq));
      } else {
        for (const auto& g : node.local_constraints) {
          if (g.dim != node.dim) {
            dims_ok = fail(dim_detail, tag + " constraint dim mismatch");
            break;
          }
        }
      }
    }
  }
  add("dimensions", dims_ok, dim_detail);

  bool convex_ok = dims_ok;
  std::string convex_detail;
  if (dims_ok) {
    for (const auto& node : inst.nodes) {
      if (!node.objective.is_psd()) {
        convex_ok = fail(convex_detail, "node " + std::to_string(node.id) +
                                                " objective is not PSD");
        break;
      }
      for (const auto& g : node.local_constraints) {
        if (!g.is_psd()) {
          convex_ok = fail(convex_detail, "node " + std::to_string(node.id) +
                                                  " constraint is not PSD");
          break;
        }
      }
      if (!convex_ok) break;
    }
  }
  add("convexity", convex_ok, convex_detail);

  bool rank_ok = dims_ok;
  std::string rank_detail;
  if (dims_ok) {
    for (const auto& node : inst.nodes) {
      const Eigen::MatrixXd A = node.stacked_A();
      const int m = static_cast<int>(A.rows());
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
      const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
      int rank = 0;
      for (int k = 0; k < svd.singularValues().size(); ++k)
        if (svd.singularValues()(k) > 1e-9 * smax) ++rank;
      if (rank < m) {
        rank_ok = fail(rank_detail, "node " + std::to_string(node.id) + " stacked A has rank " +
                                            std::to_string(rank) + " < " + std::to_string(m));
        break;
      }
    }
  }
  add("rank", rank_ok, rank_detail);

  const bool graph_ok = dims_ok && inst.graph.connected();
  add("graph", graph_ok, graph_ok ? "" : "graph is not connected");

  bool slater_ok = false;
  std::string slater_detail;
  if (dims_ok && convex_ok && rank_ok) {
    try {
      std::vector<const NodeProblem*> all;
      all.reserve(inst.nodes.size());
      for (const auto& node : inst.nodes) all.push_back(&node);
      const auto program =
          make_joint_program(all, inst.barrier, inst.coupling.b_in, inst.coupling.b_eq);
      const Phase1Result p1 = phase1(program);
      slater_ok = p1.status == SolveStatus::converged;
      std::ostringstream os;
      if (slater_ok) {
        os << "interior point with max g = " << p1.max_local_constraint;
        if (m_in > 0) os << ", min coupling slack = " << p1.min_ineq_slack;
      } else {
        os << "phase-I reports " << to_string(p1.status);
      }
      slater_detail = os.str();
    } catch (const std::exception& e) {
      slater_detail = e.what();
    }
  } else {
    slater_detail = "skipped: structural checks failed";
  }
  add("slater", slater_ok, slater_detail);

  bool compact_certified = false;
  if (dims_ok) {
    compact_certified = sum_pattern_compact(inst);
    if (!compact_certified) {
      compact_certified = true;
      for (const auto& node : inst.nodes) compact_certified = compact_certified && node_set_compact(node);
    }
  }
  if (compact_certified) {
    report.compactness = ValidationReport::Compactness::certified;
    add("compactness", true, "certified");
  } else if (inst.assume_compact) {
    report.compactness = ValidationReport::Compactness::asserted;
    add("compactness", true, "asserted by instance flag");
  } else {
    report.compactness = ValidationReport::Compactness::failed;
    add("compactness", false, "no recognizable bounding pattern and no assume_compact flag");
  }

  return report;
}

ProblemInstance gen_economic_dispatch(const std::vector<DispatchCost>& costs,
                                      const std::vector<std::pair<double, double>>& bounds,
                                      double b_total, Graph graph, BarrierSpec barrier) {
  const int n = static_cast<int>(costs.size());
  if (n < 1) throw ValidationError("dispatch generator needs at least one node");
  if (static_cast<int>(bounds.size()) != n || graph.n() != n)
    throw ValidationError("dispatch generator: costs, bounds, and graph sizes disagree");

  double lo_sum = 0.0, hi_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(costs[i].a > 0.0))
      throw ValidationError("dispatch node " + std::to_string(i + 1) + " needs a > 0");
    const auto [lo, hi] = bounds[i];
    if (!(lo < hi))
      throw ValidationError("dispatch node " + std::to_string(i + 1) + " has empty box [" +
                            std::to_string(lo) + ", " + std::to_string(hi) + "]");
    lo_sum += lo;
    hi_sum += hi;
  }
  if (!(lo_sum < b_total && b_total < hi_sum))
    throw ValidationError("dispatch budget b = " + std::to_string(b_total) +
                          " must lie strictly between sum of lower bounds " +
                          std::to_string(lo_sum) + " and sum of upper bounds " +
                          std::to_string(hi_sum));

  ProblemInstance inst;
  inst.barrier = barrier;
  inst.graph = std::move(graph);
  inst.family = "dispatch";
  inst.coupling.b_in = Eigen::VectorXd();
  inst.coupling.b_eq = Eigen::VectorXd::Constant(1, b_total);
  inst.nodes.reserve(n);
  for (int i = 0; i < n; ++i) {
    NodeProblem node;
    node.id = i + 1;
    node.dim = 1;
    node.objective = SmoothConvexFn::quadratic(Eigen::MatrixXd::Constant(1, 1, 2.0 * costs[i].a),
                                               Eigen::VectorXd::Constant(1, costs[i].b), costs[i].c);
    const auto [lo, hi] = bounds[i];
    node.local_constraints.push_back(
        SmoothConvexFn::affine(Eigen::VectorXd::Constant(1, 1.0), -hi));  // x - u <= 0
    node.local_constraints.push_back(
        SmoothConvexFn::affine(Eigen::VectorXd::Constant(1, -1.0), lo));  // l - x <= 0
    node.A_in = Eigen::MatrixXd(0, 1);
    node.A_eq = Eigen::MatrixXd::Constant(1, 1, 1.0);
    inst.nodes.push_back(std::move(node));
  }
  return inst;
}

Eigen::Vector2d multi_resource_lower_bound(NodeRole role, double cap) {
  switch (role) {
    case NodeRole::renewable_gen:
      return {-cap, 0.0};
    case NodeRole::coal_gen:
      return {0.0, -cap};
    case NodeRole::consumer:
      return {0.0, 0.0};
  }
  return {0.0, 0.0};
}

ProblemInstance gen_multi_resource(const std::vector<double>& alpha, const std::vector<double>& beta,
                                   const std::vector<double>& demand, const std::vector<NodeRole>& roles,
                                   const std::vector<double>& caps, Graph graph, BarrierSpec barrier) {
  const int n = static_cast<int>(roles.size());
  if (n < 1) throw ValidationError("multi-resource generator needs at least one node");
  if (static_cast<int>(alpha.size()) != n || static_cast<int>(beta.size()) != n ||
      static_cast<int>(demand.size()) != n || static_cast<int>(caps.size()) != n ||
      graph.n() != n)
    throw ValidationError("multi-resource generator: parameter vector sizes disagree");

  bool has_renewable = false, has_coal = false;
  for (int i = 0; i < n; ++i) {
    if (!(alpha[i] > 0.0) || !(beta[i] > 0.0))
      throw ValidationError("multi-resource node " + std::to_string(i + 1) +
                            " needs alpha, beta > 0");
    if (roles[i] != NodeRole::consumer && !(caps[i] > 0.0))
      throw ValidationError("multi-resource generator node " + std::to_string(i + 1) +
                            " needs a positive cap");
    has_renewable = has_renewable || roles[i] == NodeRole::renewable_gen;
    has_coal = has_coal || roles[i] == NodeRole::coal_gen;
  }
  if (!has_renewable || !has_coal)
    throw ValidationError(
        "multi-resource instance needs at least one renewable and one coal generator; "
        "an all-consumer network has no strictly feasible allocation");

  ProblemInstance inst;
  inst.barrier = barrier;
  inst.graph = std::move(graph);
  inst.family = "multi_resource";
  inst.coupling.b_in = Eigen::VectorXd();
  inst.coupling.b_eq = Eigen::VectorXd::Zero(2);
  inst.nodes.reserve(n);
  for (int i = 0; i < n; ++i) {
    NodeProblem node;
    node.id = i + 1;
    node.dim = 2;
    const double a = alpha[i], b = beta[i], D = demand[i];
    Eigen::MatrixXd Q(2, 2);
    Q << 2.0 * a, 2.0 * a, 2.0 * a, 2.0 * (a + b);
    Eigen::VectorXd q(2);
    q << -2.0 * a * D, -2.0 * a * D;
    node.objective = SmoothConvexFn::quadratic(Q, q, a * D * D);
    const Eigen::Vector2d lb = multi_resource_lower_bound(roles[i], caps[i]);
    for (int k = 0; k < 2; ++k) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(2);
      grad[k] = -1.0;
      node.local_constraints.push_back(SmoothConvexFn::affine(grad, lb[k]));  // lb_k - x_k <= 0
    }
    node.A_in = Eigen::MatrixXd(0, 2);
    node.A_eq = Eigen::MatrixXd::Identity(2, 2);
    inst.nodes.push_back(std::move(node));
  }
  return inst;
}

}  // namespace drra
