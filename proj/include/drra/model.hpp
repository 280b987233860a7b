#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "drra/network.hpp"

namespace drra {

// Convex twice-differentiable function on R^d, restricted to the two shapes
// the experiment families need: quadratic 0.5 x'Qx + q'x + r with Q PSD, or
// affine a'x + beta.
struct SmoothConvexFn {
  enum class Kind { quadratic, affine };

  Kind kind = Kind::affine;
  int dim = 0;
  Eigen::MatrixXd Q;  // quadratic only
  Eigen::VectorXd q;  // quadratic linear term, or the affine gradient a
  double r = 0.0;     // constant term (beta for affine)

  static SmoothConvexFn quadratic(Eigen::MatrixXd Q, Eigen::VectorXd q, double r);
  static SmoothConvexFn affine(Eigen::VectorXd a, double beta);

  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const;

  // Symmetry + eigenvalue test for quadratics, tolerance 1e-10 relative.
  bool is_psd() const;
};

struct BarrierSpec {
  enum class Kind { log, inverse };
  Kind kind = Kind::log;
  double c = 1e-6;  // fixed barrier weight, > 0
};

// B(g) for a single strictly negative constraint value. Throws DomainError
// when g_value >= 0 (the iterate left the strict interior).
double barrier_eval(double g_value, const BarrierSpec& spec);

// One agent: objective f_i, local constraints g_i^j(x) <= 0, coupling rows.
struct NodeProblem {
  int id = 0;  // 1-based
  int dim = 0;
  SmoothConvexFn objective;
  std::vector<SmoothConvexFn> local_constraints;
  Eigen::MatrixXd A_in;  // m_in x dim
  Eigen::MatrixXd A_eq;  // m_eq x dim

  // Stacked [A_in; A_eq].
  Eigen::MatrixXd stacked_A() const;
};

struct CouplingSpec {
  Eigen::VectorXd b_in;
  Eigen::VectorXd b_eq;
  int m_in() const { return static_cast<int>(b_in.size()); }
  int m_eq() const { return static_cast<int>(b_eq.size()); }
  int m() const { return m_in() + m_eq(); }
  // Stacked [b_in; b_eq].
  Eigen::VectorXd stacked_b() const;
};

struct ProblemInstance {
  std::vector<NodeProblem> nodes;
  CouplingSpec coupling;
  Graph graph;
  BarrierSpec barrier;
  bool assume_compact = false;
  std::string family;  // generator tag: "dispatch", "multi_resource", or empty
  std::uint64_t gen_seed = 0;

  int n() const { return static_cast<int>(nodes.size()); }
};

// Barrier-transformed objective F_i(x) = f_i(x) + c * sum_j B(g_i^j(x)),
// defined on the strict interior {x : g_i^j(x) < 0 for all j}. Holds copies
// of the node's functions, so it stays valid independently of the instance.
class BarrierObjective {
 public:
  BarrierObjective(const NodeProblem& node, const BarrierSpec& barrier);

  int dim() const { return dim_; }
  bool strictly_interior(const Eigen::VectorXd& x) const;
  // Worst (largest) constraint value at x; negative iff strictly interior.
  double max_constraint(const Eigen::VectorXd& x) const;

  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const;

  // f_i alone, without barrier terms.
  double base_value(const Eigen::VectorXd& x) const { return objective_.value(x); }

  const std::vector<SmoothConvexFn>& constraints() const { return constraints_; }
  const BarrierSpec& barrier() const { return barrier_; }

 private:
  int dim_;
  SmoothConvexFn objective_;
  std::vector<SmoothConvexFn> constraints_;
  BarrierSpec barrier_;
};

inline BarrierObjective barrier_objective(const NodeProblem& node, const BarrierSpec& barrier) {
  return BarrierObjective(node, barrier);
}

struct ValidationCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ValidationReport {
  enum class Compactness { certified, asserted, failed };
  std::vector<ValidationCheck> checks;
  Compactness compactness = Compactness::failed;

  bool all_pass() const;
  std::string to_string() const;
};

// Checks per-node rank, graph connectivity, dimension consistency, convexity
// of the quadratic pieces, compactness patterns, and Slater-point existence
// via a phase-I solve of the full coupled problem.
ValidationReport validate_instance(const ProblemInstance& inst);

// Tightest per-coordinate lower/upper bounds recoverable from affine local
// constraints, or nullopt when some coordinate has none.
std::optional<Eigen::VectorXd> coordinate_lower_bounds(const NodeProblem& node);
std::optional<Eigen::VectorXd> coordinate_upper_bounds(const NodeProblem& node);

// Economic dispatch family: d_i = 1, f_i(x) = a x^2 + b x + c, box local
// constraints, one equality coupling row sum_i x_i = b_total.
struct DispatchCost {
  double a = 1.0;  // > 0
  double b = 0.0;
  double c = 0.0;
};

ProblemInstance gen_economic_dispatch(const std::vector<DispatchCost>& costs,
                                      const std::vector<std::pair<double, double>>& bounds,
                                      double b_total, Graph graph,
                                      BarrierSpec barrier = BarrierSpec{});

// Multi-resource family: d_i = 2 (renewable, coal), user disutility
// f_i = alpha (x1 + x2 - D)^2 + beta x2^2, lower-bound local constraints by
// role, per-node identity equality rows with zero-sum coupling.
enum class NodeRole { renewable_gen, coal_gen, consumer };

ProblemInstance gen_multi_resource(const std::vector<double>& alpha, const std::vector<double>& beta,
                                   const std::vector<double>& demand, const std::vector<NodeRole>& roles,
                                   const std::vector<double>& caps, Graph graph,
                                   BarrierSpec barrier = BarrierSpec{});

// Role-dependent lower-bound corner of the local constraint set.
Eigen::Vector2d multi_resource_lower_bound(NodeRole role, double cap);

}  // namespace drra
