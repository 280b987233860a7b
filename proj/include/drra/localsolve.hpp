#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "drra/model.hpp"

namespace drra {

// Linearly-constrained barrier program over a stacked variable: a block-sum
// of barrier objectives subject to shared linear rows
//   ineq_A x <= ineq_rhs,  eq_A x = eq_rhs,
// with every block restricted to the strict interior of its own local
// constraints. The equality rows must have full row rank.
struct ConstrainedProgram {
  std::vector<BarrierObjective> blocks;
  std::vector<int> offsets;  // start of each block in the stacked vector
  Eigen::MatrixXd ineq_A;
  Eigen::VectorXd ineq_rhs;
  Eigen::MatrixXd eq_A;
  Eigen::VectorXd eq_rhs;

  int dim() const;
  int m_in() const { return static_cast<int>(ineq_rhs.size()); }
  int m_eq() const { return static_cast<int>(eq_rhs.size()); }

  bool strictly_interior(const Eigen::VectorXd& x) const;
  double objective(const Eigen::VectorXd& x) const;
  Eigen::VectorXd objective_gradient(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd objective_hessian(const Eigen::VectorXd& x) const;
  Eigen::VectorXd block(const Eigen::VectorXd& x, int b) const;
};

// Single-node program for phi_i(y): rhs taken from the node's share.
ConstrainedProgram make_single_program(const NodeProblem& node, const BarrierSpec& barrier,
                                       const Eigen::VectorXd& y_in, const Eigen::VectorXd& y_eq);

// Joint program over several nodes with summed right-hand sides.
ConstrainedProgram make_joint_program(const std::vector<const NodeProblem*>& nodes,
                                      const BarrierSpec& barrier, const Eigen::VectorXd& rhs_in_sum,
                                      const Eigen::VectorXd& rhs_eq_sum);

struct SolveOptions {
  double kkt_tol = 1e-9;    // reduced-gradient tolerance at the final stage
  double gap_tol = 1e-10;   // m_in * mu driven below this
  double mu_shrink = 0.2;   // geometric shrink factor of the path parameter
  double armijo_shrink = 0.5;
  double armijo_slope = 1e-4;
  double boundary_frac = 0.99;  // fraction-to-boundary coefficient
  int newton_budget = 200;      // Newton iterations per mu stage
  bool collect_merit = false;   // record (stage, merit) pairs per iteration
};

enum class SolveStatus { converged, infeasible, max_iters };

const char* to_string(SolveStatus s);

struct SubproblemResult {
  SolveStatus status = SolveStatus::infeasible;
  Eigen::VectorXd x_star;
  double value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd u_in;   // >= 0
  Eigen::VectorXd u_eq;   // free sign
  double kkt_residual = std::numeric_limits<double>::infinity();
  double comp_slackness = 0.0;  // max_j |u_in_j * s_j|
  int newton_iters = 0;
  std::vector<std::pair<int, double>> merit_history;  // (stage, merit) when collected

  bool converged() const { return status == SolveStatus::converged; }
  // Stacked [u_in; u_eq].
  Eigen::VectorXd multiplier() const;
};

struct Phase1Result {
  SolveStatus status = SolveStatus::infeasible;
  Eigen::VectorXd x;
  double max_local_constraint = std::numeric_limits<double>::infinity();
  double min_ineq_slack = -std::numeric_limits<double>::infinity();
};

// Finds a point strictly interior to all local constraints, on the equality
// manifold, with positive slack on every inequality row, or reports
// infeasibility. Works by minimizing the worst constraint margin along a
// barrier path.
Phase1Result phase1(const ConstrainedProgram& program, const SolveOptions& opts = {});

// Primal path-following solve. Local-constraint barriers keep their fixed
// weight c; inequality rows get an auxiliary -mu*log(slack) barrier with mu
// shrunk geometrically until m_in*mu <= gap_tol. Equality rows are kept
// exact through a null-space parametrization of the Newton step. A strictly
// feasible warm start skips phase 1.
SubproblemResult solve(const ConstrainedProgram& program, const SolveOptions& opts = {},
                       const std::optional<Eigen::VectorXd>& warm_start = std::nullopt);

// phi_i(y): optimal value of the single-node program. Status `infeasible`
// encodes phi_i(y) = +inf.
SubproblemResult primal_value(const NodeProblem& node, const BarrierSpec& barrier,
                              const Eigen::VectorXd& y_in, const Eigen::VectorXd& y_eq,
                              const SolveOptions& opts = {},
                              const std::optional<Eigen::VectorXd>& warm_start = std::nullopt);

struct NeighborhoodResult {
  std::vector<Eigen::VectorXd> x;  // one minimizer per node, input order
  Eigen::VectorXd multiplier;      // shared coupling-row multiplier [u_in; u_eq]
  double value = 0.0;              // optimal sum of barrier objectives
  SubproblemResult raw;
};

// Joint solve over a closed neighborhood with summed rhs. Infeasibility here
// contradicts the running-state invariants, so it throws SolveError with
// diagnostics instead of returning a status.
NeighborhoodResult solve_neighborhood(const std::vector<const NodeProblem*>& nodes,
                                      const BarrierSpec& barrier, const Eigen::VectorXd& rhs_in_sum,
                                      const Eigen::VectorXd& rhs_eq_sum, const SolveOptions& opts = {},
                                      const std::optional<Eigen::VectorXd>& warm_start = std::nullopt);

}  // namespace drra
