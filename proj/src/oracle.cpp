#include "drra/oracle.hpp"

#include <cmath>

#include "drra/error.hpp"

namespace drra {

namespace {

ConstrainedProgram full_program(const ProblemInstance& inst, double c) {
  BarrierSpec barrier = inst.barrier;
  barrier.c = c;
  std::vector<const NodeProblem*> all;
  all.reserve(inst.nodes.size());
  for (const auto& node : inst.nodes) all.push_back(&node);
  return make_joint_program(all, barrier, inst.coupling.b_in, inst.coupling.b_eq);
}

std::vector<Eigen::VectorXd> split_blocks(const ProblemInstance& inst, const Eigen::VectorXd& x) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(inst.nodes.size());
  int off = 0;
  for (const auto& node : inst.nodes) {
    out.push_back(x.segment(off, node.dim));
    off += node.dim;
  }
  return out;
}

}  // namespace

OracleSolution solve_centralized_barrier(const ProblemInstance& inst, double c,
                                         const SolveOptions& opts,
                                         const std::optional<Eigen::VectorXd>& warm) {
  const ConstrainedProgram program = full_program(inst, c);
  const SubproblemResult res = solve(program, opts, warm);
  if (!res.converged())
    throw SolveError(std::string("centralized barrier solve failed: ") + to_string(res.status) +
                     " (a validated instance should always be solvable)");
  OracleSolution sol;
  sol.kind = OracleSolution::ProblemKind::barrier;
  sol.x_star = split_blocks(inst, res.x_star);
  sol.value = res.value;
  sol.barrier_c = c;
  sol.kkt_residual = res.kkt_residual;
  return sol;
}

OracleSolution solve_centralized_original(const ProblemInstance& inst, const SolveOptions& opts) {
  OracleSolution sol;
  sol.kind = OracleSolution::ProblemKind::original;
  std::optional<Eigen::VectorXd> warm;
  const double schedule[] = {1e-4, 1e-6, 1e-8};
  for (double c : schedule) {
    const ConstrainedProgram program = full_program(inst, c);
    const SubproblemResult res = solve(program, opts, warm);
    if (!res.converged())
      throw SolveError(std::string("centralized homotopy solve failed at c = ") +
                       std::to_string(c) + ": " + to_string(res.status));
    double sum_f = 0.0;
    int off = 0;
    for (const auto& node : inst.nodes) {
      sum_f += node.objective.value(res.x_star.segment(off, node.dim));
      off += node.dim;
    }
    sol.homotopy.emplace_back(c, sum_f);
    sol.x_star = split_blocks(inst, res.x_star);
    sol.value = sum_f;
    sol.barrier_c = c;
    sol.kkt_residual = res.kkt_residual;
    warm = res.x_star;
  }
  // The barrier bias should shrink with c; recorded, not enforced.
  for (std::size_t i = 1; i < sol.homotopy.size(); ++i) {
    const double gap_prev = std::abs(sol.homotopy[i - 1].second - sol.value);
    const double gap_here = std::abs(sol.homotopy[i].second - sol.value);
    if (gap_here > gap_prev + 1e-8) sol.homotopy_monotone = false;
  }
  return sol;
}

std::vector<RhsShare> optimal_shares(const ProblemInstance& inst, const OracleSolution& sol) {
  const int n = inst.n();
  if (static_cast<int>(sol.x_star.size()) != n)
    throw ValidationError("optimal_shares: solution does not match the instance");
  std::vector<RhsShare> y(n);
  Eigen::VectorXd in_used = Eigen::VectorXd::Zero(inst.coupling.m_in());
  for (int i = 0; i < n; ++i) {
    if (inst.coupling.m_in() > 0) in_used += inst.nodes[i].A_in * sol.x_star[i];
  }
  const Eigen::VectorXd in_spread =
      inst.coupling.m_in() > 0 ? Eigen::VectorXd((inst.coupling.b_in - in_used) / n)
                               : Eigen::VectorXd();
  for (int i = 0; i < n; ++i) {
    y[i].y_in = inst.coupling.m_in() > 0
                    ? Eigen::VectorXd(inst.nodes[i].A_in * sol.x_star[i] + in_spread)
                    : Eigen::VectorXd(0);
    y[i].y_eq = inst.nodes[i].A_eq * sol.x_star[i];
  }
  return y;
}

Eigen::VectorXd phi_grad_fd(const NodeProblem& node, const BarrierSpec& barrier,
                            const Eigen::VectorXd& y_in, const Eigen::VectorXd& y_eq,
                            double h, const SolveOptions& opts) {
  const int m_in = static_cast<int>(y_in.size());
  const int m = m_in + static_cast<int>(y_eq.size());
  Eigen::VectorXd y(m);
  y << y_in, y_eq;
  if (h <= 0.0) h = 1e-5 * (1.0 + y.norm());

  Eigen::VectorXd grad(m);
  for (int j = 0; j < m; ++j) {
    Eigen::VectorXd yp = y, ym = y;
    yp(j) += h;
    ym(j) -= h;
    const SubproblemResult plus =
        primal_value(node, barrier, yp.head(m_in), yp.tail(m - m_in), opts);
    const SubproblemResult minus =
        primal_value(node, barrier, ym.head(m_in), ym.tail(m - m_in), opts);
    if (!plus.converged() || !minus.converged())
      throw SolveError("phi_grad_fd: perturbed subproblem infeasible at coordinate " +
                       std::to_string(j) + "; retry with a smaller step h");
    grad(j) = (plus.value - minus.value) / (2.0 * h);
  }
  return grad;
}

}  // namespace drra
