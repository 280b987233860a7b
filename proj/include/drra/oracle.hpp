#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "drra/engine.hpp"
#include "drra/localsolve.hpp"
#include "drra/model.hpp"

namespace drra {

struct OracleSolution {
  enum class ProblemKind { barrier, original };
  ProblemKind kind = ProblemKind::barrier;
  std::vector<Eigen::VectorXd> x_star;
  double value = 0.0;       // F* for barrier, f* for original
  double barrier_c = 0.0;   // c used for the (final) barrier solve
  // (c, sum f) pairs along the vanishing-c schedule, original kind only.
  std::vector<std::pair<double, double>> homotopy;
  bool homotopy_monotone = true;
  double kkt_residual = 0.0;
};

// F*: full coupled barrier problem solved as one stacked program.
OracleSolution solve_centralized_barrier(const ProblemInstance& inst, double c,
                                         const SolveOptions& opts = {},
                                         const std::optional<Eigen::VectorXd>& warm = std::nullopt);

// f*: barrier solves along c in {1e-4, 1e-6, 1e-8}, each warm-started from
// the previous, reporting sum f_i at the smallest c.
OracleSolution solve_centralized_original(const ProblemInstance& inst,
                                          const SolveOptions& opts = {});

// y* built from a barrier solution: the inequality budget surplus is spread
// equally, equality shares are taken exactly, so shares sum to b and every
// x_i* stays feasible for its own share.
std::vector<RhsShare> optimal_shares(const ProblemInstance& inst, const OracleSolution& sol);

// Central finite differences of phi_i through the subproblem solver;
// independent cross-check of the multiplier identity grad phi = -u*.
Eigen::VectorXd phi_grad_fd(const NodeProblem& node, const BarrierSpec& barrier,
                            const Eigen::VectorXd& y_in, const Eigen::VectorXd& y_eq,
                            double h = 0.0, const SolveOptions& opts = {});

}  // namespace drra
