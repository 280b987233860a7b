#include "drra/localsolve.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "drra/bench.hpp"
#include "drra/error.hpp"
#include "drra/oracle.hpp"
#include "test_util.hpp"

using namespace drra;

namespace {

NodeProblem quadratic_box_node(double a, double lin, double lo, double hi, int m_in, int m_eq) {
  NodeProblem node;
  node.id = 1;
  node.dim = 1;
  node.objective = SmoothConvexFn::quadratic(Eigen::MatrixXd::Constant(1, 1, 2.0 * a),
                                             Eigen::VectorXd::Constant(1, lin), 0.0);
  node.local_constraints.push_back(SmoothConvexFn::affine(Eigen::VectorXd::Constant(1, 1.0), -hi));
  node.local_constraints.push_back(SmoothConvexFn::affine(Eigen::VectorXd::Constant(1, -1.0), lo));
  node.A_in = Eigen::MatrixXd::Constant(m_in, 1, 1.0);
  node.A_eq = Eigen::MatrixXd::Constant(m_eq, 1, 1.0);
  return node;
}

BarrierSpec tiny_log_barrier() { return BarrierSpec{BarrierSpec::Kind::log, 1e-8}; }

}  // namespace

TEST(Phase1, EqualityPinsThePoint) {
  // Box [-1, 1] with equality x = 0.5: the manifold is a single point.
  const NodeProblem node = quadratic_box_node(1.0, 0.0, -1.0, 1.0, 0, 1);
  const auto program =
      make_single_program(node, tiny_log_barrier(), Eigen::VectorXd(), Eigen::VectorXd::Constant(1, 0.5));
  const Phase1Result res = phase1(program);
  ASSERT_EQ(res.status, SolveStatus::converged);
  EXPECT_NEAR(res.x(0), 0.5, 1e-12);
  EXPECT_LT(res.max_local_constraint, 0.0);
}

TEST(Phase1, DetectsInfeasibleShare) {
  const NodeProblem node = quadratic_box_node(1.0, 0.0, 0.0, 1.0, 0, 1);
  const auto program =
      make_single_program(node, tiny_log_barrier(), Eigen::VectorXd(), Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_EQ(phase1(program).status, SolveStatus::infeasible);
}

TEST(Phase1, TwoNodeNeighborhoodProgram) {
  const NodeProblem n1 = quadratic_box_node(1.0, 0.0, 0.0, 2.0, 0, 1);
  NodeProblem n2 = quadratic_box_node(2.0, 0.0, 0.0, 2.0, 0, 1);
  n2.id = 2;
  const auto program = make_joint_program({&n1, &n2}, tiny_log_barrier(), Eigen::VectorXd(),
                                          Eigen::VectorXd::Constant(1, 2.0));
  const Phase1Result res = phase1(program);
  ASSERT_EQ(res.status, SolveStatus::converged);
  EXPECT_LT(res.max_local_constraint, 0.0);
  EXPECT_NEAR(res.x.sum(), 2.0, 1e-10);
}

TEST(Phase1, InteriorFinderHandlesOffOriginBoxes) {
  // Box [2, 3] with no equality rows: the zero start is outside the box.
  NodeProblem node = quadratic_box_node(1.0, 0.0, 2.0, 3.0, 0, 0);
  node.A_in = Eigen::MatrixXd(0, 1);
  node.A_eq = Eigen::MatrixXd(0, 1);
  const auto program =
      make_single_program(node, tiny_log_barrier(), Eigen::VectorXd(), Eigen::VectorXd());
  const Phase1Result res = phase1(program);
  ASSERT_EQ(res.status, SolveStatus::converged);
  EXPECT_GT(res.x(0), 2.0);
  EXPECT_LT(res.x(0), 3.0);
}

TEST(Solve, EqualityPinnedQuadratic) {
  const NodeProblem node = quadratic_box_node(1.0, 0.0, -1.0, 1.0, 0, 1);
  const auto program =
      make_single_program(node, tiny_log_barrier(), Eigen::VectorXd(), Eigen::VectorXd::Constant(1, 0.5));
  const SubproblemResult res = solve(program);
  ASSERT_TRUE(res.converged());
  EXPECT_NEAR(res.x_star(0), 0.5, 1e-9);
  EXPECT_NEAR(res.value, 0.25, 1e-6);
  ASSERT_EQ(res.u_eq.size(), 1);
  EXPECT_NEAR(res.u_eq(0), -1.0, 1e-6);  // stationarity: F'(0.5) + u = 0
}

TEST(Solve, InactiveCouplingInequality) {
  const NodeProblem node = quadratic_box_node(1.0, 0.0, -1.0, 1.0, 1, 0);
  const auto program = make_single_program(node, tiny_log_barrier(),
                                           Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd());
  const SubproblemResult res = solve(program);
  ASSERT_TRUE(res.converged());
  EXPECT_NEAR(res.x_star(0), 0.0, 1e-6);
  ASSERT_EQ(res.u_in.size(), 1);
  EXPECT_NEAR(res.u_in(0), 0.0, 1e-9);
}

TEST(Solve, ActiveCouplingInequalityMultiplier) {
  // min (x-1)^2 over [-2, 2] with x <= 0.3: KKT gives u = 2(1 - 0.3) = 1.4.
  const NodeProblem node = quadratic_box_node(1.0, -2.0, -2.0, 2.0, 1, 0);
  const auto program = make_single_program(node, tiny_log_barrier(),
                                           Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd());
  const SubproblemResult res = solve(program);
  ASSERT_TRUE(res.converged());
  EXPECT_NEAR(res.x_star(0), 0.3, 1e-6);
  EXPECT_NEAR(res.u_in(0), 1.4, 1e-4);
  EXPECT_GE(res.u_in(0), -1e-10);
  EXPECT_LE(res.comp_slackness, 1e-10);
}

TEST(PrimalValue, EqualityPinsRegardlessOfObjective) {
  for (double a : {0.5, 1.0, 3.0}) {
    const NodeProblem node = quadratic_box_node(a, 0.7, 0.0, 2.0, 0, 1);
    const SubproblemResult res =
        primal_value(node, tiny_log_barrier(), Eigen::VectorXd(), Eigen::VectorXd::Constant(1, 1.0));
    ASSERT_TRUE(res.converged());
    EXPECT_NEAR(res.x_star(0), 1.0, 1e-10);
    // Bounds [0, 2] at x = 1 put both barrier terms at -log(1) = 0.
    EXPECT_NEAR(res.value, a + 0.7, 1e-10);
  }
}

TEST(PrimalValue, InfeasibleShareReportsInfiniteValue) {
  const NodeProblem node = quadratic_box_node(1.0, 0.0, 0.0, 2.0, 0, 1);
  const SubproblemResult res =
      primal_value(node, tiny_log_barrier(), Eigen::VectorXd(), Eigen::VectorXd::Constant(1, 3.0));
  EXPECT_EQ(res.status, SolveStatus::infeasible);
  EXPECT_TRUE(std::isinf(res.value));
}

TEST(SolveNeighborhood, SingleNodeMatchesPrimalValue) {
  const NodeProblem node = quadratic_box_node(1.5, 0.3, 0.0, 2.0, 0, 1);
  const Eigen::VectorXd y_eq = Eigen::VectorXd::Constant(1, 1.2);
  const SubproblemResult direct = primal_value(node, tiny_log_barrier(), Eigen::VectorXd(), y_eq);
  const NeighborhoodResult nbhd =
      solve_neighborhood({&node}, tiny_log_barrier(), Eigen::VectorXd(), y_eq);
  EXPECT_NEAR(nbhd.value, direct.value, 1e-10);
  EXPECT_NEAR(nbhd.x[0](0), direct.x_star(0), 1e-9);
}

TEST(SolveNeighborhood, EqualMarginalCostSplit) {
  // f1 = x^2, f2 = 2x^2, sum = 3: marginal costs 2x1 = 4x2 give (2, 1).
  const NodeProblem n1 = quadratic_box_node(1.0, 0.0, -10.0, 10.0, 0, 1);
  NodeProblem n2 = quadratic_box_node(2.0, 0.0, -10.0, 10.0, 0, 1);
  n2.id = 2;
  const NeighborhoodResult res = solve_neighborhood(
      {&n1, &n2}, tiny_log_barrier(), Eigen::VectorXd(), Eigen::VectorXd::Constant(1, 3.0));
  EXPECT_NEAR(res.x[0](0), 2.0, 1e-6);
  EXPECT_NEAR(res.x[1](0), 1.0, 1e-6);
  ASSERT_EQ(res.multiplier.size(), 1);
  EXPECT_NEAR(res.multiplier(0), -4.0, 1e-4);  // shared u' with grad F1(2) + u' = 0
}

TEST(SolveNeighborhood, BindingBoxesApproachedFromInside) {
  const NodeProblem n1 = quadratic_box_node(1.0, 0.0, 0.0, 1.5, 0, 1);
  NodeProblem n2 = quadratic_box_node(2.0, 0.0, 0.0, 1.5, 0, 1);
  n2.id = 2;
  const NeighborhoodResult res = solve_neighborhood(
      {&n1, &n2}, tiny_log_barrier(), Eigen::VectorXd(), Eigen::VectorXd::Constant(1, 3.0));
  EXPECT_NEAR(res.x[0](0), 1.5, 1e-3);
  EXPECT_NEAR(res.x[1](0), 1.5, 1e-3);
  EXPECT_LT(res.x[0](0), 1.5);  // strictly interior
  EXPECT_LT(res.x[1](0), 1.5);
}

TEST(SolveNeighborhood, InfeasibleSumThrowsWithDiagnostics) {
  const NodeProblem n1 = quadratic_box_node(1.0, 0.0, 0.0, 1.0, 0, 1);
  NodeProblem n2 = quadratic_box_node(1.0, 0.0, 0.0, 1.0, 0, 1);
  n2.id = 2;
  EXPECT_THROW(solve_neighborhood({&n1, &n2}, tiny_log_barrier(), Eigen::VectorXd(),
                                  Eigen::VectorXd::Constant(1, 5.0)),
               SolveError);
}

TEST(Solve, WarmStartReachesSameOptimum) {
  const NodeProblem node = quadratic_box_node(1.0, -2.0, -2.0, 2.0, 1, 0);
  const auto program = make_single_program(node, tiny_log_barrier(),
                                           Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd());
  const SubproblemResult cold = solve(program);
  const SubproblemResult warm = solve(program, {}, cold.x_star);
  ASSERT_TRUE(warm.converged());
  EXPECT_NEAR(warm.value, cold.value, 1e-9);
}

TEST(Solve, MatchesBruteForceGridOnRandomPrograms) {
  // 50 random 1-d/2-d programs, mixed barrier kinds, inequality and equality
  // rows; the grid evaluates the same objective on a mesh of step 1e-3.
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const testutil::GridProgram gp = testutil::make_grid_program(seed);
    const SubproblemResult res = solve(gp.prog);
    ASSERT_TRUE(res.converged()) << "seed " << seed;
    const double grid = gp.line ? testutil::grid_min_line(gp.prog, gp.sweep, 1e-3)
                                : testutil::grid_min_box(gp.prog, gp.lo, gp.hi, 1e-3);
    EXPECT_NEAR(res.value, grid, 1e-5) << "seed " << seed;

    // KKT invariants on every converged solve.
    EXPECT_TRUE(gp.prog.strictly_interior(res.x_star));
    const double grad_scale = 1.0 + gp.prog.objective_gradient(res.x_star).norm();
    EXPECT_LE(res.kkt_residual, 1e-8 * grad_scale) << "seed " << seed;
    if (res.u_in.size() > 0) {
      EXPECT_GE(res.u_in.minCoeff(), -1e-10);
      EXPECT_LE(res.comp_slackness, 1e-10);
    }
  }
}

TEST(Solve, MeritDecreasesWithinEachStage) {
  SolveOptions opts;
  opts.collect_merit = true;
  for (std::uint64_t seed : {3, 6, 9}) {
    const testutil::GridProgram gp = testutil::make_grid_program(seed);
    const SubproblemResult res = solve(gp.prog, opts);
    ASSERT_TRUE(res.converged());
    ASSERT_FALSE(res.merit_history.empty());
    for (std::size_t i = 1; i < res.merit_history.size(); ++i) {
      const auto& [stage_prev, merit_prev] = res.merit_history[i - 1];
      const auto& [stage_here, merit_here] = res.merit_history[i];
      if (stage_prev == stage_here)
        EXPECT_LE(merit_here, merit_prev + 1e-10 * (1.0 + std::abs(merit_prev)))
            << "seed " << seed << " stage " << stage_here;
    }
  }
}

TEST(Solve, MultiplierMatchesPrimalFunctionSlope) {
  // grad phi = -u*: finite differences of the solve value against the
  // returned multiplier, for an equality-pinned and an inequality-bound node.
  const NodeProblem pinned = quadratic_box_node(1.0, 0.0, -10.0, 10.0, 0, 1);
  const Eigen::VectorXd fd_eq =
      phi_grad_fd(pinned, tiny_log_barrier(), Eigen::VectorXd(), Eigen::VectorXd::Constant(1, 1.0));
  const SubproblemResult at_y =
      primal_value(pinned, tiny_log_barrier(), Eigen::VectorXd(), Eigen::VectorXd::Constant(1, 1.0));
  EXPECT_NEAR(fd_eq(0), 2.0, 2e-3);  // phi(y) ~ y^2
  EXPECT_NEAR(fd_eq(0), -at_y.u_eq(0), 1e-3 * (1.0 + std::abs(at_y.u_eq(0))));

  const NodeProblem bound = quadratic_box_node(1.0, -2.0, -2.0, 2.0, 1, 0);
  const Eigen::VectorXd y_in = Eigen::VectorXd::Constant(1, 0.3);
  const Eigen::VectorXd fd_in = phi_grad_fd(bound, tiny_log_barrier(), y_in, Eigen::VectorXd());
  const SubproblemResult at_yin = primal_value(bound, tiny_log_barrier(), y_in, Eigen::VectorXd());
  EXPECT_NEAR(fd_in(0), -at_yin.u_in(0), 1e-3 * (1.0 + std::abs(at_yin.u_in(0))));
}

TEST(Solve, StationarityHoldsAcrossRandomFeasibleShares) {
  Rng rng(21);
  const ProblemInstance inst = generate_instance("dispatch", 8, 5);
  for (int rep = 0; rep < 30; ++rep) {
    const auto& node = inst.nodes[rng.next_index(inst.nodes.size())];
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, rng.next_range(0.5, 4.5));
    const SubproblemResult res = primal_value(node, inst.barrier, Eigen::VectorXd(), y);
    ASSERT_TRUE(res.converged());
    const BarrierObjective F(node, inst.barrier);
    const Eigen::VectorXd stat =
        F.gradient(res.x_star) + node.A_eq.transpose() * res.u_eq;
    EXPECT_LE(stat.norm(), 1e-8 * (1.0 + F.gradient(res.x_star).norm()));
    EXPECT_LT(F.max_constraint(res.x_star), 0.0);
  }
}
