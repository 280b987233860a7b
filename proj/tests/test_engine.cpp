#include "drra/engine.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "drra/bench.hpp"
#include "drra/error.hpp"
#include "drra/oracle.hpp"
#include "test_util.hpp"

using namespace drra;

namespace {

ProblemInstance symmetric_dispatch(int n, double b_total, double c = 1e-6) {
  std::vector<DispatchCost> costs(n, DispatchCost{1.0, 0.0, 0.0});
  std::vector<std::pair<double, double>> bounds(n, {0.0, 2.0});
  return gen_economic_dispatch(costs, bounds, b_total, testutil::complete_graph(n),
                               BarrierSpec{BarrierSpec::Kind::log, c});
}

// Two nodes with f1 = x^2, f2 = 2x^2 on wide boxes, budget 3.
ProblemInstance two_node_asymmetric(double c = 1e-8) {
  return gen_economic_dispatch({{1.0, 0.0, 0.0}, {2.0, 0.0, 0.0}}, {{-10.0, 10.0}, {-10.0, 10.0}},
                               3.0, testutil::complete_graph(2),
                               BarrierSpec{BarrierSpec::Kind::log, c});
}

// Coupling-inequality instance: sum x_i <= budget with x_i >= 0, quadratic
// pull toward per-node targets. Exercises the Eq-12 style share updates.
ProblemInstance inequality_instance(int n, double budget) {
  ProblemInstance inst;
  inst.barrier = BarrierSpec{BarrierSpec::Kind::log, 1e-6};
  inst.graph = testutil::path_graph(n);
  inst.coupling.b_in = Eigen::VectorXd::Constant(1, budget);
  inst.coupling.b_eq = Eigen::VectorXd();
  for (int i = 0; i < n; ++i) {
    NodeProblem node;
    node.id = i + 1;
    node.dim = 1;
    const double target = 1.0 + i;
    node.objective = SmoothConvexFn::quadratic(Eigen::MatrixXd::Constant(1, 1, 2.0),
                                               Eigen::VectorXd::Constant(1, -2.0 * target),
                                               target * target);
    node.local_constraints.push_back(
        SmoothConvexFn::affine(Eigen::VectorXd::Constant(1, -1.0), 0.0));  // x >= 0
    node.A_in = Eigen::MatrixXd::Constant(1, 1, 1.0);
    node.A_eq = Eigen::MatrixXd(0, 1);
    inst.nodes.push_back(std::move(node));
  }
  return inst;
}

}  // namespace

TEST(InitEvenSplit, SymmetricDispatchSplitsEvenly) {
  const ProblemInstance inst = symmetric_dispatch(2, 2.0);
  const auto y = init_even_split(inst);
  ASSERT_EQ(y.size(), 2u);
  EXPECT_DOUBLE_EQ(y[0].y_eq(0), 1.0);
  EXPECT_DOUBLE_EQ(y[1].y_eq(0), 1.0);
}

TEST(InitEvenSplit, LowerBoundShiftedSplit) {
  const ProblemInstance inst = gen_economic_dispatch(
      {{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}},
      {{0.0, 9.0}, {1.0, 9.0}, {2.0, 9.0}}, 6.0, testutil::path_graph(3));
  const auto y = init_even_split(inst);
  EXPECT_NEAR(y[0].y_eq(0), 1.0, 1e-12);
  EXPECT_NEAR(y[1].y_eq(0), 2.0, 1e-12);
  EXPECT_NEAR(y[2].y_eq(0), 3.0, 1e-12);
}

TEST(InitEvenSplit, MultiResourceSharesTelescopeToZero) {
  const ProblemInstance inst = generate_instance("multi_resource", 6, 3);
  const auto y = init_even_split(inst);
  Eigen::Vector2d total = Eigen::Vector2d::Zero();
  for (const auto& share : y) total += share.y_eq;
  EXPECT_LE(total.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(InitEvenSplit, InfeasibleSplitExplainsItself) {
  // Node 1's box [0, 0.5] cannot take the even share of 1.
  const ProblemInstance inst = gen_economic_dispatch(
      {{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}}, {{0.0, 0.5}, {0.0, 9.0}}, 2.0,
      testutil::path_graph(2));
  EXPECT_THROW(init_even_split(inst), ValidationError);
}

TEST(InitFromPoint, SharesAreCouplingImages) {
  const ProblemInstance inst = symmetric_dispatch(2, 2.0);
  const auto y = init_from_point(inst, {Eigen::VectorXd::Constant(1, 0.5),
                                        Eigen::VectorXd::Constant(1, 1.5)});
  EXPECT_NEAR(y[0].y_eq(0), 0.5, 1e-12);
  EXPECT_NEAR(y[1].y_eq(0), 1.5, 1e-12);
}

TEST(InitFromPoint, RejectsCouplingViolation) {
  const ProblemInstance inst = symmetric_dispatch(2, 2.0);
  EXPECT_THROW(init_from_point(inst, {Eigen::VectorXd::Constant(1, 0.5),
                                      Eigen::VectorXd::Constant(1, 1.0)}),
               ValidationError);
}

TEST(InitFromPoint, RejectsInequalityCoupling) {
  const ProblemInstance inst = inequality_instance(3, 4.0);
  EXPECT_THROW(init_from_point(inst, {Eigen::VectorXd::Constant(1, 1.0),
                                      Eigen::VectorXd::Constant(1, 1.0),
                                      Eigen::VectorXd::Constant(1, 1.0)}),
               ValidationError);
}

TEST(InitX, EqualityPinnedStart) {
  const ProblemInstance inst = symmetric_dispatch(2, 2.0);
  const EngineState state = init_x(inst, init_even_split(inst));
  EXPECT_NEAR(state.x[0](0), 1.0, 1e-10);
  EXPECT_NEAR(state.x[1](0), 1.0, 1e-10);
  // Bounds [0, 2] at x = 1 zero out the log barriers, so F_i(1) = f_i(1) = 1.
  EXPECT_NEAR(state.sum_F(), 2.0, 1e-9);
  EXPECT_LE((state.share_total() - inst.coupling.stacked_b()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_TRUE(audit_feasibility(state).all_pass());
}

TEST(InitX, AbortsOnInfeasibleShare) {
  const ProblemInstance inst = symmetric_dispatch(2, 2.0);
  std::vector<RhsShare> y(2);
  y[0].y_in = Eigen::VectorXd();
  y[0].y_eq = Eigen::VectorXd::Constant(1, 5.0);  // outside the [0,2] box
  y[1].y_in = Eigen::VectorXd();
  y[1].y_eq = Eigen::VectorXd::Constant(1, -3.0);
  EXPECT_THROW(init_x(inst, y), SolveError);
}

TEST(Step, CompleteGraphReachesOptimumInOneStep) {
  const ProblemInstance inst = two_node_asymmetric();
  EngineState state = init_x(inst, init_even_split(inst));
  const OracleSolution oracle = solve_centralized_barrier(inst, inst.barrier.c);
  step(state, UpdateSet{{1}});
  EXPECT_NEAR(state.sum_F(), oracle.value, 1e-6 * (1.0 + std::abs(oracle.value)));
  EXPECT_NEAR(state.x[0](0), 2.0, 1e-6);
  EXPECT_NEAR(state.x[1](0), 1.0, 1e-6);
}

TEST(Step, SymmetricStateIsAFixedPoint) {
  const ProblemInstance inst = symmetric_dispatch(4, 4.0);
  EngineState state = init_x(inst, init_even_split(inst));
  const auto x_before = state.x;
  const auto y_before = state.y;
  step(state, UpdateSet{{2}});
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(state.x[i](0), x_before[i](0), 1e-8);
    EXPECT_NEAR(state.y[i].y_eq(0), y_before[i].y_eq(0), 1e-8);
  }
}

TEST(Step, RejectsConflictingUpdateSet) {
  const ProblemInstance inst = symmetric_dispatch(3, 3.0);
  ProblemInstance path = inst;
  path.graph = testutil::path_graph(3);
  EngineState state = init_x(path, init_even_split(path));
  EXPECT_THROW(step(state, UpdateSet{{1, 3}}), ValidationError);
}

TEST(Step, NeighborhoodShareSumIsPreserved) {
  const ProblemInstance inst = inequality_instance(4, 5.0);
  ASSERT_TRUE(validate_instance(inst).all_pass());
  EngineState state = init_x(inst, init_even_split(inst));
  const Eigen::VectorXd before = state.share_total();
  step(state, UpdateSet{{2}});  // closed neighborhood {1, 2, 3}
  const Eigen::VectorXd after = state.share_total();
  EXPECT_LE((after - before).cwiseAbs().maxCoeff(), 1e-13);
  // Untouched node keeps its share bitwise.
  EXPECT_EQ(state.y[3].y_in(0), inst.coupling.b_in(0) / 4.0);
}

TEST(Step, InequrySlackStaysNonnegative) {
  const ProblemInstance inst = inequality_instance(5, 6.0);
  EngineState state = init_x(inst, init_even_split(inst));
  Rng rng(3);
  for (int k = 0; k < 60; ++k) {
    step(state, voting_select(inst.graph, rng));
    for (int i = 0; i < inst.n(); ++i) {
      const double slack = state.y[i].y_in(0) - (inst.nodes[i].A_in * state.x[i])(0);
      EXPECT_GE(slack, -1e-10) << "node " << i + 1 << " at k=" << state.k;
    }
  }
}

TEST(Step, LeaderOrderDoesNotMatter) {
  ProblemInstance inst = generate_instance("dispatch", 5, 11);
  inst.graph = testutil::path_graph(5);
  ASSERT_TRUE(verify_nonconflict(inst.graph, UpdateSet{{1, 5}}));
  const EngineState base = init_x(inst, init_even_split(inst));

  EngineState forward = base;
  apply_leader(forward, 1);
  apply_leader(forward, 5);
  EngineState backward = base;
  apply_leader(backward, 5);
  apply_leader(backward, 1);

  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(forward.x[i](0), backward.x[i](0));
    EXPECT_EQ(forward.y[i].y_eq(0), backward.y[i].y_eq(0));
    EXPECT_EQ(forward.phi[i], backward.phi[i]);
  }
}

TEST(Step, CachedMultipliersAgreeWithPerNodeSolves) {
  ProblemInstance inst = generate_instance("dispatch", 6, 2);
  inst.graph = testutil::path_graph(6);
  EngineState state = init_x(inst, init_even_split(inst));
  step(state, UpdateSet{{3}});
  for (int j : closed_neighborhood(inst.graph, 3)) {
    const SubproblemResult res = primal_value(inst.nodes[j - 1], inst.barrier,
                                              state.y[j - 1].y_in, state.y[j - 1].y_eq);
    ASSERT_TRUE(res.converged());
    EXPECT_LE((res.multiplier() - state.u[j - 1]).cwiseAbs().maxCoeff(), 1e-6)
        << "node " << j;
  }
}

TEST(Run, SingleNodeIsImmediatelyOptimal) {
  const ProblemInstance inst = symmetric_dispatch(1, 1.0);
  RunOptions opts;
  opts.max_iters = 5;
  const RunResult result = run(inst, opts);
  ASSERT_GE(result.trace.size(), 1u);
  EXPECT_NEAR(result.trace.front().sum_phi, result.trace.back().sum_phi, 1e-9);
  EXPECT_LE(residual(result.state, 1), 1e-8);
}

TEST(Run, MonotoneDescentAndIdentity) {
  ProblemInstance inst = generate_instance("dispatch", 10, 4);
  RunOptions opts;
  opts.max_iters = 300;
  opts.seed = 9;
  const RunResult result = run(inst, opts);
  for (std::size_t k = 1; k < result.trace.size(); ++k)
    EXPECT_LE(result.trace[k].sum_phi, result.trace[k - 1].sum_phi + 1e-8) << "k=" << k;
  for (const auto& rec : result.trace) {
    EXPECT_NEAR(rec.sum_F, rec.sum_phi, 1e-8 * (1.0 + std::abs(rec.sum_phi)));
    EXPECT_LE(rec.feas_eq_err, 1e-8);
  }
  EXPECT_TRUE(audit_feasibility(result.state).all_pass());
}

TEST(Run, PerIterateAuditsPass) {
  ProblemInstance inst = generate_instance("multi_resource", 6, 5);
  EngineState state = init_x(inst, init_even_split(inst));
  Rng rng(17);
  for (int k = 0; k < 80; ++k) {
    step(state, voting_select(inst.graph, rng));
    const AuditReport report = audit_feasibility(state);
    ASSERT_TRUE(report.all_pass()) << "k=" << state.k << "\n" << report.to_string();
  }
}

TEST(Run, DeterministicUnderSeed) {
  ProblemInstance inst = generate_instance("dispatch", 6, 8);
  RunOptions opts;
  opts.max_iters = 120;
  opts.seed = 5;
  const RunResult a = run(inst, opts);
  const RunResult b = run(inst, opts);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    EXPECT_EQ(a.trace[k].sum_phi, b.trace[k].sum_phi);
    EXPECT_EQ(a.trace[k].update_set.leaders, b.trace[k].update_set.leaders);
  }
  for (int i = 0; i < inst.n(); ++i) EXPECT_EQ(a.state.x[i](0), b.state.x[i](0));
}

TEST(Run, InequalityCouplingConvergesToOracle) {
  const ProblemInstance inst = inequality_instance(3, 4.0);
  ASSERT_TRUE(validate_instance(inst).all_pass());
  RunOptions opts;
  opts.max_iters = 400;
  opts.seed = 1;
  const RunResult result = run(inst, opts);
  const OracleSolution oracle = solve_centralized_barrier(inst, inst.barrier.c);
  EXPECT_NEAR(result.trace.back().sum_phi, oracle.value, 1e-6 * (1.0 + std::abs(oracle.value)));
  EXPECT_TRUE(audit_feasibility(result.state).all_pass());
}

TEST(Residual, LeaderJustOptimizedHasZeroResidual) {
  ProblemInstance inst = generate_instance("dispatch", 6, 12);
  inst.graph = testutil::path_graph(6);
  EngineState state = init_x(inst, init_even_split(inst));
  step(state, UpdateSet{{4}});
  EXPECT_LE(residual(state, 4), 1e-8);
}

TEST(Residual, SymmetricFixedPointHasZeroResidualEverywhere) {
  const ProblemInstance inst = symmetric_dispatch(4, 4.0);
  const EngineState state = init_x(inst, init_even_split(inst));
  for (int i = 1; i <= 4; ++i) EXPECT_LE(residual(state, i), 1e-8);
}

TEST(Residual, VanishesAtConvergence) {
  ProblemInstance inst = generate_instance("dispatch", 5, 6);
  RunOptions opts;
  opts.max_iters = 2000;
  opts.seed = 2;
  opts.stop.kind = StopRule::Kind::residual;
  opts.stop.tol = 1e-8;
  opts.residual_every = 25;
  const RunResult result = run(inst, opts);
  EXPECT_TRUE(result.stopped_early);
  for (int i = 1; i <= inst.n(); ++i) EXPECT_LE(residual(result.state, i), 1e-8);
}

TEST(Audit, DetectsHandCorruptedState) {
  ProblemInstance inst = generate_instance("dispatch", 5, 9);
  EngineState state = init_x(inst, init_even_split(inst));
  ASSERT_TRUE(audit_feasibility(state).all_pass());

  EngineState corrupted_y = state;
  corrupted_y.y[0].y_eq(0) += 1.0;
  const AuditReport conservation = audit_feasibility(corrupted_y);
  EXPECT_FALSE(conservation.all_pass());
  for (const auto& c : conservation.checks)
    if (c.name == "conservation") EXPECT_FALSE(c.pass);

  EngineState corrupted_x = state;
  corrupted_x.x[0](0) = 5.0;  // exactly on the box face g = 0
  const AuditReport interior = audit_feasibility(corrupted_x);
  EXPECT_FALSE(interior.all_pass());
  for (const auto& c : interior.checks)
    if (c.name == "strict_interiority") EXPECT_FALSE(c.pass);
}
