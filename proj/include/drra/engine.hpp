#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drra/localsolve.hpp"
#include "drra/model.hpp"
#include "drra/network.hpp"

namespace drra {

// One agent's slice of the coupling budget, y_i = (y_in, y_eq).
struct RhsShare {
  Eigen::VectorXd y_in;
  Eigen::VectorXd y_eq;

  Eigen::VectorXd stacked() const;
};

// Full algorithm state. Invariants: shares sum to b, every x_i is optimal
// for its own share (so phi_i = F_i(x_i)), and every x_i is strictly
// interior to its local constraints.
struct EngineState {
  const ProblemInstance* inst = nullptr;
  long k = 0;
  std::vector<Eigen::VectorXd> x;
  std::vector<RhsShare> y;
  std::vector<double> phi;              // cached phi_i(y_i)
  std::vector<Eigen::VectorXd> u;       // cached multipliers u_i*(y_i)

  double sum_phi() const;
  double sum_f() const;
  double sum_F() const;
  // Componentwise sum of all shares, stacked [in; eq].
  Eigen::VectorXd share_total() const;
};

struct IterationRecord {
  long k = 0;
  UpdateSet update_set;
  double sum_f = 0.0;
  double sum_F = 0.0;
  double sum_phi = 0.0;
  double feas_in_err = 0.0;  // max positive coupling-inequality violation
  double feas_eq_err = 0.0;  // l2 norm of the coupling-equality residual
  std::optional<double> residual_sum;
  double wallclock_ms = 0.0;
};

// y_i^0 by pattern: the lower-bound-shifted split for dispatch instances,
// the scaled centered-lower-bound split for multi-resource instances, and a
// plain b/n split otherwise. Every share is verified strictly feasible;
// failure raises ValidationError directing the caller to init_from_point or
// explicit shares.
std::vector<RhsShare> init_even_split(const ProblemInstance& inst);

// y_i^0 = A_i x_i from a feasible point of the barrier problem. Only valid
// without coupling inequality rows.
std::vector<RhsShare> init_from_point(const ProblemInstance& inst,
                                      const std::vector<Eigen::VectorXd>& x_tilde);

// Solves every node's subproblem at its initial share and caches minimizers,
// primal values, and multipliers.
EngineState init_x(const ProblemInstance& inst, const std::vector<RhsShare>& y0,
                   const SolveOptions& solver = {});

// One leader's reallocation: joint neighborhood solve at the summed rhs,
// then the conservation-exact share update. Exposed separately so tests can
// drive leaders in any order.
void apply_leader(EngineState& state, int leader, const SolveOptions& solver = {});

// One full iteration over a conflict-free update set (leaders processed in
// ascending id order).
IterationRecord step(EngineState& state, const UpdateSet& update_set,
                     const SolveOptions& solver = {});

// Reallocation headroom of node i's closed neighborhood: cached sum of phi
// minus the neighborhood optimal value. Nonnegative up to solver tolerance;
// zero everywhere certifies optimality.
double residual(const EngineState& state, int i, const SolveOptions& solver = {});

struct AuditCheck {
  std::string name;
  bool pass = false;
  double magnitude = 0.0;
};

struct AuditReport {
  std::vector<AuditCheck> checks;
  bool all_pass() const;
  std::string to_string() const;
};

// Coupling feasibility of x, strict interiority, conservation of shares,
// per-node share feasibility, and the phi_i = F_i(x_i) identity.
AuditReport audit_feasibility(const EngineState& state);

struct InitSpec {
  enum class Kind { even_split, from_point, shares };
  Kind kind = Kind::even_split;
  std::vector<Eigen::VectorXd> point;  // from_point
  std::vector<RhsShare> shares;        // explicit shares
};

struct StopRule {
  enum class Kind { none, residual, plateau };
  Kind kind = Kind::none;
  double tol = 1e-8;  // residual threshold
};

struct RunOptions {
  InitSpec init;
  long max_iters = 1000;
  std::uint64_t seed = 0;
  StopRule stop;
  // Residual sampling period for traces and the residual stop rule;
  // 0 disables sampling (the residual stop rule then samples every 10).
  long residual_every = 0;
  SolveOptions solver;
};

struct RunResult {
  std::vector<IterationRecord> trace;  // trace[0] is the initial state
  EngineState state;
  bool stopped_early = false;
};

// Full deterministic run: voting-based update sets from a seeded generator,
// one step per iteration, optional stop rule.
RunResult run(const ProblemInstance& inst, const RunOptions& opts);

}  // namespace drra
