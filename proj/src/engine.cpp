#include "drra/engine.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "drra/error.hpp"

namespace drra {

namespace {

double F_value(const ProblemInstance& inst, int node_idx, const Eigen::VectorXd& x) {
  return BarrierObjective(inst.nodes[node_idx], inst.barrier).value(x);
}

// Distributes (b - sum y) equally so the conservation invariant holds to
// machine precision after long runs.
void renormalize_shares(const ProblemInstance& inst, std::vector<RhsShare>& y) {
  const int n = static_cast<int>(y.size());
  Eigen::VectorXd in_res = inst.coupling.b_in;
  Eigen::VectorXd eq_res = inst.coupling.b_eq;
  for (const auto& share : y) {
    in_res -= share.y_in;
    eq_res -= share.y_eq;
  }
  const Eigen::VectorXd in_adj = in_res / n;
  const Eigen::VectorXd eq_adj = eq_res / n;
  for (auto& share : y) {
    share.y_in += in_adj;
    share.y_eq += eq_adj;
  }
}

void verify_shares_feasible(const ProblemInstance& inst, const std::vector<RhsShare>& y,
                            const std::string& context) {
  for (int i = 0; i < inst.n(); ++i) {
    const auto program =
        make_single_program(inst.nodes[i], inst.barrier, y[i].y_in, y[i].y_eq);
    const Phase1Result p1 = phase1(program);
    if (p1.status != SolveStatus::converged)
      throw ValidationError(context + ": share of node " + std::to_string(i + 1) +
                            " is not strictly feasible; use init_from_point or pass explicit "
                            "feasible shares");
  }
}

}  // namespace

Eigen::VectorXd RhsShare::stacked() const {
  Eigen::VectorXd s(y_in.size() + y_eq.size());
  s << y_in, y_eq;
  return s;
}

double EngineState::sum_phi() const {
  double s = 0.0;
  for (double v : phi) s += v;
  return s;
}

double EngineState::sum_f() const {
  double s = 0.0;
  for (int i = 0; i < inst->n(); ++i) s += inst->nodes[i].objective.value(x[i]);
  return s;
}

double EngineState::sum_F() const {
  double s = 0.0;
  for (int i = 0; i < inst->n(); ++i) s += F_value(*inst, i, x[i]);
  return s;
}

Eigen::VectorXd EngineState::share_total() const {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(inst->coupling.m());
  for (const auto& share : y) total += share.stacked();
  return total;
}

std::vector<RhsShare> init_even_split(const ProblemInstance& inst) {
  const int n = inst.n();
  const int m_in = inst.coupling.m_in();
  std::vector<RhsShare> y(n);

  if (inst.family == "dispatch" || inst.family == "multi_resource") {
    // Both families have identity-like equality rows and no inequality rows,
    // so shares live in the x-space of the nodes.
    std::vector<Eigen::VectorXd> lb(n);
    Eigen::VectorXd lb_sum;
    for (int i = 0; i < n; ++i) {
      auto b = coordinate_lower_bounds(inst.nodes[i]);
      if (!b)
        throw ValidationError("init_even_split: node " + std::to_string(i + 1) +
                              " has no recoverable lower bounds; use init_from_point");
      lb[i] = *b;
      lb_sum = i == 0 ? lb[i] : Eigen::VectorXd(lb_sum + lb[i]);
    }
    if (inst.family == "dispatch") {
      const Eigen::VectorXd shift = (inst.coupling.b_eq - lb_sum) / n;
      for (int i = 0; i < n; ++i) {
        y[i].y_in = Eigen::VectorXd::Zero(m_in);
        y[i].y_eq = lb[i] + shift;
      }
    } else {
      const Eigen::VectorXd mean = lb_sum / n;
      for (int i = 0; i < n; ++i) {
        y[i].y_in = Eigen::VectorXd::Zero(m_in);
        y[i].y_eq = 0.01 * (lb[i] - mean);
      }
    }
  } else {
    // Plain b/n split, the natural choice for sum-style couplings.
    for (int i = 0; i < n; ++i) {
      y[i].y_in = inst.coupling.b_in / n;
      y[i].y_eq = inst.coupling.b_eq / n;
    }
  }

  renormalize_shares(inst, y);
  verify_shares_feasible(inst, y, "init_even_split");
  return y;
}

std::vector<RhsShare> init_from_point(const ProblemInstance& inst,
                                      const std::vector<Eigen::VectorXd>& x_tilde) {
  const int n = inst.n();
  if (inst.coupling.m_in() > 0)
    throw ValidationError(
        "init_from_point is only supported without coupling inequality rows");
  if (static_cast<int>(x_tilde.size()) != n)
    throw ValidationError("init_from_point: need one point per node");

  std::vector<RhsShare> y(n);
  Eigen::VectorXd eq_sum = Eigen::VectorXd::Zero(inst.coupling.m_eq());
  for (int i = 0; i < n; ++i) {
    const auto& node = inst.nodes[i];
    if (x_tilde[i].size() != node.dim)
      throw ValidationError("init_from_point: point " + std::to_string(i + 1) +
                            " has wrong dimension");
    const BarrierObjective F(node, inst.barrier);
    if (!F.strictly_interior(x_tilde[i]))
      throw ValidationError("init_from_point: point " + std::to_string(i + 1) +
                            " is not strictly interior to its local constraints");
    y[i].y_in = Eigen::VectorXd(0);
    y[i].y_eq = node.A_eq * x_tilde[i];
    eq_sum += y[i].y_eq;
  }
  if ((eq_sum - inst.coupling.b_eq).cwiseAbs().maxCoeff() > 1e-9)
    throw ValidationError("init_from_point: the point violates the coupling constraint (|sum A x"
                          " - b| = " +
                          std::to_string((eq_sum - inst.coupling.b_eq).cwiseAbs().maxCoeff()) +
                          ")");
  renormalize_shares(inst, y);
  return y;
}

EngineState init_x(const ProblemInstance& inst, const std::vector<RhsShare>& y0,
                   const SolveOptions& solver) {
  const int n = inst.n();
  if (static_cast<int>(y0.size()) != n)
    throw ValidationError("init_x: need one share per node");
  EngineState state;
  state.inst = &inst;
  state.k = 0;
  state.x.resize(n);
  state.y = y0;
  state.phi.resize(n);
  state.u.resize(n);
  for (int i = 0; i < n; ++i) {
    SubproblemResult res = primal_value(inst.nodes[i], inst.barrier, y0[i].y_in, y0[i].y_eq, solver);
    if (!res.converged())
      throw SolveError("init_x: subproblem of node " + std::to_string(i + 1) + " is " +
                       to_string(res.status) + "; initial shares must be feasible");
    state.x[i] = std::move(res.x_star);
    state.phi[i] = res.value;
    state.u[i] = res.multiplier();
  }
  return state;
}

void apply_leader(EngineState& state, int leader, const SolveOptions& solver) {
  const ProblemInstance& inst = *state.inst;
  const std::vector<int> nbhd = closed_neighborhood(inst.graph, leader);
  const int m_in = inst.coupling.m_in();

  Eigen::VectorXd rhs_in_sum = Eigen::VectorXd::Zero(m_in);
  Eigen::VectorXd rhs_eq_sum = Eigen::VectorXd::Zero(inst.coupling.m_eq());
  std::vector<const NodeProblem*> nodes;
  nodes.reserve(nbhd.size());
  int total_dim = 0;
  for (int j : nbhd) {
    rhs_in_sum += state.y[j - 1].y_in;
    rhs_eq_sum += state.y[j - 1].y_eq;
    nodes.push_back(&inst.nodes[j - 1]);
    total_dim += inst.nodes[j - 1].dim;
  }
  Eigen::VectorXd warm(total_dim);
  int off = 0;
  for (int j : nbhd) {
    warm.segment(off, inst.nodes[j - 1].dim) = state.x[j - 1];
    off += inst.nodes[j - 1].dim;
  }

  NeighborhoodResult res;
  try {
    res = solve_neighborhood(nodes, inst.barrier, rhs_in_sum, rhs_eq_sum, solver, warm);
  } catch (const SolveError& e) {
    std::ostringstream os;
    os << e.what() << "\nleader = " << leader << ", k = " << state.k
       << ", sum_phi = " << state.sum_phi();
    throw SolveError(os.str());
  }

  // Share update: the common slack is computed once and split equally, which
  // telescopes so the neighborhood share sum is preserved.
  Eigen::VectorXd slack_share(m_in);
  if (m_in > 0) {
    Eigen::VectorXd slack_total = rhs_in_sum;
    for (std::size_t b = 0; b < nbhd.size(); ++b)
      slack_total -= inst.nodes[nbhd[b] - 1].A_in * res.x[b];
    slack_share = slack_total / static_cast<double>(nbhd.size());
  }

  for (std::size_t b = 0; b < nbhd.size(); ++b) {
    const int idx = nbhd[b] - 1;
    const NodeProblem& node = inst.nodes[idx];
    state.x[idx] = res.x[b];
    if (m_in > 0)
      state.y[idx].y_in = node.A_in * res.x[b] + slack_share;
    state.y[idx].y_eq = node.A_eq * res.x[b];
    state.phi[idx] = F_value(inst, idx, res.x[b]);
    state.u[idx] = res.multiplier;
  }
}

IterationRecord step(EngineState& state, const UpdateSet& update_set, const SolveOptions& solver) {
  const ProblemInstance& inst = *state.inst;
  if (!verify_nonconflict(inst.graph, update_set))
    throw ValidationError("step: update set has conflicting closed neighborhoods");

  const auto t0 = std::chrono::steady_clock::now();
  for (int leader : update_set.leaders) apply_leader(state, leader, solver);
  state.k += 1;
  if (state.k % 1000 == 0) renormalize_shares(inst, state.y);
  const auto t1 = std::chrono::steady_clock::now();

  IterationRecord rec;
  rec.k = state.k;
  rec.update_set = update_set;
  rec.sum_f = state.sum_f();
  rec.sum_F = state.sum_F();
  rec.sum_phi = state.sum_phi();
  Eigen::VectorXd coupled_in = Eigen::VectorXd::Zero(inst.coupling.m_in());
  Eigen::VectorXd coupled_eq = Eigen::VectorXd::Zero(inst.coupling.m_eq());
  for (int i = 0; i < inst.n(); ++i) {
    if (inst.coupling.m_in() > 0) coupled_in += inst.nodes[i].A_in * state.x[i];
    coupled_eq += inst.nodes[i].A_eq * state.x[i];
  }
  rec.feas_in_err = inst.coupling.m_in() > 0
                        ? (coupled_in - inst.coupling.b_in).cwiseMax(0.0).maxCoeff()
                        : 0.0;
  rec.feas_eq_err = (coupled_eq - inst.coupling.b_eq).norm();
  rec.wallclock_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return rec;
}

double residual(const EngineState& state, int i, const SolveOptions& solver) {
  const ProblemInstance& inst = *state.inst;
  const std::vector<int> nbhd = closed_neighborhood(inst.graph, i);

  Eigen::VectorXd rhs_in_sum = Eigen::VectorXd::Zero(inst.coupling.m_in());
  Eigen::VectorXd rhs_eq_sum = Eigen::VectorXd::Zero(inst.coupling.m_eq());
  std::vector<const NodeProblem*> nodes;
  double cached_sum = 0.0;
  int total_dim = 0;
  for (int j : nbhd) {
    rhs_in_sum += state.y[j - 1].y_in;
    rhs_eq_sum += state.y[j - 1].y_eq;
    nodes.push_back(&inst.nodes[j - 1]);
    cached_sum += state.phi[j - 1];
    total_dim += inst.nodes[j - 1].dim;
  }
  Eigen::VectorXd warm(total_dim);
  int off = 0;
  for (int j : nbhd) {
    warm.segment(off, inst.nodes[j - 1].dim) = state.x[j - 1];
    off += inst.nodes[j - 1].dim;
  }

  const NeighborhoodResult res =
      solve_neighborhood(nodes, inst.barrier, rhs_in_sum, rhs_eq_sum, solver, warm);
  const double r = cached_sum - res.value;
  if (r < -1e-8)
    throw SolveError("residual of node " + std::to_string(i) + " is " + std::to_string(r) +
                     " < -1e-8: cached primal values are inconsistent with the neighborhood solve");
  return std::max(r, 0.0);
}

bool AuditReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string AuditReport::to_string() const {
  std::ostringstream os;
  for (const auto& c : checks)
    os << (c.pass ? "[pass] " : "[FAIL] ") << c.name << " (magnitude " << c.magnitude << ")\n";
  return os.str();
}

AuditReport audit_feasibility(const EngineState& state) {
  const ProblemInstance& inst = *state.inst;
  AuditReport report;
  auto add = [&report](const std::string& name, bool pass, double magnitude) {
    report.checks.push_back({name, pass, magnitude});
  };

  Eigen::VectorXd coupled_in = Eigen::VectorXd::Zero(inst.coupling.m_in());
  Eigen::VectorXd coupled_eq = Eigen::VectorXd::Zero(inst.coupling.m_eq());
  for (int i = 0; i < inst.n(); ++i) {
    if (inst.coupling.m_in() > 0) coupled_in += inst.nodes[i].A_in * state.x[i];
    coupled_eq += inst.nodes[i].A_eq * state.x[i];
  }
  const double in_err = inst.coupling.m_in() > 0
                            ? (coupled_in - inst.coupling.b_in).cwiseMax(0.0).maxCoeff()
                            : 0.0;
  add("coupling_inequality", in_err <= 1e-8, in_err);
  const double eq_err = (coupled_eq - inst.coupling.b_eq).norm();
  add("coupling_equality", eq_err <= 1e-8, eq_err);

  double worst_g = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < inst.n(); ++i) {
    const BarrierObjective F(inst.nodes[i], inst.barrier);
    if (!inst.nodes[i].local_constraints.empty())
      worst_g = std::max(worst_g, F.max_constraint(state.x[i]));
  }
  add("strict_interiority", worst_g < 0.0, worst_g);

  const Eigen::VectorXd drift = state.share_total() - inst.coupling.stacked_b();
  const double cons_err = drift.size() > 0 ? drift.cwiseAbs().maxCoeff() : 0.0;
  add("conservation", cons_err <= 1e-10, cons_err);

  double share_err = 0.0;
  for (int i = 0; i < inst.n(); ++i) {
    if (inst.coupling.m_in() > 0)
      share_err = std::max(share_err,
                           (inst.nodes[i].A_in * state.x[i] - state.y[i].y_in).maxCoeff());
    share_err = std::max(
        share_err, (inst.nodes[i].A_eq * state.x[i] - state.y[i].y_eq).cwiseAbs().maxCoeff());
  }
  add("share_feasibility", share_err <= 1e-9, share_err);

  double consistency_err = 0.0;
  for (int i = 0; i < inst.n(); ++i) {
    const BarrierObjective F(inst.nodes[i], inst.barrier);
    if (!F.strictly_interior(state.x[i])) {
      consistency_err = std::numeric_limits<double>::infinity();
      break;
    }
    consistency_err = std::max(
        consistency_err, std::abs(state.phi[i] - F.value(state.x[i])) / (1.0 + std::abs(state.phi[i])));
  }
  add("phi_consistency", consistency_err <= 1e-8, consistency_err);

  return report;
}

RunResult run(const ProblemInstance& inst, const RunOptions& opts) {
  if (opts.max_iters < 0) throw ValidationError("run: max_iters must be nonnegative");

  std::vector<RhsShare> y0;
  switch (opts.init.kind) {
    case InitSpec::Kind::even_split:
      y0 = init_even_split(inst);
      break;
    case InitSpec::Kind::from_point:
      y0 = init_from_point(inst, opts.init.point);
      break;
    case InitSpec::Kind::shares:
      y0 = opts.init.shares;
      break;
  }

  RunResult result;
  result.state = init_x(inst, y0, opts.solver);
  EngineState& state = result.state;

  const long sample_every = opts.residual_every > 0
                                ? opts.residual_every
                                : (opts.stop.kind == StopRule::Kind::residual ? 10 : 0);
  auto sample_residuals = [&](IterationRecord& rec) -> double {
    double total = 0.0, worst = 0.0;
    for (int i = 1; i <= inst.n(); ++i) {
      const double r = residual(state, i, opts.solver);
      total += r;
      worst = std::max(worst, r);
    }
    rec.residual_sum = total;
    return worst;
  };

  IterationRecord rec0;
  rec0.k = 0;
  rec0.sum_f = state.sum_f();
  rec0.sum_F = state.sum_F();
  rec0.sum_phi = state.sum_phi();
  Eigen::VectorXd coupled_in = Eigen::VectorXd::Zero(inst.coupling.m_in());
  Eigen::VectorXd coupled_eq = Eigen::VectorXd::Zero(inst.coupling.m_eq());
  for (int i = 0; i < inst.n(); ++i) {
    if (inst.coupling.m_in() > 0) coupled_in += inst.nodes[i].A_in * state.x[i];
    coupled_eq += inst.nodes[i].A_eq * state.x[i];
  }
  rec0.feas_in_err = inst.coupling.m_in() > 0
                         ? (coupled_in - inst.coupling.b_in).cwiseMax(0.0).maxCoeff()
                         : 0.0;
  rec0.feas_eq_err = (coupled_eq - inst.coupling.b_eq).norm();
  if (sample_every > 0) {
    const double worst = sample_residuals(rec0);
    if (opts.stop.kind == StopRule::Kind::residual && worst <= opts.stop.tol) {
      result.trace.push_back(std::move(rec0));
      result.stopped_early = true;
      return result;
    }
  }
  result.trace.push_back(std::move(rec0));

  Rng rng(opts.seed);
  constexpr long kPlateauWindow = 100;
  for (long k = 1; k <= opts.max_iters; ++k) {
    const UpdateSet u = voting_select(inst.graph, rng);
    IterationRecord rec = step(state, u, opts.solver);
    double worst_residual = std::numeric_limits<double>::infinity();
    if (sample_every > 0 && state.k % sample_every == 0) worst_residual = sample_residuals(rec);
    result.trace.push_back(std::move(rec));

    if (opts.stop.kind == StopRule::Kind::residual && worst_residual <= opts.stop.tol) {
      result.stopped_early = true;
      break;
    }
    if (opts.stop.kind == StopRule::Kind::plateau &&
        static_cast<long>(result.trace.size()) > kPlateauWindow) {
      const double now = result.trace.back().sum_phi;
      const double before =
          result.trace[result.trace.size() - 1 - kPlateauWindow].sum_phi;
      if (before - now <= 1e-12 * (1.0 + std::abs(now))) {
        result.stopped_early = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace drra
