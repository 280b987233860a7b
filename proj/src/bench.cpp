#include "drra/bench.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "drra/error.hpp"
#include "drra/oracle.hpp"

namespace drra {

namespace {

using nlohmann::json;

[[noreturn]] void schema_fail(const std::string& path, const std::string& what) {
  throw SchemaError(path + ": " + what);
}

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) schema_fail(path + "." + key, "missing");
  return j.at(key);
}

double require_number(const json& j, const std::string& path) {
  if (!j.is_number()) schema_fail(path, "expected a number");
  return j.get<double>();
}

Eigen::VectorXd parse_vector(const json& j, const std::string& path) {
  if (!j.is_array()) schema_fail(path, "expected an array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<int>(i)) = require_number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

Eigen::MatrixXd parse_matrix(const json& j, int expected_cols, const std::string& path) {
  if (!j.is_array()) schema_fail(path, "expected an array of rows");
  Eigen::MatrixXd m(j.size(), expected_cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Eigen::VectorXd row = parse_vector(j[r], path + "[" + std::to_string(r) + "]");
    if (row.size() != expected_cols)
      schema_fail(path + "[" + std::to_string(r) + "]",
                  "expected " + std::to_string(expected_cols) + " columns, got " +
                      std::to_string(row.size()));
    m.row(static_cast<int>(r)) = row.transpose();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (int r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

SmoothConvexFn parse_fn(const json& j, const std::string& path) {
  const std::string kind = require(j, "kind", path).get<std::string>();
  if (kind == "quadratic") {
    const Eigen::VectorXd q = parse_vector(require(j, "q", path), path + ".q");
    const Eigen::MatrixXd Q =
        parse_matrix(require(j, "Q", path), static_cast<int>(q.size()), path + ".Q");
    return SmoothConvexFn::quadratic(Q, q, require_number(require(j, "r", path), path + ".r"));
  }
  if (kind == "affine") {
    const Eigen::VectorXd a = parse_vector(require(j, "a", path), path + ".a");
    return SmoothConvexFn::affine(a, require_number(require(j, "beta", path), path + ".beta"));
  }
  schema_fail(path + ".kind", "expected \"quadratic\" or \"affine\", got \"" + kind + "\"");
}

json fn_to_json(const SmoothConvexFn& f) {
  if (f.kind == SmoothConvexFn::Kind::quadratic)
    return json{{"kind", "quadratic"}, {"Q", matrix_to_json(f.Q)}, {"q", vector_to_json(f.q)},
                {"r", f.r}};
  return json{{"kind", "affine"}, {"a", vector_to_json(f.q)}, {"beta", f.r}};
}

BarrierSpec parse_barrier(const json& j, const std::string& path) {
  BarrierSpec spec;
  const std::string kind = require(j, "kind", path).get<std::string>();
  if (kind == "log")
    spec.kind = BarrierSpec::Kind::log;
  else if (kind == "inverse")
    spec.kind = BarrierSpec::Kind::inverse;
  else
    schema_fail(path + ".kind", "expected \"log\" or \"inverse\", got \"" + kind + "\"");
  spec.c = require_number(require(j, "c", path), path + ".c");
  if (!(spec.c > 0.0)) schema_fail(path + ".c", "barrier weight must be positive");
  return spec;
}

}  // namespace

ProblemInstance instance_from_json(const json& j) {
  ProblemInstance inst;

  const json& jg = require(j, "graph", "$");
  const int n = static_cast<int>(require_number(require(jg, "n", "$.graph"), "$.graph.n"));
  const json& jedges = require(jg, "edges", "$.graph");
  if (!jedges.is_array()) schema_fail("$.graph.edges", "expected an array of pairs");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(jedges.size());
  for (std::size_t e = 0; e < jedges.size(); ++e) {
    const std::string path = "$.graph.edges[" + std::to_string(e) + "]";
    if (!jedges[e].is_array() || jedges[e].size() != 2) schema_fail(path, "expected [i, j]");
    edges.emplace_back(static_cast<int>(require_number(jedges[e][0], path + "[0]")),
                       static_cast<int>(require_number(jedges[e][1], path + "[1]")));
  }
  try {
    inst.graph = Graph(n, edges);
  } catch (const ValidationError& e) {
    schema_fail("$.graph", e.what());
  }

  const json& jc = require(j, "coupling", "$");
  inst.coupling.b_in = parse_vector(require(jc, "b_in", "$.coupling"), "$.coupling.b_in");
  inst.coupling.b_eq = parse_vector(require(jc, "b_eq", "$.coupling"), "$.coupling.b_eq");

  inst.barrier = parse_barrier(require(j, "barrier", "$"), "$.barrier");

  const json& jn = require(j, "nodes", "$");
  if (!jn.is_array() || jn.empty()) schema_fail("$.nodes", "expected a nonempty array");
  if (static_cast<int>(jn.size()) != n)
    schema_fail("$.nodes", "got " + std::to_string(jn.size()) + " nodes for graph n = " +
                               std::to_string(n));
  for (std::size_t i = 0; i < jn.size(); ++i) {
    const std::string path = "$.nodes[" + std::to_string(i) + "]";
    NodeProblem node;
    node.id = static_cast<int>(i) + 1;
    node.objective = parse_fn(require(jn[i], "objective", path), path + ".objective");
    node.dim = node.objective.dim;
    const json& jcons = require(jn[i], "constraints", path);
    if (!jcons.is_array()) schema_fail(path + ".constraints", "expected an array");
    for (std::size_t g = 0; g < jcons.size(); ++g)
      node.local_constraints.push_back(
          parse_fn(jcons[g], path + ".constraints[" + std::to_string(g) + "]"));
    node.A_in = parse_matrix(require(jn[i], "A_in", path), node.dim, path + ".A_in");
    node.A_eq = parse_matrix(require(jn[i], "A_eq", path), node.dim, path + ".A_eq");
    if (node.A_in.rows() != inst.coupling.m_in())
      schema_fail(path + ".A_in", "row count does not match coupling.b_in");
    if (node.A_eq.rows() != inst.coupling.m_eq())
      schema_fail(path + ".A_eq", "row count does not match coupling.b_eq");
    inst.nodes.push_back(std::move(node));
  }

  if (j.contains("assume_compact")) {
    if (!j["assume_compact"].is_boolean()) schema_fail("$.assume_compact", "expected a boolean");
    inst.assume_compact = j["assume_compact"].get<bool>();
  }
  if (j.contains("meta")) {
    const json& jm = j["meta"];
    if (jm.contains("family")) inst.family = jm["family"].get<std::string>();
    if (jm.contains("seed")) inst.gen_seed = jm["seed"].get<std::uint64_t>();
  }
  return inst;
}

json instance_to_json(const ProblemInstance& inst) {
  json j;
  j["graph"]["n"] = inst.graph.n();
  json edges = json::array();
  for (auto [a, b] : inst.graph.edges()) edges.push_back(json::array({a, b}));
  j["graph"]["edges"] = std::move(edges);
  j["coupling"]["b_in"] = vector_to_json(inst.coupling.b_in);
  j["coupling"]["b_eq"] = vector_to_json(inst.coupling.b_eq);
  j["barrier"]["kind"] = inst.barrier.kind == BarrierSpec::Kind::log ? "log" : "inverse";
  j["barrier"]["c"] = inst.barrier.c;
  json nodes = json::array();
  for (const auto& node : inst.nodes) {
    json jn;
    jn["objective"] = fn_to_json(node.objective);
    json cons = json::array();
    for (const auto& g : node.local_constraints) cons.push_back(fn_to_json(g));
    jn["constraints"] = std::move(cons);
    jn["A_in"] = matrix_to_json(node.A_in);
    jn["A_eq"] = matrix_to_json(node.A_eq);
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = std::move(nodes);
  if (inst.assume_compact) j["assume_compact"] = true;
  if (!inst.family.empty()) {
    j["meta"]["family"] = inst.family;
    j["meta"]["seed"] = inst.gen_seed;
  }
  return j;
}

ProblemInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open instance file: " + path);
  const json j = json::parse(in);  // json::parse_error propagates
  return instance_from_json(j);
}

void save_instance(const ProblemInstance& inst, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write instance file: " + path);
  out << instance_to_json(inst).dump(2) << "\n";
}

LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open config file: " + path);
  const json j = json::parse(in);

  LoadedConfig out;
  RunConfig& cfg = out.config;

  const json& jinst = require(j, "instance", "$");
  if (jinst.is_string()) {
    cfg.instance_path = jinst.get<std::string>();
    // Relative instance paths resolve against the config file location.
    std::filesystem::path p(cfg.instance_path);
    if (p.is_relative()) {
      const auto base = std::filesystem::path(path).parent_path();
      p = base / p;
    }
    out.instance = load_instance(p.string());
  } else if (jinst.is_object() && jinst.contains("generator")) {
    const json& jgen = jinst["generator"];
    const std::string family = require(jgen, "family", "$.instance.generator").get<std::string>();
    const int n = static_cast<int>(
        require_number(require(jgen, "n", "$.instance.generator"), "$.instance.generator.n"));
    const std::uint64_t seed =
        jgen.contains("seed") ? jgen["seed"].get<std::uint64_t>() : 0;
    out.instance = generate_instance(family, n, seed);
  } else {
    schema_fail("$.instance", "expected a path string or {\"generator\": {...}}");
  }

  cfg.barrier_kind = out.instance.barrier.kind;
  cfg.c_list = {out.instance.barrier.c};
  if (j.contains("barrier")) {
    const json& jb = j["barrier"];
    if (jb.contains("kind")) {
      const std::string kind = jb["kind"].get<std::string>();
      if (kind == "log")
        cfg.barrier_kind = BarrierSpec::Kind::log;
      else if (kind == "inverse")
        cfg.barrier_kind = BarrierSpec::Kind::inverse;
      else
        schema_fail("$.barrier.kind", "expected \"log\" or \"inverse\"");
    }
    if (jb.contains("c")) {
      cfg.c_list.clear();
      if (jb["c"].is_array())
        for (std::size_t i = 0; i < jb["c"].size(); ++i)
          cfg.c_list.push_back(
              require_number(jb["c"][i], "$.barrier.c[" + std::to_string(i) + "]"));
      else
        cfg.c_list.push_back(require_number(jb["c"], "$.barrier.c"));
    }
  }
  if (cfg.c_list.empty()) schema_fail("$.barrier.c", "c list must be nonempty");
  for (double c : cfg.c_list)
    if (!(c > 0.0)) schema_fail("$.barrier.c", "every c must be positive");

  if (j.contains("max_iters"))
    cfg.max_iters = static_cast<long>(require_number(j["max_iters"], "$.max_iters"));
  if (cfg.max_iters < 1) schema_fail("$.max_iters", "must be >= 1");
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();

  if (j.contains("init")) {
    const std::string init = j["init"].get<std::string>();
    if (init == "even")
      cfg.init_kind = InitSpec::Kind::even_split;
    else if (init == "from-point")
      cfg.init_kind = InitSpec::Kind::from_point;
    else
      schema_fail("$.init", "expected \"even\" or \"from-point\"");
  }
  if (cfg.init_kind == InitSpec::Kind::from_point) {
    const json& jp = require(j, "point", "$");
    if (!jp.is_array()) schema_fail("$.point", "expected one vector per node");
    for (std::size_t i = 0; i < jp.size(); ++i)
      cfg.init_point.push_back(parse_vector(jp[i], "$.point[" + std::to_string(i) + "]"));
  }

  if (j.contains("stop")) {
    const std::string stop = j["stop"].get<std::string>();
    if (stop == "none") {
      cfg.stop.kind = StopRule::Kind::none;
    } else if (stop == "plateau") {
      cfg.stop.kind = StopRule::Kind::plateau;
    } else if (stop.rfind("residual:", 0) == 0) {
      cfg.stop.kind = StopRule::Kind::residual;
      try {
        cfg.stop.tol = std::stod(stop.substr(9));
      } catch (...) {
        schema_fail("$.stop", "cannot parse residual tolerance in \"" + stop + "\"");
      }
      if (!(cfg.stop.tol > 0.0)) schema_fail("$.stop", "residual tolerance must be positive");
    } else {
      schema_fail("$.stop", "expected \"none\", \"plateau\", or \"residual:TOL\"");
    }
  }
  if (j.contains("residual_every"))
    cfg.residual_every =
        static_cast<long>(require_number(j["residual_every"], "$.residual_every"));
  if (cfg.residual_every < 0) schema_fail("$.residual_every", "must be >= 0");
  if (j.contains("out")) cfg.out_path = j["out"].get<std::string>();

  const ValidationReport report = validate_instance(out.instance);
  if (!report.all_pass())
    throw ValidationError("instance failed validation:\n" + report.to_string());
  return out;
}

Graph random_connected_graph(int n, Rng& rng) {
  if (n < 1) throw ValidationError("graph generator needs n >= 1");
  std::vector<std::pair<int, int>> edges;
  if (n >= 2) {
    if (n == 2) {
      edges.emplace_back(1, 2);
    } else {
      // Uniform random tree via a Pruefer sequence.
      std::vector<int> pruefer(n - 2);
      for (int& p : pruefer) p = 1 + static_cast<int>(rng.next_index(n));
      std::vector<int> degree(static_cast<std::size_t>(n) + 1, 1);
      for (int p : pruefer) ++degree[p];
      std::set<int> leaves;
      for (int v = 1; v <= n; ++v)
        if (degree[v] == 1) leaves.insert(v);
      for (int p : pruefer) {
        const int leaf = *leaves.begin();
        leaves.erase(leaves.begin());
        edges.emplace_back(leaf, p);
        if (--degree[p] == 1) leaves.insert(p);
      }
      const int a = *leaves.begin();
      const int b = *std::next(leaves.begin());
      edges.emplace_back(a, b);
    }
    // Extra edges make the topology less tree-like.
    std::set<std::pair<int, int>> have(edges.begin(), edges.end());
    for (auto& e : edges)
      if (e.first > e.second) std::swap(e.first, e.second);
    have = std::set<std::pair<int, int>>(edges.begin(), edges.end());
    const int extra = (n + 3) / 4;
    for (int e = 0; e < extra; ++e) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        int a = 1 + static_cast<int>(rng.next_index(n));
        int b = 1 + static_cast<int>(rng.next_index(n));
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        if (have.insert({a, b}).second) {
          edges.emplace_back(a, b);
          break;
        }
      }
    }
  }
  return Graph(n, edges);
}

ProblemInstance generate_instance(const std::string& family, int n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("generator needs n >= 1, got n = " + std::to_string(n));
  Rng rng(seed);
  Graph graph = random_connected_graph(n, rng);

  if (family == "dispatch") {
    std::vector<DispatchCost> costs(n);
    std::vector<std::pair<double, double>> bounds(n);
    double u_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      costs[i].a = rng.next_range(0.5, 2.0);
      costs[i].b = rng.next_range(0.0, 1.0);
      costs[i].c = 0.0;
      bounds[i] = {0.0, 5.0};
      u_sum += 5.0;
    }
    ProblemInstance inst =
        gen_economic_dispatch(costs, bounds, 0.5 * u_sum, std::move(graph));
    inst.gen_seed = seed;
    return inst;
  }
  if (family == "multi_resource") {
    if (n < 2)
      throw ValidationError("multi_resource generator needs n >= 2 to host both generator kinds");
    std::vector<double> alpha(n), beta(n), demand(n), caps(n, 5.0);
    std::vector<NodeRole> roles(n);
    bool has_renewable = false, has_coal = false;
    for (int i = 0; i < n; ++i) {
      alpha[i] = rng.next_range(0.5, 2.0);
      beta[i] = rng.next_range(0.5, 2.0);
      const auto pick = rng.next_index(3);
      roles[i] = pick == 0 ? NodeRole::renewable_gen
                           : (pick == 1 ? NodeRole::coal_gen : NodeRole::consumer);
      demand[i] = roles[i] == NodeRole::consumer ? rng.next_range(0.0, 2.0) : 0.0;
      has_renewable = has_renewable || roles[i] == NodeRole::renewable_gen;
      has_coal = has_coal || roles[i] == NodeRole::coal_gen;
    }
    if (!has_renewable) {
      roles[0] = NodeRole::renewable_gen;
      demand[0] = 0.0;
    }
    if (!has_coal) {
      roles[1] = NodeRole::coal_gen;
      demand[1] = 0.0;
    }
    ProblemInstance inst =
        gen_multi_resource(alpha, beta, demand, roles, caps, std::move(graph));
    inst.gen_seed = seed;
    return inst;
  }
  throw ValidationError("unknown instance family \"" + family +
                        "\" (expected \"dispatch\" or \"multi_resource\")");
}

void gen_command(const std::string& family, int n, std::uint64_t seed,
                 const std::string& out_path) {
  const ProblemInstance inst = generate_instance(family, n, seed);
  const ValidationReport report = validate_instance(inst);
  if (!report.all_pass())
    throw ValidationError("generated instance failed validation:\n" + report.to_string());
  save_instance(inst, out_path);
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trace_path_for_c(const std::string& out_path, double c) {
  std::filesystem::path p(out_path);
  std::string stem = p.has_extension() ? p.stem().string() : p.filename().string();
  const std::string ext = p.has_extension() ? p.extension().string() : ".csv";
  char cbuf[32];
  std::snprintf(cbuf, sizeof(cbuf), "%g", c);
  return (p.parent_path() / (stem + "_c" + cbuf + ext)).string();
}

ExperimentSummary run_experiment(const RunConfig& cfg, const ProblemInstance& inst) {
  ExperimentSummary summary;
  ProblemInstance work = inst;
  work.barrier.kind = cfg.barrier_kind;

  // f* does not depend on c; compute it once.
  work.barrier.c = cfg.c_list.front();
  const OracleSolution fstar = solve_centralized_original(work);
  summary.f_star = fstar.value;

  for (double c : cfg.c_list) {
    work.barrier.c = c;
    RunOptions opts;
    opts.init.kind = cfg.init_kind;
    opts.init.point = cfg.init_point;
    opts.max_iters = cfg.max_iters;
    opts.seed = cfg.seed;
    opts.stop = cfg.stop;
    opts.residual_every = cfg.residual_every;
    const RunResult result = run(work, opts);

    const std::string path = trace_path_for_c(cfg.out_path, c);
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream csv(path);
    if (!csv) throw SchemaError("cannot write trace file: " + path);
    csv << "k,sum_f,sum_F,sum_phi,rel_obj_err,feas_in_err,feas_eq_err,num_leaders,"
           "residual_sum,wallclock_ms\n";
    double final_rel = 0.0;
    for (const auto& rec : result.trace) {
      const double rel = summary.f_star != 0.0
                             ? (rec.sum_f - summary.f_star) / summary.f_star
                             : rec.sum_f - summary.f_star;
      final_rel = rel;
      csv << rec.k << ',' << format_g17(rec.sum_f) << ',' << format_g17(rec.sum_F) << ','
          << format_g17(rec.sum_phi) << ',' << format_g17(rel) << ','
          << format_g17(rec.feas_in_err) << ',' << format_g17(rec.feas_eq_err) << ','
          << rec.update_set.leaders.size() << ','
          << (rec.residual_sum ? format_g17(*rec.residual_sum) : std::string()) << ','
          << format_g17(rec.wallclock_ms) << '\n';
    }

    ExperimentRun runinfo;
    runinfo.c = c;
    runinfo.csv_path = path;
    runinfo.f_star = summary.f_star;
    runinfo.final_rel_obj_err = final_rel;
    runinfo.final_sum_f = result.trace.back().sum_f;
    runinfo.iterations = result.state.k;
    runinfo.stopped_early = result.stopped_early;
    summary.runs.push_back(std::move(runinfo));
  }
  return summary;
}

}  // namespace drra
