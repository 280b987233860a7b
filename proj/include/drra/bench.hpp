#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "drra/engine.hpp"
#include "drra/model.hpp"
#include "drra/rng.hpp"

namespace drra {

struct RunConfig {
  std::string instance_path;  // empty when the instance came from an inline generator
  BarrierSpec::Kind barrier_kind = BarrierSpec::Kind::log;
  std::vector<double> c_list;
  long max_iters = 1000;
  std::uint64_t seed = 0;
  InitSpec::Kind init_kind = InitSpec::Kind::even_split;
  std::vector<Eigen::VectorXd> init_point;  // from-point strategy
  StopRule stop;
  long residual_every = 0;
  std::string out_path = "trace.csv";
};

struct LoadedConfig {
  RunConfig config;
  ProblemInstance instance;
};

// Instance schema round trip.
ProblemInstance instance_from_json(const nlohmann::json& j);
nlohmann::json instance_to_json(const ProblemInstance& inst);
ProblemInstance load_instance(const std::string& path);
void save_instance(const ProblemInstance& inst, const std::string& path);

// Parses a run-config file, materializes its instance (path or inline
// generator spec), and validates it. Throws nlohmann::json::parse_error on
// malformed JSON, SchemaError on shape problems, ValidationError when the
// instance fails validation.
LoadedConfig load_config(const std::string& path);

// Uniform spanning tree (random Pruefer sequence) plus ceil(n/4) extra edges.
Graph random_connected_graph(int n, Rng& rng);

// Synthetic stand-ins with the documented parameter distributions:
// dispatch: a in [0.5,2], b in [0,1], bounds [0,5], budget 0.5 * sum u;
// multi_resource: alpha, beta in [0.5,2], D in [0,2] for consumers, caps 5,
// random roles with both generator kinds guaranteed.
ProblemInstance generate_instance(const std::string& family, int n, std::uint64_t seed);

// Generates, validates, and writes an instance file.
void gen_command(const std::string& family, int n, std::uint64_t seed, const std::string& out_path);

struct ExperimentRun {
  double c = 0.0;
  std::string csv_path;
  double f_star = 0.0;
  double final_rel_obj_err = 0.0;
  double final_sum_f = 0.0;
  long iterations = 0;
  bool stopped_early = false;
};

struct ExperimentSummary {
  double f_star = 0.0;
  std::vector<ExperimentRun> runs;
};

// For each c: runs the engine on the instance (barrier kind and c taken from
// the config) and writes one CSV trace; f* is computed once by the oracle.
ExperimentSummary run_experiment(const RunConfig& cfg, const ProblemInstance& inst);

// CSV trace path for one c value under the configured output path.
std::string trace_path_for_c(const std::string& out_path, double c);

// 17-significant-digit float formatting used in CSV traces.
std::string format_g17(double v);

}  // namespace drra
