#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "drra/bench.hpp"
#include "drra/engine.hpp"
#include "drra/error.hpp"
#include "drra/model.hpp"
#include "drra/oracle.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitRuntime = 4;

std::vector<double> parse_c_list(const std::string& list) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = list.find(',', pos);
    const std::string item = list.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (!item.empty()) out.push_back(std::stod(item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw drra::SchemaError("--c: empty list");
  for (double c : out)
    if (!(c > 0.0)) throw drra::SchemaError("--c: every value must be positive");
  return out;
}

drra::StopRule parse_stop(const std::string& stop) {
  drra::StopRule rule;
  if (stop == "none") {
    rule.kind = drra::StopRule::Kind::none;
  } else if (stop == "plateau") {
    rule.kind = drra::StopRule::Kind::plateau;
  } else if (stop.rfind("residual:", 0) == 0) {
    rule.kind = drra::StopRule::Kind::residual;
    rule.tol = std::stod(stop.substr(9));
    if (!(rule.tol > 0.0)) throw drra::SchemaError("--stop: residual tolerance must be positive");
  } else {
    throw drra::SchemaError("--stop: expected none, plateau, or residual:TOL");
  }
  return rule;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const nlohmann::json::parse_error& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const drra::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const drra::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DRRA: feasible-iterate distributed resource reallocation simulator"};
  app.require_subcommand(1);

  // gen FAMILY --n N --seed S --out PATH
  auto* gen = app.add_subcommand("gen", "generate a synthetic instance file");
  std::string gen_family;
  int gen_n = 10;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "instance.json";
  gen->add_option("family", gen_family, "dispatch or multi_resource")->required();
  gen->add_option("--n", gen_n, "node count")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output instance path");

  // run [--config PATH | --instance PATH] [overrides]
  auto* runcmd = app.add_subcommand("run", "run the algorithm and write CSV traces");
  std::string run_config, run_instance, run_c, run_init, run_stop, run_out;
  long run_iters = -1;
  std::int64_t run_seed = -1;
  long run_residual_every = -1;
  runcmd->add_option("--config", run_config, "run-config JSON file");
  runcmd->add_option("--instance", run_instance, "instance JSON file");
  runcmd->add_option("--c", run_c, "comma-separated barrier weights");
  runcmd->add_option("--iters", run_iters, "iteration count");
  runcmd->add_option("--seed", run_seed, "run seed");
  runcmd->add_option("--init", run_init, "even or from-point");
  runcmd->add_option("--stop", run_stop, "none, plateau, or residual:TOL");
  runcmd->add_option("--residual-every", run_residual_every,
                     "residual sampling period (0 = off)");
  runcmd->add_option("--out", run_out, "trace output path (one CSV per c)");

  // oracle --instance PATH [--c C]
  auto* oraclecmd = app.add_subcommand("oracle", "centralized reference solve");
  std::string oracle_instance;
  double oracle_c = 0.0;
  oraclecmd->add_option("--instance", oracle_instance, "instance JSON file")->required();
  oraclecmd->add_option("--c", oracle_c, "barrier weight for the F* solve (default: instance c)");

  // validate --instance PATH
  auto* validatecmd = app.add_subcommand("validate", "validate an instance file");
  std::string validate_instance_path;
  validatecmd->add_option("--instance", validate_instance_path, "instance JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    return run_guarded([&] {
      drra::gen_command(gen_family, gen_n, gen_seed, gen_out);
      std::cout << "wrote " << gen_out << " (" << gen_family << ", n=" << gen_n
                << ", seed=" << gen_seed << ")\n";
      return kExitOk;
    });
  }

  if (runcmd->parsed()) {
    return run_guarded([&] {
      drra::LoadedConfig loaded;
      if (!run_config.empty()) {
        loaded = drra::load_config(run_config);
      } else if (!run_instance.empty()) {
        loaded.instance = drra::load_instance(run_instance);
        loaded.config.instance_path = run_instance;
        loaded.config.barrier_kind = loaded.instance.barrier.kind;
        loaded.config.c_list = {loaded.instance.barrier.c};
        const drra::ValidationReport report = drra::validate_instance(loaded.instance);
        if (!report.all_pass())
          throw drra::ValidationError("instance failed validation:\n" + report.to_string());
      } else {
        throw drra::SchemaError("run: need --config or --instance");
      }
      drra::RunConfig& cfg = loaded.config;
      if (!run_c.empty()) cfg.c_list = parse_c_list(run_c);
      if (run_iters >= 0) cfg.max_iters = run_iters;
      if (cfg.max_iters < 1) throw drra::SchemaError("--iters must be >= 1");
      if (run_seed >= 0) cfg.seed = static_cast<std::uint64_t>(run_seed);
      if (!run_init.empty()) {
        if (run_init == "even")
          cfg.init_kind = drra::InitSpec::Kind::even_split;
        else if (run_init == "from-point")
          cfg.init_kind = drra::InitSpec::Kind::from_point;
        else
          throw drra::SchemaError("--init: expected even or from-point");
      }
      if (!run_stop.empty()) cfg.stop = parse_stop(run_stop);
      if (run_residual_every >= 0) cfg.residual_every = run_residual_every;
      if (!run_out.empty()) cfg.out_path = run_out;

      const drra::ExperimentSummary summary = drra::run_experiment(cfg, loaded.instance);
      std::cout << "f* = " << drra::format_g17(summary.f_star) << "\n";
      for (const auto& r : summary.runs) {
        std::printf("c=%g: final rel_obj_err=%.6e after %ld iterations%s -> %s\n", r.c,
                    r.final_rel_obj_err, r.iterations, r.stopped_early ? " (stopped early)" : "",
                    r.csv_path.c_str());
      }
      return kExitOk;
    });
  }

  if (oraclecmd->parsed()) {
    return run_guarded([&] {
      drra::ProblemInstance inst = drra::load_instance(oracle_instance);
      const drra::ValidationReport report = drra::validate_instance(inst);
      if (!report.all_pass())
        throw drra::ValidationError("instance failed validation:\n" + report.to_string());
      const double c = oracle_c > 0.0 ? oracle_c : inst.barrier.c;
      const drra::OracleSolution barrier = drra::solve_centralized_barrier(inst, c);
      const drra::OracleSolution original = drra::solve_centralized_original(inst);
      std::cout << "F* (c=" << c << ") = " << drra::format_g17(barrier.value) << "\n";
      std::cout << "f* = " << drra::format_g17(original.value) << "\n";
      for (const auto& [hc, sum_f] : original.homotopy)
        std::cout << "  c=" << hc << ": sum f = " << drra::format_g17(sum_f) << "\n";
      return kExitOk;
    });
  }

  return run_guarded([&] {
    const drra::ProblemInstance inst = drra::load_instance(validate_instance_path);
    const drra::ValidationReport report = drra::validate_instance(inst);
    std::cout << report.to_string();
    return report.all_pass() ? kExitOk : kExitValidation;
  });
}
