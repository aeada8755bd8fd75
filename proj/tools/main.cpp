// Command-line front end: solve / verify / simulate / preset subcommands over
// JSON configs or named presets.  Exit codes: 0 solved (or all checks pass),
// 1 configuration or usage error, 2 infeasible instance (order witness
// printed), 3 feasible but not converged within the iteration budget.
//
// The output directory is taken from --out when given, else from the
// SKOROKHOD_OUT_DIR environment variable, else from the config.

#include "skorokhod/config.hpp"
#include "skorokhod/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace skorokhod;

RunConfig resolve_config(const std::string& arg) {
  const std::vector<std::string> names = preset_names();
  if (std::find(names.begin(), names.end(), arg) != names.end()) return preset_config(arg);
  return load_config(arg);
}

void print_order_witness(const SolveArtifacts& art) {
  const OrderCheck& oc = art.sol.report.order;
  std::printf("infeasible: subharmonic order violated\n");
  if (oc.worst_node >= 0 && art.grid) {
    std::printf("  witness node %d (x = %.12f): potential_mu = %.12f < potential_nu = %.12f "
                "(excess %.3e)\n",
                oc.worst_node, art.grid->x(oc.worst_node), oc.pot_mu[oc.worst_node],
                oc.pot_nu[oc.worst_node], oc.max_violation);
    std::printf("  the Green column at the witness node is superharmonic and integrates "
                "strictly larger against the target than against the start\n");
  }
}

void print_solve_summary(int code, const SolveArtifacts& art) {
  const AscendReport& rep = art.sol.report;
  if (code == 2) {
    print_order_witness(art);
    return;
  }
  std::printf("status: %s\n", code == 0 ? "converged" : "not_converged");
  std::printf("primal:     %.12e\n", rep.primal);
  std::printf("dual:       %.12e\n", rep.dual);
  std::printf("gap:        %.3e\n", rep.gap);
  std::printf("target_tv:  %.3e\n", rep.target_tv);
  std::printf("slackness:  %.3e\n", rep.slackness);
  std::printf("iterations: %ld\n", rep.iterations);
  if (art.barrier) {
    std::printf("barrier:    %s\n",
                art.barrier->direction == Barrier::Direction::forward ? "forward" : "backward");
    std::printf("transport_tv: %.3e\n", art.transport_target_tv);
  } else {
    std::printf("barrier:    none (no monotone cost class; coincidence region in report)\n");
  }
  if (art.mc) std::printf("mc_mean_cost: %.6e (stderr %.3e)\n", art.mc->mean_cost,
                          art.mc->stderr_cost);
  for (const std::string& f : art.files) std::printf("wrote: %s\n", f.c_str());
}

void print_verify_table(const std::vector<CheckRow>& rows, int code) {
  std::printf("status,name,value,tol,note\n");
  for (const CheckRow& r : rows) {
    const char* status = r.skipped ? "SKIP" : (r.pass ? "PASS" : "FAIL");
    std::printf("%s,%s,%.6e,%.6e,%s\n", status, r.name.c_str(), r.value, r.tol, r.note.c_str());
  }
  std::printf("# exit %d\n", code);
}

void print_mc_summary(const McResult& mc) {
  std::printf("paths:        %ld\n", mc.n_paths);
  std::printf("mean_cost:    %.6e (stderr %.3e)\n", mc.mean_cost, mc.stderr_cost);
  std::printf("mean_reward:  %.6e (stderr %.3e, expected %.6e, martingale %s)\n", mc.mean_reward,
              mc.stderr_reward, mc.expected_reward, mc.martingale_ok ? "ok" : "OFF");
  std::printf("killed:       %.6f\n", mc.killed_fraction);
  std::printf("horizon:      %.6f\n", mc.horizon_fraction);
  std::printf("mean_stop_t:  %.6f\n", mc.mean_stop_time);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skorokhod: lattice Skorokhod-embedding solver and verification lab"};
  app.require_subcommand(1);

  std::string cfg_arg;
  std::string out_override;
  int threads = 0;
  long paths = 0;
  std::uint64_t seed = 0;
  bool have_seed = false;

  CLI::App* solve = app.add_subcommand("solve", "Solve an instance and write artifacts");
  solve->add_option("config", cfg_arg, "config JSON path or preset name")->required();
  solve->add_option("--out", out_override, "output directory override");
  solve->add_option("--threads", threads, "Monte Carlo worker threads");

  CLI::App* verify = app.add_subcommand("verify", "Run the invariant check table");
  verify->add_option("config", cfg_arg, "config JSON path or preset name")->required();
  verify->add_option("--out", out_override, "output directory override");

  CLI::App* simulate =
      app.add_subcommand("simulate", "Solve, extract the barrier, and simulate hitting paths");
  simulate->add_option("config", cfg_arg, "config JSON path or preset name")->required();
  simulate->add_option("--out", out_override, "output directory override");
  simulate->add_option("--paths", paths, "number of Monte Carlo paths");
  simulate->add_option("--seed", seed, "RNG seed")->each([&](const std::string&) {
    have_seed = true;
  });
  simulate->add_option("--threads", threads, "Monte Carlo worker threads");

  std::string preset_name;
  CLI::App* preset = app.add_subcommand("preset", "Print a named preset config (or list names)");
  preset->add_option("name", preset_name, "preset name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int c = app.exit(e);
    return (c == 0) ? 0 : 1;
  }

  try {
    if (preset->parsed()) {
      if (preset_name.empty()) {
        for (const std::string& n : preset_names()) std::printf("%s\n", n.c_str());
        return 0;
      }
      std::fputs(config_to_json(preset_config(preset_name)).c_str(), stdout);
      return 0;
    }

    RunConfig cfg = resolve_config(cfg_arg);
    if (!out_override.empty()) {
      cfg.output_dir = out_override;
      ::unsetenv("SKOROKHOD_OUT_DIR");  // the flag outranks the environment
    }
    if (threads > 0) cfg.mc.threads = threads;
    if (paths > 0) cfg.mc.n_paths = paths;
    if (have_seed) cfg.mc.seed = seed;

    if (solve->parsed()) {
      SolveArtifacts art;
      const int code = run_solve(cfg, &art, true);
      print_solve_summary(code, art);
      return code;
    }
    if (verify->parsed()) {
      std::vector<CheckRow> rows;
      const int code = run_verify(cfg, &rows, true);
      print_verify_table(rows, code);
      return code;
    }
    if (simulate->parsed()) {
      McResult mc;
      const int code = run_simulate(cfg, &mc, true);
      print_mc_summary(mc);
      return code;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
