#include "skorokhod/pipeline.hpp"

#include "skorokhod/oracle.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace skorokhod {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string fmt12(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%.12f", v);
  return b;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write \"" + path + "\"");
  out << text;
  if (!out) throw std::runtime_error("short write to \"" + path + "\"");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string resolved_out_dir(const RunConfig& cfg) {
  if (const char* e = std::getenv("SKOROKHOD_OUT_DIR"); e != nullptr && *e != '\0') return e;
  return cfg.output_dir;
}

// Config echo for reports; drops the thread count so that artifacts stay
// byte-identical across thread counts (an execution detail, not instance data).
json config_echo(const RunConfig& cfg) {
  json j = json::parse(config_to_json(cfg));
  if (j.contains("mc") && j["mc"].contains("threads")) j["mc"].erase("threads");
  return j;
}

double tv_distance(const Vector& a, const Vector& b) { return 0.5 * (a - b).cwiseAbs().sum(); }

bool barrier_class(LagrangianSpec::Kind k) {
  return k == LagrangianSpec::Kind::increasing || k == LagrangianSpec::Kind::decreasing;
}

double coincidence_fraction(const Grid& g, const ValuePair& vp, double eps) {
  const int n = g.n();
  const int K = g.horizon();
  long cnt = 0;
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n; ++i)
      if (vp.J(k, i) - vp.psi[i] <= eps) ++cnt;
  return static_cast<double>(cnt) / (static_cast<double>(K) * n);
}

json order_json(const Grid& g, const OrderCheck& oc) {
  json j = {{"ordered", oc.ordered},
            {"max_violation", oc.max_violation},
            {"worst_node", oc.worst_node}};
  if (!oc.ordered && oc.worst_node >= 0) {
    j["witness"] = {{"node", oc.worst_node},
                    {"x", g.x(oc.worst_node)},
                    {"potential_mu", oc.pot_mu[oc.worst_node]},
                    {"potential_nu", oc.pot_nu[oc.worst_node]}};
  }
  return j;
}

json mc_json(const McResult& mc, double tv_vs_target) {
  return {{"n_paths", mc.n_paths},
          {"tv_vs_target", tv_vs_target},
          {"mean_cost", mc.mean_cost},
          {"stderr_cost", mc.stderr_cost},
          {"mean_reward", mc.mean_reward},
          {"stderr_reward", mc.stderr_reward},
          {"expected_reward", mc.expected_reward},
          {"martingale_ok", mc.martingale_ok},
          {"killed_fraction", mc.killed_fraction},
          {"horizon_fraction", mc.horizon_fraction},
          {"mean_stop_time", mc.mean_stop_time}};
}

std::string format_mc_csv(const Grid& g, const McResult& mc, const DiscreteMeasure& nu) {
  std::string out = "i,x,count,empirical,target\n";
  char line[160];
  for (int i = 0; i < g.n(); ++i) {
    std::snprintf(line, sizeof line, "%d,%s,%lld,%s,%s\n", i, fmt12(g.x(i)).c_str(),
                  mc.counts[static_cast<std::size_t>(i)], fmt12(mc.empirical[i]).c_str(),
                  fmt12(nu.w[i]).c_str());
    out += line;
  }
  return out;
}

double potential_tol(const PotentialFlow& pf) {
  return 1e-10 * std::max(1.0, pf.U_mu.lpNorm<Eigen::Infinity>());
}

}  // namespace

std::string format_field_csv(const Grid& g, const Field& field) {
  if (field.cols() != g.n())
    throw std::invalid_argument("format_field_csv: column count does not match the grid");
  std::string out = "k,t,i,x,value\n";
  out.reserve(static_cast<std::size_t>(field.rows()) * static_cast<std::size_t>(field.cols()) * 64 +
              32);
  char line[160];
  for (Eigen::Index k = 0; k < field.rows(); ++k) {
    const std::string t = fmt12(g.t(static_cast<int>(k)));
    for (Eigen::Index i = 0; i < field.cols(); ++i) {
      std::snprintf(line, sizeof line, "%lld,%s,%lld,%s,%s\n", static_cast<long long>(k), t.c_str(),
                    static_cast<long long>(i), fmt12(g.x(static_cast<int>(i))).c_str(),
                    fmt12(field(k, i)).c_str());
      out += line;
    }
  }
  return out;
}

std::string format_barrier_csv(const Grid& g, const Barrier& b) {
  if (static_cast<int>(b.s.size()) != g.n())
    throw std::invalid_argument("format_barrier_csv: barrier size does not match the grid");
  std::string out = "i,x,s_index,t_s,t0_mass\n";
  char line[160];
  const bool has_atom = b.t0_mass.size() > 0;
  for (int i = 0; i < g.n(); ++i) {
    const int s = b.s[static_cast<std::size_t>(i)];
    const double ts = (s == Barrier::kNever) ? -1.0 : g.t(s);
    const double t0 = has_atom ? b.t0_mass[i] : 0.0;
    std::snprintf(line, sizeof line, "%d,%s,%d,%s,%s\n", i, fmt12(g.x(i)).c_str(), s,
                  fmt12(ts).c_str(), fmt12(t0).c_str());
    out += line;
  }
  return out;
}

int run_solve(const RunConfig& cfg, SolveArtifacts* out_art, bool write_files) {
  SolveArtifacts local;
  SolveArtifacts& art = (out_art != nullptr) ? *out_art : local;
  art = SolveArtifacts{};

  const Grid g(cfg.grid);
  art.grid.emplace(g);
  art.mu = build_measure(g, cfg.mu);
  art.nu = build_measure(g, cfg.nu);
  art.sol = ascend(g, art.mu, art.nu, cfg.lagrangian, cfg.solver);
  const AscendReport& rep = art.sol.report;
  const std::string dir = resolved_out_dir(cfg);

  if (rep.infeasible) {
    json j;
    j["status"] = "infeasible";
    j["exit_code"] = 2;
    j["order"] = order_json(g, rep.order);
    j["config"] = config_echo(cfg);
    if (write_files) {
      fs::create_directories(dir);
      const std::string p = dir + "/report.json";
      write_text(p, j.dump(2) + "\n");
      art.files.push_back(p);
    }
    return 2;
  }

  const bool has_barrier = barrier_class(cfg.lagrangian.kind);
  if (has_barrier) {
    art.barrier = extract_barrier(g, art.sol.vp, cfg.lagrangian, rep.eps, &art.mu, &art.nu);
    art.transport = transport_from_barrier(g, *art.barrier, art.mu);
    art.transport_target_tv = tv_distance(art.transport->stopped_total(), art.nu.w);
    art.flux = flux_residual(g, *art.barrier, art.sol.fp, art.nu);
    art.mc = hitting_simulate(g, *art.barrier, art.mu, cfg.lagrangian, cfg.mc, &art.sol.vp);
  }
  art.potential = potential_flow(g, art.sol.fp, art.mu, art.nu);
  art.pot_checks = potential_checks(g, *art.potential, art.sol.fp, potential_tol(*art.potential));
  art.qv = quasivariational_residual(g, *art.potential, art.sol.fp);

  const int code = rep.converged ? 0 : 3;

  json j;
  j["status"] = rep.converged ? "converged" : "not_converged";
  j["exit_code"] = code;
  j["solver"] = {{"converged", rep.converged}, {"iterations", rep.iterations},
                 {"primal", rep.primal},       {"dual", rep.dual},
                 {"gap", rep.gap},             {"target_tv", rep.target_tv},
                 {"target_sup", rep.target_sup}, {"slackness", rep.slackness},
                 {"eps", rep.eps},             {"killed_mass", rep.killed_mass}};
  j["order"] = order_json(g, rep.order);
  j["coincidence_fraction"] = coincidence_fraction(g, art.sol.vp, rep.eps);
  j["potential"] = {{"monotonicity", art.pot_checks.monotonicity},
                    {"endpoint_start", art.pot_checks.endpoint_start},
                    {"endpoint_final", art.pot_checks.endpoint_final},
                    {"barrier_constancy", art.pot_checks.barrier_constancy},
                    {"pass", art.pot_checks.pass}};
  j["qv"] = {{"sup", art.qv.sup}, {"l1", art.qv.l1}};
  if (has_barrier) {
    const Barrier& b = *art.barrier;
    int never = 0;
    for (int s : b.s)
      if (s == Barrier::kNever) ++never;
    j["barrier"] = {{"direction",
                     b.direction == Barrier::Direction::forward ? "forward" : "backward"},
                    {"never_count", never},
                    {"t0_total", b.t0_mass.size() > 0 ? b.t0_mass.sum() : 0.0},
                    // Without full convergence the stopped mass does not sum to the
                    // target, so the start-time atom min(m_0, nu) is an extrapolation
                    // rather than an identity; surface that in the report.
                    {"t0_extrapolated", b.t0_mass.size() > 0 && !rep.converged},
                    {"eps_used", b.eps_used}};
    j["transport_target_tv"] = art.transport_target_tv;
    j["flux"] = {{"l1", art.flux.l1},
                 {"applicable", art.flux.applicable},
                 {"degenerate", art.flux.degenerate},
                 {"balance_sup", art.flux.balance_sup}};
    j["mc"] = mc_json(*art.mc, tv_distance(art.mc->empirical, art.nu.w));
  }
  j["config"] = config_echo(cfg);

  if (write_files) {
    fs::create_directories(dir);
    std::map<std::string, std::string> files;
    files["eta.csv"] = format_field_csv(g, art.sol.fp.eta);
    files["rho.csv"] = format_field_csv(g, art.sol.fp.rho);
    files["J.csv"] = format_field_csv(g, art.sol.vp.J);
    files["U.csv"] = format_field_csv(g, art.potential->U);
    if (has_barrier) {
      files["barrier.csv"] = format_barrier_csv(g, *art.barrier);
      files["montecarlo.csv"] = format_mc_csv(g, *art.mc, art.nu);
    }
    files["report.json"] = j.dump(2) + "\n";
    for (const auto& [name, text] : files) {
      const std::string p = dir + "/" + name;
      write_text(p, text);
      art.files.push_back(p);
    }
  }
  return code;
}

int run_verify(const RunConfig& cfg, std::vector<CheckRow>* rows_out, bool write_files) {
  std::vector<CheckRow> local_rows;
  std::vector<CheckRow>& rows = (rows_out != nullptr) ? *rows_out : local_rows;
  rows.clear();

  SolveArtifacts art;
  run_solve(cfg, &art, false);
  const Grid& g = *art.grid;
  const AscendReport& rep = art.sol.report;

  const auto add = [&rows](std::string name, bool pass, double value, double tol,
                           std::string note = "", bool skipped = false) {
    CheckRow row;
    row.name = std::move(name);
    row.pass = pass || skipped;
    row.skipped = skipped;
    row.value = value;
    row.tol = tol;
    row.note = std::move(note);
    rows.push_back(std::move(row));
  };

  add("order", rep.order.ordered, rep.order.max_violation, 1e-10,
      rep.order.ordered ? "" : "order violated at node " + std::to_string(rep.order.worst_node));

  const std::string dir = resolved_out_dir(cfg);
  const auto finish = [&](int code) {
    if (write_files) {
      json j;
      j["exit_code"] = code;
      json arr = json::array();
      for (const CheckRow& r : rows)
        arr.push_back({{"name", r.name},
                       {"pass", r.pass},
                       {"skipped", r.skipped},
                       {"value", r.value},
                       {"tol", r.tol},
                       {"note", r.note}});
      j["checks"] = std::move(arr);
      j["config"] = config_echo(cfg);
      fs::create_directories(dir);
      write_text(dir + "/verify_report.json", j.dump(2) + "\n");
    }
    return code;
  };

  if (rep.infeasible) return finish(2);

  const double scale = std::max(1.0, std::abs(rep.primal));
  const AdmissibilityResidual adm = admissibility_residual(g, art.sol.fp, art.mu, art.nu);
  add("evolution_residual", adm.evolution <= 1e-12, adm.evolution, 1e-12);
  add("negativity", adm.negativity <= 1e-15, adm.negativity, 1e-15);
  add("target_tv", rep.target_tv <= cfg.solver.tol, rep.target_tv, cfg.solver.tol);
  const double wd = std::max(0.0, rep.dual - rep.primal);
  add("weak_duality", wd <= 1e-12 * scale, wd, 1e-12 * scale);
  add("duality_gap", rep.gap <= cfg.solver.tol * scale, rep.gap, cfg.solver.tol * scale);
  add("slackness", rep.slackness <= 10.0 * cfg.solver.tol * scale, rep.slackness,
      10.0 * cfg.solver.tol * scale);

  const auto kind = cfg.lagrangian.kind;
  if (kind == LagrangianSpec::Kind::increasing || kind == LagrangianSpec::Kind::decreasing ||
      kind == LagrangianSpec::Kind::stationary) {
    const MonotonicityReport m = monotonicity_check(g, art.sol.vp, cfg.lagrangian);
    add("value_monotonicity", m.pass, m.violation, 1e-12);
  } else {
    add("value_monotonicity", true, 0.0, 0.0, "no monotone class for this cost kind", true);
  }

  const double heat = heat_comparison(g, art.sol.fp, art.mu);
  add("heat_comparison", heat <= 1e-12, heat, 1e-12);

  const double ptol = potential_tol(*art.potential);
  add("potential_monotonicity", art.pot_checks.monotonicity <= ptol, art.pot_checks.monotonicity,
      ptol);
  add("potential_endpoint_start", art.pot_checks.endpoint_start <= ptol,
      art.pot_checks.endpoint_start, ptol);
  add("potential_barrier_constancy", art.pot_checks.barrier_constancy <= ptol,
      art.pot_checks.barrier_constancy, ptol);
  add("potential_endpoint_final", true, art.pot_checks.endpoint_final, 0.0,
      "informational: scales with the target residual", true);

  if (art.transport)
    add("transport_tv", art.transport_target_tv <= 10.0 * cfg.solver.tol,
        art.transport_target_tv, 10.0 * cfg.solver.tol);
  else
    add("transport_tv", true, 0.0, 0.0, "no barrier class for this cost kind", true);

  {
    OracleOptions oo;
    const long vars = static_cast<long>(g.horizon()) * g.n() +
                      static_cast<long>(g.horizon() + 1) * g.n();
    if (vars > oo.max_variables) {
      add("oracle_gap", true, 0.0, 0.0, "skipped: instance exceeds the oracle size guard", true);
    } else {
      const OracleSolution lp = solve_lp_exact(g, art.mu, art.nu, cfg.lagrangian, oo);
      if (lp.status != OracleSolution::Status::optimal) {
        add("oracle_gap", false, 0.0, 0.0, "exact oracle reports infeasible");
      } else {
        const double lp_cost = lp.cost.get_d();
        const double diff = std::abs(lp_cost - rep.primal);
        const double otol = 1e-8 * std::max(1.0, std::abs(lp_cost));
        add("oracle_gap", diff <= otol, diff, otol);
      }
    }
  }

  if (art.mc) {
    const long enough = 100000;
    const double tv = tv_distance(art.mc->empirical, art.nu.w);
    if (art.mc->n_paths >= enough)
      add("mc_tv", tv <= 0.02, tv, 0.02);
    else
      add("mc_tv", true, tv, 0.02, "informational: fewer than 100000 paths", true);
    const double cost_diff = std::abs(art.mc->mean_cost - rep.primal);
    const double ctol = 3.0 * art.mc->stderr_cost + 1e-12;
    add("mc_cost", cost_diff <= ctol, cost_diff, ctol);
    add("mc_martingale", art.mc->martingale_ok,
        std::abs(art.mc->mean_reward - art.mc->expected_reward), 3.0 * art.mc->stderr_reward);
  } else {
    add("mc_tv", true, 0.0, 0.0, "no barrier class for this cost kind", true);
  }

  if (art.barrier)
    add("flux_l1", true, art.flux.l1, 0.0, "informational: shrinks under mesh refinement", true);
  add("qv_sup", true, art.qv.sup, 0.0, "informational: shrinks under mesh refinement", true);
  add("qv_l1", true, art.qv.l1, 0.0, "informational: shrinks under mesh refinement", true);

  if (!cfg.golden_dir.empty()) {
    std::map<std::string, std::string> gen;
    gen["eta.csv"] = format_field_csv(g, art.sol.fp.eta);
    gen["rho.csv"] = format_field_csv(g, art.sol.fp.rho);
    gen["J.csv"] = format_field_csv(g, art.sol.vp.J);
    gen["U.csv"] = format_field_csv(g, art.potential->U);
    if (art.barrier) gen["barrier.csv"] = format_barrier_csv(g, *art.barrier);
    if (art.mc) gen["montecarlo.csv"] = format_mc_csv(g, *art.mc, art.nu);
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(cfg.golden_dir))
      if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    for (const std::string& name : names) {
      const auto it = gen.find(name);
      if (it == gen.end()) {
        add("golden:" + name, true, 0.0, 0.0, "no comparator for this file", true);
        continue;
      }
      const std::string want = read_text(cfg.golden_dir + "/" + name);
      const bool eq = (want == it->second);
      add("golden:" + name, eq, eq ? 0.0 : 1.0, 0.0, eq ? "" : "byte mismatch");
    }
  }

  bool any_fail = false;
  for (const CheckRow& r : rows)
    if (!r.pass && !r.skipped) any_fail = true;
  return finish(any_fail ? 1 : 0);
}

int run_simulate(const RunConfig& cfg, McResult* out, bool write_files) {
  SolveArtifacts art;
  const int code = run_solve(cfg, &art, false);
  if (code == 2) return 2;
  if (!art.barrier || !art.mc)
    throw std::invalid_argument("simulate: this cost kind has no barrier to simulate against");
  const Grid& g = *art.grid;
  if (out != nullptr) *out = *art.mc;
  if (write_files) {
    const std::string dir = resolved_out_dir(cfg);
    fs::create_directories(dir);
    write_text(dir + "/montecarlo.csv", format_mc_csv(g, *art.mc, art.nu));
    json j;
    j["status"] = (code == 0) ? "converged" : "not_converged";
    j["exit_code"] = code;
    j["mc"] = mc_json(*art.mc, tv_distance(art.mc->empirical, art.nu.w));
    j["solver"] = {{"primal", art.sol.report.primal},
                   {"dual", art.sol.report.dual},
                   {"gap", art.sol.report.gap},
                   {"target_tv", art.sol.report.target_tv}};
    j["config"] = config_echo(cfg);
    write_text(dir + "/simulate_report.json", j.dump(2) + "\n");
  }
  return code;
}

}  // namespace skorokhod
