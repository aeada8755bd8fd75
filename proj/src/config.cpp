#include "skorokhod/config.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>

namespace skorokhod {

namespace {

using nlohmann::json;

void expect_keys(const json& j, const std::string& where,
                 std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw std::invalid_argument("config: unknown key \"" + it.key() + "\" in " + where);
  }
}

const json& need(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end())
    throw std::invalid_argument("config: missing key \"" + std::string(key) + "\" in " + where);
  return *it;
}

Vector parse_vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw std::invalid_argument("config: " + where + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& e : j) v[i++] = e.get<double>();
  return v;
}

GridConfig parse_grid(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: grid must be an object");
  expect_keys(j, "grid", {"x_min", "x_max", "n_interior", "ratio", "horizon_steps"});
  GridConfig g;
  g.x_min = need(j, "x_min", "grid").get<double>();
  g.x_max = need(j, "x_max", "grid").get<double>();
  g.n_interior = need(j, "n_interior", "grid").get<int>();
  g.ratio = need(j, "ratio", "grid").get<double>();
  g.horizon_steps = need(j, "horizon_steps", "grid").get<int>();
  return g;
}

MeasureSpec parse_measure(const json& j, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  const std::string kind = need(j, "kind", where).get<std::string>();
  MeasureSpec s;
  if (kind == "uniform_range") {
    expect_keys(j, where, {"kind", "lo_index", "hi_index", "normalize"});
    s = MeasureSpec::uniform_range(need(j, "lo_index", where).get<int>(),
                                   need(j, "hi_index", where).get<int>());
  } else if (kind == "sine_profile") {
    expect_keys(j, where, {"kind", "period", "normalize"});
    s = MeasureSpec::sine_profile(need(j, "period", where).get<double>());
  } else if (kind == "point") {
    expect_keys(j, where, {"kind", "index", "normalize"});
    s = MeasureSpec::point(need(j, "index", where).get<int>());
  } else if (kind == "table") {
    expect_keys(j, where, {"kind", "values", "normalize"});
    s = MeasureSpec::table(parse_vector(need(j, "values", where), where + ".values"));
  } else {
    throw std::invalid_argument("config: unknown measure kind \"" + kind + "\" in " + where);
  }
  s.normalize = j.value("normalize", true);
  return s;
}

LagrangianSpec parse_lagrangian(const json& j) {
  const std::string where = "lagrangian";
  if (!j.is_object()) throw std::invalid_argument("config: lagrangian must be an object");
  const std::string kind = need(j, "kind", where).get<std::string>();
  if (kind == "increasing" || kind == "decreasing") {
    expect_keys(j, where, {"kind", "a", "b"});
    const double a = need(j, "a", where).get<double>();
    const double b = need(j, "b", where).get<double>();
    return kind == "increasing" ? LagrangianSpec::increasing(a, b)
                                : LagrangianSpec::decreasing(a, b);
  }
  if (kind == "stationary") {
    expect_keys(j, where, {"kind", "a", "values"});
    if (j.contains("values"))
      return LagrangianSpec::stationary(parse_vector(j.at("values"), "lagrangian.values"));
    return LagrangianSpec::stationary(need(j, "a", where).get<double>());
  }
  if (kind == "oscillating") {
    expect_keys(j, where, {"kind", "a"});
    return LagrangianSpec::oscillating(need(j, "a", where).get<double>());
  }
  if (kind == "table") {
    expect_keys(j, where, {"kind", "values"});
    const json& rows = need(j, "values", where);
    if (!rows.is_array() || rows.empty())
      throw std::invalid_argument("config: lagrangian.values must be a nonempty 2D array");
    const Eigen::Index K = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index n = static_cast<Eigen::Index>(rows.front().size());
    Field f(K, n);
    Eigen::Index k = 0;
    for (const auto& row : rows) {
      if (static_cast<Eigen::Index>(row.size()) != n)
        throw std::invalid_argument("config: ragged lagrangian.values table");
      Eigen::Index i = 0;
      for (const auto& e : row) f(k, i++) = e.get<double>();
      ++k;
    }
    return LagrangianSpec::table(std::move(f));
  }
  throw std::invalid_argument("config: unknown lagrangian kind \"" + kind + "\"");
}

AscendOptions parse_solver(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: solver must be an object");
  expect_keys(j, "solver",
              {"max_iter", "tol", "eps", "alpha0", "epochs", "decay", "average_every",
               "normalize"});
  AscendOptions o;
  o.max_iter = j.value("max_iter", o.max_iter);
  o.tol = j.value("tol", o.tol);
  o.eps = j.value("eps", o.eps);
  o.alpha0 = j.value("alpha0", o.alpha0);
  o.epochs = j.value("epochs", o.epochs);
  o.decay = j.value("decay", o.decay);
  o.average_every = j.value("average_every", o.average_every);
  o.normalize = j.value("normalize", o.normalize);
  return o;
}

McOptions parse_mc(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: mc must be an object");
  expect_keys(j, "mc", {"n_paths", "seed", "threads"});
  McOptions o;
  o.n_paths = j.value("n_paths", o.n_paths);
  o.seed = j.value("seed", o.seed);
  o.threads = j.value("threads", o.threads);
  return o;
}

json measure_to_json(const MeasureSpec& s) {
  json j;
  switch (s.kind) {
    case MeasureSpec::Kind::uniform_range:
      j["kind"] = "uniform_range";
      j["lo_index"] = s.lo_index;
      j["hi_index"] = s.hi_index;
      break;
    case MeasureSpec::Kind::sine_profile:
      j["kind"] = "sine_profile";
      j["period"] = s.period;
      break;
    case MeasureSpec::Kind::point:
      j["kind"] = "point";
      j["index"] = s.index;
      break;
    case MeasureSpec::Kind::table: {
      j["kind"] = "table";
      json arr = json::array();
      for (Eigen::Index i = 0; i < s.values.size(); ++i) arr.push_back(s.values[i]);
      j["values"] = std::move(arr);
      break;
    }
  }
  j["normalize"] = s.normalize;
  return j;
}

json lagrangian_to_json(const LagrangianSpec& s) {
  json j;
  switch (s.kind) {
    case LagrangianSpec::Kind::increasing:
      j["kind"] = "increasing";
      j["a"] = s.a;
      j["b"] = s.b;
      break;
    case LagrangianSpec::Kind::decreasing:
      j["kind"] = "decreasing";
      j["a"] = s.a;
      j["b"] = s.b;
      break;
    case LagrangianSpec::Kind::stationary:
      j["kind"] = "stationary";
      if (s.stationary_values.size() > 0) {
        json arr = json::array();
        for (Eigen::Index i = 0; i < s.stationary_values.size(); ++i)
          arr.push_back(s.stationary_values[i]);
        j["values"] = std::move(arr);
      } else {
        j["a"] = s.a;
      }
      break;
    case LagrangianSpec::Kind::oscillating:
      j["kind"] = "oscillating";
      j["a"] = s.a;
      break;
    case LagrangianSpec::Kind::table: {
      j["kind"] = "table";
      json rows = json::array();
      for (Eigen::Index k = 0; k < s.table_values.rows(); ++k) {
        json row = json::array();
        for (Eigen::Index i = 0; i < s.table_values.cols(); ++i)
          row.push_back(s.table_values(k, i));
        rows.push_back(std::move(row));
      }
      j["values"] = std::move(rows);
      break;
    }
  }
  return j;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"tiny3", "figure1-increasing", "figure1-decreasing", "figure2",
          "figure1-increasing-fine"};
}

RunConfig preset_config(const std::string& name) {
  RunConfig cfg;
  if (name == "tiny3") {
    cfg.grid = {0.0, 4.0, 3, 1.0, 2};
    cfg.mu = MeasureSpec::point(2);
    Vector nu(3);
    nu << 0.5, 0.0, 0.5;
    cfg.nu = MeasureSpec::table(std::move(nu));
    cfg.lagrangian = LagrangianSpec::increasing(1.0, 1.0);
    cfg.solver.tol = 1e-10;
    cfg.output_dir = "out/tiny3";
    return cfg;
  }
  if (name == "figure1-increasing" || name == "figure1-decreasing" || name == "figure2") {
    cfg.grid = {0.0, 40.0, 39, 1.0, 400};
    cfg.mu = MeasureSpec::uniform_range(16, 23);
    cfg.nu = MeasureSpec::sine_profile(13.0);
    if (name == "figure1-increasing")
      cfg.lagrangian = LagrangianSpec::increasing(1.0, 1.0);
    else if (name == "figure1-decreasing")
      cfg.lagrangian = LagrangianSpec::decreasing(1.0, 1.0);
    else
      cfg.lagrangian = LagrangianSpec::oscillating(1.0);
    cfg.solver.tol = 1e-3;
    cfg.output_dir = "out/" + name;
    return cfg;
  }
  if (name == "figure1-increasing-fine") {
    cfg.grid = {0.0, 40.0, 79, 1.0, 1600};
    cfg.mu = MeasureSpec::uniform_range(32, 46);
    cfg.nu = MeasureSpec::sine_profile(13.0);
    cfg.lagrangian = LagrangianSpec::increasing(1.0, 1.0);
    cfg.solver.tol = 1e-3;
    cfg.output_dir = "out/figure1-increasing-fine";
    return cfg;
  }
  throw std::invalid_argument("unknown preset \"" + name + "\"");
}

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: JSON parse failed: ") + e.what());
  }
  try {
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    expect_keys(j, "config",
                {"grid", "mu", "nu", "lagrangian", "solver", "mc", "output_dir", "golden_dir"});
    RunConfig cfg;
    cfg.grid = parse_grid(need(j, "grid", "config"));
    cfg.mu = parse_measure(need(j, "mu", "config"), "mu");
    cfg.nu = parse_measure(need(j, "nu", "config"), "nu");
    cfg.lagrangian = parse_lagrangian(need(j, "lagrangian", "config"));
    if (j.contains("solver")) cfg.solver = parse_solver(j.at("solver"));
    if (j.contains("mc")) cfg.mc = parse_mc(j.at("mc"));
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.golden_dir = j.value("golden_dir", cfg.golden_dir);
    return cfg;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("config: cannot open \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["grid"] = {{"x_min", cfg.grid.x_min},
               {"x_max", cfg.grid.x_max},
               {"n_interior", cfg.grid.n_interior},
               {"ratio", cfg.grid.ratio},
               {"horizon_steps", cfg.grid.horizon_steps}};
  j["mu"] = measure_to_json(cfg.mu);
  j["nu"] = measure_to_json(cfg.nu);
  j["lagrangian"] = lagrangian_to_json(cfg.lagrangian);
  j["solver"] = {{"max_iter", cfg.solver.max_iter},
                 {"tol", cfg.solver.tol},
                 {"eps", cfg.solver.eps},
                 {"alpha0", cfg.solver.alpha0},
                 {"epochs", cfg.solver.epochs},
                 {"decay", cfg.solver.decay},
                 {"average_every", cfg.solver.average_every},
                 {"normalize", cfg.solver.normalize}};
  j["mc"] = {{"n_paths", cfg.mc.n_paths}, {"seed", cfg.mc.seed}, {"threads", cfg.mc.threads}};
  j["output_dir"] = cfg.output_dir;
  j["golden_dir"] = cfg.golden_dir;
  return j.dump(2) + "\n";
}

}  // namespace skorokhod
