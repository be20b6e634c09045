#include "cnls/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cnls {

using json = nlohmann::ordered_json;

namespace {

std::string fnv1a_hex(const std::string& bytes) {
  unsigned long long h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

json preset_document(const std::string& name) {
  // canonical benchmark coefficients: confining b = 1 + r^2, V = gamma = 1
  json pots = {
      {"b1", {{"family", "harmonic"}, {"offset", 1.0}, {"scale", 1.0}}},
      {"b2", {{"family", "harmonic"}, {"offset", 1.0}, {"scale", 1.0}}},
      {"V1", {{"family", "constant"}, {"value", 1.0}}},
      {"V2", {{"family", "constant"}, {"value", 1.0}}},
      {"gamma", {{"family", "constant"}, {"value", 1.0}}},
      {"b1_floor", 1.0},
      {"b2_floor", 1.0},
  };
  json doc = {
      {"problem",
       {{"grid",
         {{"dimension", 3}, {"radius", 12.0}, {"n_nodes", 400}, {"mode", "radial"}}},
        {"potentials", pots}}},
  };
  if (name == "eq1.11") {
    doc["problem"]["nonlinearity"] = {{"kind", "quartic_coupled"},
                                      {"theta", 1.0}};
  } else if (name == "eq1.10") {
    doc["problem"]["nonlinearity"] = {
        {"kind", "power_sum"},
        {"p1", 4.0},
        {"p2", 4.0},
        {"c1", {{"family", "constant"}, {"value", 1.0}}},
        {"c2", {{"family", "constant"}, {"value", 1.0}}},
        {"theta", 1.0}};
  } else {
    throw ConfigError("config: unknown preset '" + name + "'");
  }
  return doc;
}

PotentialFamily parse_family(const json& j, const std::string& where) {
  if (!j.is_object())
    throw ConfigError("config: " + where + " must be an object");
  PotentialFamily fam;
  fam.family = j.value("family", "constant");
  fam.value = j.value("value", 0.0);
  fam.offset = j.value("offset", 0.0);
  fam.scale = j.value("scale", 1.0);
  fam.depth = j.value("depth", 1.0);
  fam.width = j.value("width", 1.0);
  fam.inner = j.value("inner", 0.0);
  fam.outer = j.value("outer", 0.0);
  fam.r_step = j.value("r_step", 1.0);
  if (fam.family != "constant" && fam.family != "harmonic" &&
      fam.family != "gaussian_well" && fam.family != "step")
    throw ConfigError("config: " + where + " has unknown family '" +
                      fam.family + "'");
  return fam;
}

LambdaRequest parse_lambda(const json& j) {
  LambdaRequest req;
  req.text = j.dump();
  if (j.is_number()) {
    req.kind = LambdaRequest::Kind::Value;
    req.value = j.get<double>();
    return req;
  }
  if (j.is_object()) {
    if (j.contains("mu")) {
      req.kind = LambdaRequest::Kind::MuMultiple;
      req.mu_index = j.at("mu").get<int>();
      req.factor = j.value("factor", 1.0);
      return req;
    }
    if (j.contains("mu_mid")) {
      req.kind = LambdaRequest::Kind::MuMidpoint;
      const auto& pair = j.at("mu_mid");
      if (!pair.is_array() || pair.size() != 2)
        throw ConfigError("config: mu_mid needs two eigenvalue indices");
      req.mu_i = pair[0].get<int>();
      req.mu_j = pair[1].get<int>();
      return req;
    }
  }
  throw ConfigError(
      "config: lambda entries must be numbers, {mu, factor} or {mu_mid}");
}

}  // namespace

Eigen::VectorXd sample_family(const PotentialFamily& fam, const Grid& grid) {
  const int n = grid.n_interior;
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    const double r = std::abs(grid.interior_node(i));
    if (fam.family == "constant")
      out[i] = fam.value;
    else if (fam.family == "harmonic")
      out[i] = fam.offset + fam.scale * r * r;
    else if (fam.family == "gaussian_well")
      out[i] = fam.offset - fam.depth * std::exp(-(r / fam.width) * (r / fam.width));
    else
      out[i] = r < fam.r_step ? fam.inner : fam.outer;
  }
  return out;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json user;
  try {
    user = json::parse(json_text);
  } catch (const json::parse_error& err) {
    throw ConfigError(std::string("config: JSON parse error: ") + err.what());
  }
  if (!user.is_object()) throw ConfigError("config: document must be an object");

  json doc = json::object();
  if (user.contains("preset"))
    doc = preset_document(user.at("preset").get<std::string>());
  doc.merge_patch(user);

  ExperimentConfig cfg;
  cfg.config_hash = fnv1a_hex(doc.dump());
  cfg.preset = doc.value("preset", "");
  cfg.seed = doc.value("seed", 42ull);

  try {
    const json& problem = doc.at("problem");
    const json& gridj = problem.at("grid");
    cfg.grid.dimension = gridj.value("dimension", 1);
    cfg.grid.radius = gridj.value("radius", 1.0);
    cfg.grid.n_nodes = gridj.value("n_nodes", 0);
    const std::string mode = gridj.value("mode", "radial");
    if (mode == "radial")
      cfg.grid.mode = GridMode::Radial;
    else if (mode == "full_line")
      cfg.grid.mode = GridMode::FullLine1D;
    else
      throw ConfigError("config: grid.mode must be 'radial' or 'full_line'");

    const json& pots = problem.at("potentials");
    cfg.b1 = parse_family(pots.at("b1"), "potentials.b1");
    cfg.b2 = parse_family(pots.at("b2"), "potentials.b2");
    cfg.V1 = parse_family(pots.at("V1"), "potentials.V1");
    cfg.V2 = parse_family(pots.at("V2"), "potentials.V2");
    cfg.gamma = parse_family(pots.at("gamma"), "potentials.gamma");
    cfg.b1_floor = pots.value("b1_floor", 1.0);
    cfg.b2_floor = pots.value("b2_floor", 1.0);

    const json& nl = problem.at("nonlinearity");
    cfg.nl_kind = nl.value("kind", "quartic_coupled");
    cfg.theta = nl.value("theta", 1.0);
    if (cfg.nl_kind == "power_sum") {
      cfg.p1 = nl.at("p1").get<double>();
      cfg.p2 = nl.at("p2").get<double>();
      cfg.c1 = parse_family(nl.at("c1"), "nonlinearity.c1");
      cfg.c2 = parse_family(nl.at("c2"), "nonlinearity.c2");
    } else if (cfg.nl_kind != "quartic_coupled" &&
               cfg.nl_kind != "custom_quadratic") {
      throw ConfigError("config: unknown nonlinearity kind '" + cfg.nl_kind +
                        "'");
    }

    if (!doc.contains("lambdas") || !doc.at("lambdas").is_array() ||
        doc.at("lambdas").empty())
      throw ConfigError("config: lambdas must be a nonempty array");
    for (const auto& j : doc.at("lambdas")) cfg.lambdas.push_back(parse_lambda(j));

    if (doc.contains("solver")) {
      const json& s = doc.at("solver");
      cfg.solver.r_plus = s.value("r_plus", 0.0);
      cfg.solver.r_minus = s.value("r_minus", 0.0);
      cfg.solver.flow_step = s.value("flow_step", 1.0);
      cfg.solver.max_iters = s.value("max_iters", 4000);
      cfg.solver.residual_tol = s.value("residual_tol", 1e-9);
      cfg.solver.newton_switch_tol = s.value("newton_switch_tol", 1e-3);
      cfg.solver.multistart = s.value("multistart", 8);
      cfg.solver.path_points = s.value("path_points", 25);
      cfg.solver.probe_count = s.value("probe_count", 200);
      cfg.solver.r_scan_min = s.value("r_scan_min", 1e-3);
      cfg.solver.r_scan_max = s.value("r_scan_max", 10.0);
      cfg.solver.r_scan_points = s.value("r_scan_points", 40);
      cfg.solver.radius_cap = s.value("radius_cap", 1e3);
      cfg.k_max = s.value("k_max", 12);
    }
    cfg.solver.seed = cfg.seed;

    if (doc.contains("outputs")) {
      const json& o = doc.at("outputs");
      cfg.out_dir = o.value("dir", "out");
      if (o.contains("formats")) {
        cfg.write_json = false;
        cfg.write_csv = false;
        for (const auto& f : o.at("formats")) {
          if (f == "json") cfg.write_json = true;
          else if (f == "csv") cfg.write_csv = true;
          else throw ConfigError("config: unknown output format");
        }
      }
    }
  } catch (const json::exception& err) {
    throw ConfigError(std::string("config: ") + err.what());
  }

  // structural validation before any numerics
  if (cfg.grid.n_nodes < 8)
    throw ConfigError("config: grid.n_nodes must be at least 8");
  if (cfg.grid.radius <= 0.0 || cfg.grid.dimension < 1)
    throw ConfigError("config: bad grid geometry");
  try {
    validate_solver_config(cfg.solver);
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }
  if (cfg.k_max < 1) throw ConfigError("config: k_max must be positive");
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

ProblemSpec instantiate_problem(const ExperimentConfig& cfg, const Grid& grid,
                                double lambda) {
  ProblemSpec spec;
  spec.grid_spec = cfg.grid;
  spec.lambda = lambda;
  spec.potentials.b1 = sample_family(cfg.b1, grid);
  spec.potentials.b2 = sample_family(cfg.b2, grid);
  spec.potentials.V1 = sample_family(cfg.V1, grid);
  spec.potentials.V2 = sample_family(cfg.V2, grid);
  spec.potentials.gamma = sample_family(cfg.gamma, grid);
  spec.potentials.b1_floor = cfg.b1_floor;
  spec.potentials.b2_floor = cfg.b2_floor;

  if (cfg.nl_kind == "quartic_coupled") {
    spec.nonlinearity = make_quartic_coupled();
  } else if (cfg.nl_kind == "power_sum") {
    spec.nonlinearity = make_power_sum(sample_family(cfg.c1, grid),
                                       sample_family(cfg.c2, grid), cfg.p1,
                                       cfg.p2);
  } else {
    spec.nonlinearity = make_quadratic_custom();
  }
  spec.nonlinearity.theta = cfg.theta;
  return spec;
}

double resolve_lambda(const LambdaRequest& req,
                      const std::vector<double>& mus) {
  auto mu_at = [&](int index) {
    if (index < 1 || index > static_cast<int>(mus.size()))
      throw ConfigError(
          "config: lambda entry references an eigenvalue beyond the computed "
          "sequence; raise k_max");
    return mus[index - 1];
  };
  switch (req.kind) {
    case LambdaRequest::Kind::Value:
      return req.value;
    case LambdaRequest::Kind::MuMultiple:
      return req.factor * mu_at(req.mu_index);
    case LambdaRequest::Kind::MuMidpoint:
      return 0.5 * (mu_at(req.mu_i) + mu_at(req.mu_j));
  }
  return 0.0;
}

}  // namespace cnls
