#include "cnls/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <thread>

#include <json.hpp>

#include "cnls/pencil.hpp"
#include "cnls/version.hpp"

namespace cnls {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

json meta_block(const ExperimentConfig& cfg) {
  return {{"artifact_version", CNLS_VERSION},
          {"config_hash", cfg.config_hash},
          {"seed", cfg.seed}};
}

json family_echo(const PotentialFamily& fam) {
  json j = {{"family", fam.family}};
  if (fam.family == "constant") j["value"] = fam.value;
  if (fam.family == "harmonic") {
    j["offset"] = fam.offset;
    j["scale"] = fam.scale;
  }
  if (fam.family == "gaussian_well") {
    j["offset"] = fam.offset;
    j["depth"] = fam.depth;
    j["width"] = fam.width;
  }
  if (fam.family == "step") {
    j["inner"] = fam.inner;
    j["outer"] = fam.outer;
    j["r_step"] = fam.r_step;
  }
  return j;
}

json config_echo(const ExperimentConfig& cfg) {
  json grid = {{"dimension", cfg.grid.dimension},
               {"radius", cfg.grid.radius},
               {"n_nodes", cfg.grid.n_nodes},
               {"mode", cfg.grid.mode == GridMode::Radial ? "radial"
                                                          : "full_line"}};
  json nl = {{"kind", cfg.nl_kind}, {"theta", cfg.theta}};
  if (cfg.nl_kind == "power_sum") {
    nl["p1"] = cfg.p1;
    nl["p2"] = cfg.p2;
    nl["c1"] = family_echo(cfg.c1);
    nl["c2"] = family_echo(cfg.c2);
  }
  return {{"preset", cfg.preset},
          {"grid", grid},
          {"potentials",
           {{"b1", family_echo(cfg.b1)},
            {"b2", family_echo(cfg.b2)},
            {"V1", family_echo(cfg.V1)},
            {"V2", family_echo(cfg.V2)},
            {"gamma", family_echo(cfg.gamma)},
            {"b1_floor", cfg.b1_floor},
            {"b2_floor", cfg.b2_floor}}},
          {"nonlinearity", nl},
          {"solver",
           {{"residual_tol", cfg.solver.residual_tol},
            {"newton_switch_tol", cfg.solver.newton_switch_tol},
            {"max_iters", cfg.solver.max_iters},
            {"flow_step", cfg.solver.flow_step},
            {"path_points", cfg.solver.path_points},
            {"probe_count", cfg.solver.probe_count},
            {"multistart", cfg.solver.multistart},
            {"k_max", cfg.k_max}}}};
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string lambda_tag(double lambda) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", lambda);
  return buf;
}

struct PreparedProblem {
  Grid grid;
  std::optional<FunctionalContext> ctx;
  EigenSeq seq;
};

PreparedProblem prepare(const ExperimentConfig& cfg, double lambda) {
  PreparedProblem prep{build_grid(cfg.grid), std::nullopt, {}};
  ProblemSpec spec = instantiate_problem(cfg, prep.grid, lambda);
  spec = sign_normalize(spec);
  prep.ctx.emplace(prep.grid, spec.potentials, spec.nonlinearity);
  PencilOptions popt;
  popt.k_max = cfg.k_max;
  popt.seed = cfg.seed;
  prep.seq = solve_pencil(*prep.ctx, popt);
  return prep;
}

json spectrum_json(const ExperimentConfig& cfg, const FunctionalContext& ctx,
                   const EigenSeq& seq) {
  json mus = json::array();
  for (size_t k = 0; k < seq.mus.size(); ++k)
    mus.push_back({{"index", k + 1},
                   {"mu", seq.mus[k]},
                   {"j_norm", functional_J(ctx, seq.vectors[k])},
                   {"residual", seq.residuals[k]}});
  json doc = meta_block(cfg);
  doc["config"] = config_echo(cfg);
  doc["k_max"] = cfg.k_max;
  doc["positive_direction_check"] =
      seq.positive_modes_found ? "pass" : "fail";
  doc["n_zero_modes"] = seq.n_zero_modes;
  doc["mus"] = mus;
  doc["neg_mus"] = seq.neg_mus;
  return doc;
}

}  // namespace

int run_spectrum(const ExperimentConfig& cfg) {
  PreparedProblem prep = prepare(cfg, 0.0);
  if (cfg.write_json)
    write_text(fs::path(cfg.out_dir) / "spectrum.json",
               spectrum_json(cfg, *prep.ctx, prep.seq).dump(2) + "\n");
  return kExitOk;
}

namespace {

struct LambdaOutcome {
  SweepRow row;
  json result;
  std::string profile_csv;
};

LambdaOutcome solve_one(const ExperimentConfig& cfg, const Grid& grid,
                        const FunctionalContext& ctx, const EigenSeq& seq,
                        const LambdaRequest& request, double lambda_raw,
                        size_t index) {
  LambdaOutcome out;
  const bool flipped = lambda_raw < 0.0;
  const double lambda = std::abs(lambda_raw);

  out.result = meta_block(cfg);
  out.result["config"] = config_echo(cfg);
  out.result["lambda_request"] = request.text;
  out.result["lambda"] = lambda_raw;
  out.result["lambda_normalized"] = lambda;
  out.result["sign_flipped"] = flipped;
  out.row.lambda = lambda_raw;

  SolverConfig scfg = cfg.solver;
  scfg.seed = cfg.seed + 1000 * index;

  try {
    const ConeGeometry geom = locate_lambda(seq, lambda);
    out.result["m"] = geom.m;
    out.result["mu_m"] = geom.mu_m ? json(*geom.mu_m) : json(nullptr);
    out.result["mu_m1"] =
        std::isfinite(geom.mu_m1) ? json(geom.mu_m1) : json(nullptr);
    out.row.m = geom.m;

    CriticalPoint cp = geom.m == 0 ? mountain_pass(ctx, scfg, geom, lambda)
                                   : linking_flow(ctx, scfg, geom, lambda);

    const StrongResidual strong = residual_check(ctx, cp.state, lambda);
    const CeramiReport cer = cerami_monitor(cp.cerami_trace);

    out.row.level = cp.level;
    out.row.residual = cp.residual;
    out.row.u1_norm = cp.component_norms.first;
    out.row.u2_norm = cp.component_norms.second;
    out.row.iterations = cp.iterations;
    out.row.accepted = cp.converged && cp.nontrivial;
    out.row.note = cp.failure_reason;

    out.result["accepted"] = out.row.accepted;
    out.result["level"] = cp.level;
    out.result["residual"] = cp.residual;
    out.result["iterations"] = cp.iterations;
    out.result["component_norms"] = {cp.component_norms.first,
                                     cp.component_norms.second};
    out.result["r_plus"] = cp.r_plus;
    out.result["alpha"] = cp.alpha;
    out.result["r_minus"] = cp.r_minus;
    out.result["frozen_max_psi"] = cp.frozen_max_psi;
    out.result["strong_residuals"] = {strong.res1, strong.res2};
    out.result["cerami"] = {{"final_level", cer.final_level},
                            {"final_compactness", cer.final_compactness},
                            {"norm_blowup", cer.norm_blowup},
                            {"residual_stall", cer.residual_stall},
                            {"trivial_attractor", cer.trivial_attractor},
                            {"zero_level_nontrivial", cer.zero_level_nontrivial}};
    json trace = json::array();
    for (const auto& s : cp.cerami_trace)
      trace.push_back({s.psi, s.compactness});
    out.result["trace"] = trace;
    if (!cp.failure_reason.empty())
      out.result["failure_reason"] = cp.failure_reason;

    // nodal profile with the Dirichlet boundary restored
    std::string csv = "# artifact_version=" CNLS_VERSION " config_hash=" +
                      cfg.config_hash + "\nr,u1,u2\n";
    const Eigen::VectorXd full1 = grid.extend_with_boundary(cp.state.u1);
    const Eigen::VectorXd full2 = grid.extend_with_boundary(cp.state.u2);
    for (int i = 0; i < grid.n_total(); ++i)
      csv += fmt17(grid.nodes[i]) + "," + fmt17(full1[i]) + "," +
             fmt17(full2[i]) + "\n";
    out.profile_csv = std::move(csv);
  } catch (const std::exception& err) {
    out.row.accepted = false;
    out.row.note = err.what();
    out.result["accepted"] = false;
    out.result["failure_reason"] = err.what();
  }
  return out;
}

}  // namespace

std::vector<SweepRow> solve_all(const ExperimentConfig& cfg) {
  // two shared instances at most: the base signs and the flipped signs
  PreparedProblem base = prepare(cfg, 0.0);

  std::vector<double> lambdas;
  for (const auto& req : cfg.lambdas)
    lambdas.push_back(resolve_lambda(req, base.seq.mus));
  const bool any_negative =
      std::any_of(lambdas.begin(), lambdas.end(), [](double l) { return l < 0.0; });
  std::optional<PreparedProblem> flipped;
  if (any_negative) flipped.emplace(prepare(cfg, -1.0));

  std::vector<LambdaOutcome> outcomes(lambdas.size());
  std::mutex io_mutex;
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= lambdas.size()) return;
      const PreparedProblem& prep =
          lambdas[i] < 0.0 ? *flipped : base;
      LambdaOutcome out =
          solve_one(cfg, prep.grid, *prep.ctx, prep.seq, cfg.lambdas[i],
                    lambdas[i], i);
      if (cfg.write_json) {
        std::lock_guard<std::mutex> lock(io_mutex);
        write_text(fs::path(cfg.out_dir) /
                       ("result_" + lambda_tag(lambdas[i]) + ".json"),
                   out.result.dump(2) + "\n");
      }
      if (cfg.write_csv && !out.profile_csv.empty()) {
        std::lock_guard<std::mutex> lock(io_mutex);
        write_text(fs::path(cfg.out_dir) /
                       ("profile_" + lambda_tag(lambdas[i]) + ".csv"),
                   out.profile_csv);
      }
      outcomes[i] = std::move(out);
    }
  };
  const unsigned pool = std::max(1u, std::min<unsigned>(
                                         std::thread::hardware_concurrency(),
                                         static_cast<unsigned>(lambdas.size())));
  std::vector<std::thread> threads;
  for (unsigned t = 0; t < pool; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  std::vector<SweepRow> rows;
  for (auto& out : outcomes) rows.push_back(out.row);

  if (cfg.write_csv) {
    std::string csv = "# artifact_version=" CNLS_VERSION " config_hash=" +
                      cfg.config_hash +
                      "\nlambda,m,d,residual,u1_norm,u2_norm,iters,accepted\n";
    for (const auto& row : rows)
      csv += fmt17(row.lambda) + "," + std::to_string(row.m) + "," +
             fmt17(row.level) + "," + fmt17(row.residual) + "," +
             fmt17(row.u1_norm) + "," + fmt17(row.u2_norm) + "," +
             std::to_string(row.iterations) + "," +
             (row.accepted ? "1" : "0") + "\n";
    write_text(fs::path(cfg.out_dir) / "sweep.csv", csv);
  }
  return rows;
}

std::vector<std::vector<SweepRow>> refinement_study(
    const ExperimentConfig& cfg,
    const std::vector<std::pair<int, double>>& grids) {
  std::vector<std::vector<SweepRow>> out;
  for (const auto& [n_nodes, radius] : grids) {
    ExperimentConfig variant = cfg;
    variant.grid.n_nodes = n_nodes;
    variant.grid.radius = radius;
    variant.write_json = false;
    variant.write_csv = false;
    out.push_back(solve_all(variant));
  }
  return out;
}

int run_solve(const ExperimentConfig& cfg) {
  const std::vector<SweepRow> rows = solve_all(cfg);
  const bool any_ok =
      std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.accepted; });
  return any_ok ? kExitOk : kExitSolveFailed;
}

int run_verify(const ExperimentConfig& cfg, bool corrupt_stencil) {
  PreparedProblem base = prepare(cfg, 0.0);
  const double lambda =
      std::abs(resolve_lambda(cfg.lambdas.front(), base.seq.mus));

  VerifyOptions vopts;
  vopts.seed = cfg.seed;
  vopts.corrupt_stencil = corrupt_stencil;
  std::vector<VerifySuiteResult> rows =
      run_all_suites(*base.ctx, lambda, vopts);

  // hypothesis certificates on the configured problem
  ProblemSpec spec = instantiate_problem(cfg, base.grid, lambda);
  SamplingPlan plan;
  plan.seed = cfg.seed;
  const HypothesisReport hyp = check_hypotheses(spec, base.grid, plan);

  // exhaustive cross-check where the instance is small enough
  json brute = nullptr;
  if (base.ctx->dim() <= 12) {
    try {
      const ConeGeometry geom = locate_lambda(base.seq, lambda);
      SolverConfig scfg = cfg.solver;
      scfg.seed = cfg.seed;
      const CriticalPoint cp = geom.m == 0
                                   ? mountain_pass(*base.ctx, scfg, geom, lambda)
                                   : linking_flow(*base.ctx, scfg, geom, lambda);
      const BruteForceComparison cmp =
          brute_force_solution_check(*base.ctx, lambda, cp, cfg.seed);
      VerifySuiteResult r{.name = "small_instance_enumeration"};
      r.passed = cp.converged && cmp.matched && cmp.level_difference <= 1e-8;
      r.value = cmp.state_distance;
      r.detail = "distance " + fmt17(cmp.state_distance) + " over " +
                 std::to_string(cmp.n_critical_points) + " enumerated points";
      rows.push_back(r);
      brute = {{"n_critical_points", cmp.n_critical_points},
               {"levels", cmp.levels}};
    } catch (const std::exception& err) {
      rows.push_back({"small_instance_enumeration", false, 0.0, err.what()});
    }
  }

  json doc = meta_block(cfg);
  doc["lambda"] = lambda;
  json suites = json::array();
  bool all_ok = true;
  for (const auto& r : rows) {
    suites.push_back({{"name", r.name},
                      {"passed", r.passed},
                      {"value", r.value},
                      {"detail", r.detail}});
    all_ok = all_ok && r.passed;
  }
  doc["suites"] = suites;
  json hyps = json::array();
  for (const auto& c : hyp.checks) {
    hyps.push_back({{"id", c.id},
                    {"passed", c.passed},
                    {"applicable", c.applicable},
                    {"detail", c.detail}});
    all_ok = all_ok && c.passed;
  }
  doc["hypotheses"] = hyps;
  if (!brute.is_null()) doc["enumeration"] = brute;
  doc["all_passed"] = all_ok;
  if (cfg.write_json)
    write_text(fs::path(cfg.out_dir) / "verify.json", doc.dump(2) + "\n");
  return all_ok ? kExitOk : kExitSolveFailed;
}

}  // namespace cnls
