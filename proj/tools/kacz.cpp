// kacz: command-line harness for the row-action solver library.
// Subcommands: solve (single run with trace output), bench (seeded sweep
// suites), verify (convergence certification of a run).

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "kaczmarz/kaczmarz.hpp"

namespace fs = std::filesystem;
using namespace kaczmarz;

namespace {

SyntheticSpec parse_synthetic(const std::string& text, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.seed = seed;
  bool have_m = false, have_n = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string item = text.substr(pos, comma - pos);
    pos = comma + 1;
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("synthetic spec items look like key=value, got '" +
                        item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      if (key == "m") {
        spec.m = std::stoull(value);
        have_m = true;
      } else if (key == "n") {
        spec.n = std::stoull(value);
        have_n = true;
      } else if (key == "t") {
        spec.t = std::stod(value);
      } else if (key == "seed") {
        spec.seed = std::stoull(value);
      } else {
        throw ConfigError("unknown synthetic key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw ConfigError("bad synthetic value '" + value + "'");
    } catch (const std::out_of_range&) {
      throw ConfigError("synthetic value out of range: '" + value + "'");
    }
  }
  if (!have_m || !have_n)
    throw ConfigError("synthetic spec needs at least m=...,n=...");
  return spec;
}

ProblemBundle load_problem(const std::string& matrix_path,
                           const std::string& synthetic, std::uint64_t seed) {
  if (!matrix_path.empty() && !synthetic.empty())
    throw ConfigError("choose either --matrix or --synthetic, not both");
  if (!matrix_path.empty())
    return load_matrix_market_problem(matrix_path, seed);
  if (!synthetic.empty())
    return generate_synthetic(parse_synthetic(synthetic, seed));
  throw ConfigError("an input is required: --matrix FILE or --synthetic SPEC");
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

std::string report_string(const CheckReport& r) {
  if (!r.applicable) return "skipped";
  if (r.vacuous) return "vacuous";
  if (r.pass) return "pass";
  return "fail@" + std::to_string(r.first_violation_k.value_or(0));
}

struct SolveArgs {
  std::string matrix, synthetic, variant = "gmirk", rule = "residual";
  std::string stop = "rse", out_dir = ".";
  std::uint64_t seed = 0;
  double rse_tol = 1e-12;
  std::size_t max_iters = 1000000;
  std::size_t refresh = 50;
};

int cmd_solve(const SolveArgs& args) {
  ProblemBundle problem = load_problem(args.matrix, args.synthetic, args.seed);
  RunConfig cfg;
  cfg.variant = variant_from_name(args.variant);
  cfg.rule = rule_from_name(args.rule);
  cfg.seed = args.seed;
  cfg.rse_tol = args.rse_tol;
  cfg.max_iters = args.max_iters;
  cfg.residual_refresh_period = args.refresh;
  if (args.stop == "rse")
    cfg.stopping = StoppingRule::Rse;
  else if (args.stop == "residual")
    cfg.stopping = StoppingRule::Residual;
  else
    throw ConfigError("--stop takes rse or residual");

  IterationTrace trace = std::visit(
      [&](const auto& sys) {
        if (cfg.stopping == StoppingRule::Rse) {
          SpectralSummary spectral = spectral_summary(sys);
          return run(sys, cfg, spectral.x_star);
        }
        return run(sys, cfg);
      },
      problem.sys);

  fs::create_directories(args.out_dir);
  std::ostringstream csv;
  write_trace_csv(trace, csv);
  write_file(fs::path(args.out_dir) / "trace.csv", csv.str());
  std::ostringstream json;
  write_summary_json(summarize(trace), json);
  write_file(fs::path(args.out_dir) / "summary.json", json.str());

  if (trace.termination == Termination::MaxIters) {
    std::cerr << "max iterations reached after " << trace.rows.size()
              << " steps\n";
    return 2;
  }
  std::cout << "converged in " << trace.rows.size() << " iterations";
  if (!std::isnan(trace.final_rse))
    std::cout << " (final rse " << trace.final_rse << ")";
  std::cout << "\n";
  return 0;
}

struct BenchArgs {
  std::string axis = "rows", rule = "residual", out_dir = ".";
  std::vector<std::size_t> rows, cols;
  std::vector<double> t_values{0.1, 0.5, 0.9};
  std::vector<std::string> variants{"grk", "gmirk"};
  std::vector<std::string> matrices;
  std::size_t trials = 20;
  std::uint64_t base_seed = 0;
  double rse_tol = 1e-12;
  std::size_t max_iters = 2000000;
  std::size_t gram_cap = 2048;
};

int cmd_bench(const BenchArgs& args) {
  BenchPlan plan;
  plan.axis = axis_from_name(args.axis);
  if (plan.axis == BenchAxis::Rows) {
    plan.sizes = args.rows;
    if (args.cols.size() > 1)
      throw ConfigError("rows axis takes a single --cols value");
    if (!args.cols.empty()) plan.fixed_cols = args.cols[0];
  } else if (plan.axis == BenchAxis::Cols) {
    plan.sizes = args.cols;
    if (args.rows.size() > 1)
      throw ConfigError("cols axis takes a single --rows value");
    if (!args.rows.empty()) plan.fixed_rows = args.rows[0];
  }
  plan.t_values = args.t_values;
  plan.variants.clear();
  for (const auto& name : args.variants)
    plan.variants.push_back(variant_from_name(name));
  plan.trials = args.trials;
  plan.base_seed = args.base_seed;
  plan.rse_tol = args.rse_tol;
  plan.max_iters = args.max_iters;
  plan.rule = rule_from_name(args.rule);
  plan.matrix_paths = args.matrices;
  plan.gram_rows_cap = args.gram_cap;

  auto table = run_bench(plan);
  fs::create_directories(args.out_dir);
  std::ostringstream csv;
  write_bench_csv(table, csv);
  write_file(fs::path(args.out_dir) / "bench.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

struct VerifyArgs {
  std::string matrix, synthetic, rule = "residual", out_dir;
  std::uint64_t seed = 0;
  double rse_tol = 1e-12;
  std::size_t max_iters = 200000;
  std::size_t delta_cap = kDeltaRowsCap;
  bool corrupt = false;
};

int cmd_verify(const VerifyArgs& args) {
  ProblemBundle problem = load_problem(args.matrix, args.synthetic, args.seed);
  nlohmann::ordered_json report = std::visit(
      [&](const auto& sys) {
        SpectralSummary spectral = spectral_summary(sys);
        CoherenceSummary coherence =
            coherence_summary(sys, args.delta_cap);
        ConvergenceCertificate cert =
            certificate(sys.frob_sq(), spectral, coherence);

        RunConfig cfg;
        cfg.variant = Variant::Gmirk;
        cfg.rule = rule_from_name(args.rule);
        cfg.seed = args.seed;
        cfg.rse_tol = args.rse_tol;
        cfg.max_iters = args.max_iters;
        cfg.retain_iterates = true;
        IterationTrace trace = run(sys, cfg, spectral.x_star);

        std::vector<double> x0(sys.cols(), 0.0);
        const double err0 = dist_sq(x0, spectral.x_star);
        if (args.corrupt && !trace.rows.empty()) {
          trace.iterates[1] = trace.iterates[0];
          trace.rows[0].rse = err0 / trace.norm_x_star_sq;
        }

        const double slack = 1e-9;
        auto bound = check_theorem_bound(trace, cert, err0, slack);
        auto lemma1 = check_lemma_residuals(trace, sys);
        auto lemma2 = check_lemma2_maxratio(trace);

        nlohmann::ordered_json j;
        j["bound"] = report_string(bound);
        j["lemma1"] = report_string(lemma1);
        j["lemma2"] = report_string(lemma2);
        j["bound_rel_slack"] = slack;
        nlohmann::ordered_json c;
        c["rho0"] = cert.rho0;
        c["rho1"] = cert.rho1;
        c["rho2"] = std::isfinite(cert.rho2) ? nlohmann::ordered_json(cert.rho2)
                                             : nlohmann::ordered_json(nullptr);
        c["sigma_min_sq"] = cert.sigma_min_sq;
        c["gamma1"] = cert.gamma1;
        c["gamma2"] = cert.gamma2;
        c["delta"] = cert.delta;
        c["degenerate"] = cert.degenerate;
        j["certificate"] = c;
        nlohmann::ordered_json r;
        r["variant"] = std::string(variant_name(trace.variant));
        r["seed"] = trace.seed;
        r["iters"] = trace.rows.size();
        r["final_rse"] = trace.final_rse;
        j["run"] = r;
        return j;
      },
      problem.sys);

  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (!args.out_dir.empty()) {
    fs::create_directories(args.out_dir);
    write_file(fs::path(args.out_dir) / "report.json", text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Row-action Kaczmarz solvers: greedy and inertial variants"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Key/value config file with [subcommand] sections; "
                 "command-line flags win on conflict");

  SolveArgs solve_args;
  auto* solve = app.add_subcommand("solve", "Run one solver and write its trace");
  solve->add_option("--matrix", solve_args.matrix, "MatrixMarket .mtx input");
  solve->add_option("--synthetic", solve_args.synthetic,
                    "Synthetic problem, e.g. m=100,n=100,t=0.5");
  solve->add_option("--variant", solve_args.variant,
                    "rk | grk | mirk | gmirk | oblique");
  solve->add_option("--seed", solve_args.seed, "Random seed");
  solve->add_option("--rse-tol", solve_args.rse_tol, "Stopping tolerance");
  solve->add_option("--max-iters", solve_args.max_iters, "Iteration cap");
  solve->add_option("--rule", solve_args.rule, "residual | uniform | argmax");
  solve->add_option("--stop", solve_args.stop,
                    "rse (needs the SVD reference) or residual");
  solve->add_option("--refresh", solve_args.refresh,
                    "Residual refresh period");
  solve->add_option("--out", solve_args.out_dir, "Output directory");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Seeded sweep suites (CSV output)");
  bench->add_option("--axis", bench_args.axis, "rows | cols | fixed");
  bench->add_option("--rows", bench_args.rows, "Row counts")->delimiter(',');
  bench->add_option("--cols", bench_args.cols, "Column counts")->delimiter(',');
  bench->add_option("--t", bench_args.t_values, "Uniform lower endpoints")
      ->delimiter(',');
  bench->add_option("--variants", bench_args.variants, "Solvers to compare")
      ->delimiter(',');
  bench->add_option("--trials", bench_args.trials, "Trials per cell");
  bench->add_option("--base-seed", bench_args.base_seed,
                    "Seed of trial 0; trial i uses base+i");
  bench->add_option("--rse-tol", bench_args.rse_tol, "Stopping tolerance");
  bench->add_option("--max-iters", bench_args.max_iters, "Iteration cap");
  bench->add_option("--rule", bench_args.rule, "Probability rule");
  bench->add_option("--matrix", bench_args.matrices,
                    "MatrixMarket files (fixed axis, repeatable)");
  bench->add_option("--gram-cap", bench_args.gram_cap,
                    "Max rows for the Gram cache");
  bench->add_option("--out", bench_args.out_dir, "Output directory");

  VerifyArgs verify_args;
  auto* verify =
      app.add_subcommand("verify", "Certify a gmirk run (JSON report)");
  verify->add_option("--matrix", verify_args.matrix, "MatrixMarket .mtx input");
  verify->add_option("--synthetic", verify_args.synthetic, "Synthetic problem");
  verify->add_option("--seed", verify_args.seed, "Random seed");
  verify->add_option("--rse-tol", verify_args.rse_tol, "Stopping tolerance");
  verify->add_option("--max-iters", verify_args.max_iters, "Iteration cap");
  verify->add_option("--rule", verify_args.rule, "Probability rule");
  verify->add_option("--delta-cap", verify_args.delta_cap,
                     "Row cap for the O(m^2) coherence scan");
  verify->add_flag("--corrupt", verify_args.corrupt,
                   "Inject a corrupted first iterate (testing aid)");
  verify->add_option("--out", verify_args.out_dir,
                     "Also write report.json here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(solve_args);
    if (bench->parsed()) return cmd_bench(bench_args);
    if (verify->parsed()) return cmd_verify(verify_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
